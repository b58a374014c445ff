#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ause/binary_io.hpp"
#include "ause/errors.hpp"
#include "ause/model.hpp"
#include "cli.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace ause;
using ause::cli::RunConfig;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("ause-cli-") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
  }

  RunConfig toy_config() {
    write(dir_ / "corpus.jsonl", synthetic::documents_to_jsonl({{"D1", "", "the palm tree"}, {"D2", "", "the oak tree"}}));
    RunConfig c;
    c.corpus = dir_ / "corpus.jsonl";
    c.index = dir_ / "toy.idx";
    c.model = dir_ / "toy.ckpt";
    c.output_dir = dir_ / "out";
    c.seed = 7;
    return c;
  }

  RunConfig synthetic_config(std::size_t docs, std::size_t queries) {
    synthetic::Spec spec;
    spec.documents = docs;
    spec.queries = queries;
    const auto data = synthetic::generate(spec);
    write(dir_ / "corpus.jsonl", synthetic::documents_to_jsonl(data.documents));
    write(dir_ / "queries.jsonl", synthetic::queries_to_jsonl(data.queries));
    RunConfig c;
    c.corpus = dir_ / "corpus.jsonl";
    c.queries = dir_ / "queries.jsonl";
    c.index = dir_ / "kb.idx";
    c.model = dir_ / "sft.ckpt";
    c.calibrated_model = dir_ / "dpo.ckpt";
    c.output_dir = dir_ / "out";
    c.seed = 3;
    c.epochs = 5;
    c.dpo_epochs = 2;
    c.generator_epochs = 10;
    return c;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, RetrievePalmRanksD1First) {
  auto c = toy_config();
  cli::cmd_build_index(c);

  // Oracle scorer: all mass on "palm", then on "tree".
  KnowledgeBase kb(load_corpus(c.corpus));
  const auto& vocab = kb.vocabulary();
  ModelCheckpoint ck;
  ck.vocab_fingerprint = vocab.fingerprint();
  const std::size_t v = vocab.content_size();
  ck.scorer = ReferenceScorer(v);
  auto p = ck.scorer.parameters();
  const std::size_t palm = *vocab.find("palm") - kFirstContentToken;
  const std::size_t tree = *vocab.find("tree") - kFirstContentToken;
  const std::size_t transitions = v + v * v;
  p[transitions + 0 * v + palm] = 50.0;            // start row
  p[transitions + (palm + 1) * v + tree] = 50.0;   // after "palm"
  ck.save(c.model);

  c.query = "where is the palm";
  c.identifier_len = 2;
  cli::cmd_retrieve(c);
  const auto text = slurp(c.output_dir / "retrieval.jsonl");
  EXPECT_NE(text.find(R"("documents":[{"rank":1,"doc_id":"D1")"), std::string::npos) << text;
}

TEST_F(CliTest, RunReturnsNonzeroOnMissingFile) {
  auto c = toy_config();
  EXPECT_NE(cli::run({"build-index", "--corpus", (dir_ / "missing.jsonl").string(), "--index", c.index.string(),
                      "--output-dir", c.output_dir.string()}),
            0);
  EXPECT_FALSE(fs::exists(c.index));
  EXPECT_NE(cli::run({"eval", "--beam-width", "0"}), 0);
  EXPECT_NE(cli::run({"retrieve", "--no-such-flag", "1"}), 0);
}

TEST_F(CliTest, TrainRequiresSeed) {
  auto c = synthetic_config(20, 5);
  cli::cmd_build_index(c);
  c.seed.reset();
  EXPECT_THROW(cli::cmd_train_sft(c), ValidationError);
}

TEST_F(CliTest, EvalRecallIsMonotoneInK) {
  auto c = synthetic_config(40, 20);
  c.recall_ks = {5, 10};
  c.top_k = 10;
  cli::cmd_build_index(c);
  cli::cmd_train_sft(c);
  cli::cmd_eval(c);
  const auto text = slurp(c.output_dir / "eval.jsonl");
  std::istringstream in(text);
  std::string line, last;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.find("\"prr@5\":1") != std::string::npos) {
      EXPECT_NE(line.find("\"prr@10\":1"), std::string::npos) << line;
    }
    last = line;
    ++rows;
  }
  EXPECT_EQ(rows, 21u);
  const auto at = [&](const std::string& key) {
    const auto pos = last.find("\"" + key + "\":");
    EXPECT_NE(pos, std::string::npos) << last;
    return std::stod(last.substr(pos + key.size() + 3));
  };
  EXPECT_GE(at("prr@10"), at("prr@5"));
}

TEST_F(CliTest, PipelineIsByteIdenticalAcrossRuns) {
  auto c = synthetic_config(30, 12);
  std::vector<std::string> first;
  const std::vector<std::string> files{"kb.idx", "sft.ckpt", "dpo.ckpt", "out/eval.jsonl", "out/samples.jsonl",
                                       "out/triplets.jsonl", "out/dpo_loss.jsonl", "out/sft_loss.jsonl"};
  for (int run = 0; run < 2; ++run) {
    cli::cmd_build_index(c);
    cli::cmd_train_sft(c);
    cli::cmd_calibrate(c);
    auto e = c;
    e.model = c.calibrated_model;
    cli::cmd_eval(e);
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto bytes = slurp(dir_ / files[i]);
      ASSERT_FALSE(bytes.empty()) << files[i];
      if (run == 0) {
        first.push_back(bytes);
      } else {
        EXPECT_EQ(bytes, first[i]) << files[i];
      }
    }
    fs::remove_all(c.output_dir);
  }
}

TEST_F(CliTest, ManifestReproducesOutputs) {
  auto c = synthetic_config(30, 10);
  cli::cmd_build_index(c);
  cli::cmd_train_sft(c);
  cli::cmd_eval(c);
  const auto manifest = c.output_dir / "manifest-eval.txt";
  ASSERT_TRUE(fs::exists(manifest));
  const auto report = slurp(c.output_dir / "eval.jsonl");

  const auto replay = cli::load_config(manifest);
  EXPECT_EQ(replay.to_text(), c.to_text());
  fs::remove(c.output_dir / "eval.jsonl");
  EXPECT_EQ(cli::run({"eval", "--config", manifest.string()}), 0);
  EXPECT_EQ(slurp(c.output_dir / "eval.jsonl"), report);
}

TEST(RunConfig, SetAcceptsBothSpellings) {
  RunConfig c;
  c.set("beam_width", "4");
  EXPECT_EQ(c.beam_width, 4u);
  c.set("beam-width", "6");
  EXPECT_EQ(c.beam_width, 6u);
  c.set("recall_ks", "1,5,10");
  EXPECT_EQ(c.recall_ks, (std::vector<std::size_t>{1, 5, 10}));
  EXPECT_THROW(c.set("nope", "1"), ValidationError);
  EXPECT_THROW(c.set("beam_width", "x"), ValidationError);
}

TEST(RunConfig, TextRoundTrip) {
  RunConfig c;
  c.seed = 11;
  c.temperature = 0.25;
  c.w_vqa = 0.5;
  c.w_hit = 0.25;
  c.w_sim = 0.25;
  c.corpus = "/tmp/c.jsonl";
  EXPECT_EQ(cli::parse_config(c.to_text()).to_text(), c.to_text());
}

TEST(RunConfig, ParseErrorsNameTheLine) {
  try {
    cli::parse_config("# comment\nbeam_width=3\n\nbogus line\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(RunConfig, ValidateRejectsOutOfRange) {
  const auto bad = [](auto mutate) {
    RunConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ValidationError);
  };
  bad([](RunConfig& c) { c.beam_width = 0; });
  bad([](RunConfig& c) { c.identifier_len = 0; });
  bad([](RunConfig& c) { c.temperature = 0; });
  bad([](RunConfig& c) { c.beta = -1; });
  bad([](RunConfig& c) { c.w_vqa = 0.9; });
  bad([](RunConfig& c) { c.k = 1; });
  RunConfig ok;
  EXPECT_NO_THROW(ok.validate());
}
