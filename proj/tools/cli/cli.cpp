#include "cli.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ause/binary_io.hpp"
#include "ause/corpus.hpp"
#include "ause/decoder.hpp"
#include "ause/errors.hpp"
#include "ause/fm_index.hpp"
#include "ause/model.hpp"
#include "ause/rag.hpp"
#include "ause/training.hpp"

namespace ause::cli {
namespace {

using Json = nlohmann::ordered_json;

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ValidationError("invalid value for " + std::string(key) + ": \"" + std::string(value) + "\"");
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string snake(std::string_view key) {
  std::string out(key);
  for (char& c : out) c = c == '-' ? '_' : c;
  return out;
}

std::string kebab(std::string_view key) {
  std::string out(key);
  for (char& c : out) c = c == '_' ? '-' : c;
  return out;
}

struct Field {
  const char* name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
  const char* help;
};

std::string path_text(const std::filesystem::path& p) { return p.empty() ? "" : std::filesystem::absolute(p).lexically_normal().string(); }

#define AUSE_PATH_FIELD(f, help) \
  Field{#f, [](RunConfig& c, std::string_view v) { c.f = std::string(v); }, [](const RunConfig& c) { return path_text(c.f); }, help}
#define AUSE_SIZE_FIELD(f, help)                                                                 \
  Field{#f, [](RunConfig& c, std::string_view v) { c.f = parse_number<std::size_t>(#f, v); }, \
        [](const RunConfig& c) { return std::to_string(c.f); }, help}
#define AUSE_REAL_FIELD(f, help)                                                            \
  Field{#f, [](RunConfig& c, std::string_view v) { c.f = parse_number<double>(#f, v); }, \
        [](const RunConfig& c) { return format_double(c.f); }, help}

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields{
      AUSE_PATH_FIELD(corpus, "corpus JSONL (doc_id, title, text)"),
      AUSE_PATH_FIELD(queries, "query JSONL"),
      AUSE_PATH_FIELD(index, "FM-Index file"),
      AUSE_PATH_FIELD(model, "model checkpoint"),
      AUSE_PATH_FIELD(calibrated_model, "calibrated checkpoint written by calibrate"),
      AUSE_PATH_FIELD(output_dir, "directory for reports and the run manifest"),
      Field{"query", [](RunConfig& c, std::string_view v) { c.query = std::string(v); },
            [](const RunConfig& c) { return c.query; }, "free-text query for retrieve"},
      AUSE_SIZE_FIELD(identifier_len, "identifier length / decoding steps"),
      AUSE_SIZE_FIELD(beam_width, "beam width"),
      AUSE_SIZE_FIELD(top_k, "documents passed to the answer generator"),
      Field{"recall_ks",
            [](RunConfig& c, std::string_view v) {
              c.recall_ks.clear();
              std::string item;
              std::istringstream in{std::string(v)};
              while (std::getline(in, item, ',')) c.recall_ks.push_back(parse_number<std::size_t>("recall_ks", trim(item)));
            },
            [](const RunConfig& c) {
              std::string s;
              for (auto k : c.recall_ks) s += (s.empty() ? "" : ",") + std::to_string(k);
              return s;
            },
            "comma-separated K values for PRR@K"},
      AUSE_SIZE_FIELD(sample_rate, "suffix-array sampling rate of the index"),
      AUSE_REAL_FIELD(w_vqa, "weight of the answer reward"),
      AUSE_REAL_FIELD(w_hit, "weight of the answer-hit reward"),
      AUSE_REAL_FIELD(w_sim, "weight of the similarity reward"),
      AUSE_REAL_FIELD(beta, "DPO beta"),
      AUSE_SIZE_FIELD(k, "identifiers sampled per query during calibration"),
      AUSE_REAL_FIELD(temperature, "sampling temperature"),
      Field{"seed",
            [](RunConfig& c, std::string_view v) {
              if (v.empty()) c.seed.reset();
              else c.seed = parse_number<std::uint64_t>("seed", v);
            },
            [](const RunConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); }, "master random seed"},
      AUSE_REAL_FIELD(lr, "SFT learning rate"),
      AUSE_SIZE_FIELD(epochs, "SFT epochs"),
      AUSE_REAL_FIELD(dpo_lr, "DPO learning rate"),
      AUSE_SIZE_FIELD(dpo_epochs, "DPO epochs"),
      AUSE_REAL_FIELD(generator_lr, "answer generator learning rate"),
      AUSE_SIZE_FIELD(generator_epochs, "answer generator epochs"),
  };
  return kFields;
}

#undef AUSE_PATH_FIELD
#undef AUSE_SIZE_FIELD
#undef AUSE_REAL_FIELD

void require(const std::filesystem::path& p, const char* key) {
  if (p.empty()) throw ValidationError(std::string("missing required setting: ") + key);
}

void require_file(const std::filesystem::path& p, const char* key) {
  require(p, key);
  if (!std::filesystem::is_regular_file(p)) throw Error(std::string(key) + " file not found: " + p.string());
}

void require_seed(const RunConfig& c) {
  if (!c.seed) throw ValidationError("this command needs a seed (--seed or seed=)");
}

void write_manifest(const RunConfig& c, std::string_view command) {
  std::filesystem::create_directories(c.output_dir);
  std::string text = "# ause " + std::string(command) + "\n" + c.to_text();
  write_file_atomic(c.output_dir / ("manifest-" + std::string(command) + ".txt"), text);
}

/// Every line must parse as JSON; returns the record count.
std::size_t validate_jsonl(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (!Json::accept(line)) throw Error("internal error: produced invalid JSON in " + what);
    ++n;
  }
  return n;
}

void write_jsonl(const std::filesystem::path& path, const std::string& text) {
  validate_jsonl(text, path.string());
  write_file_atomic(path, text);
}

RewardConfig rewards_of(const RunConfig& c) { return {c.w_vqa, c.w_hit, c.w_sim, c.beta}; }

struct Loaded {
  KnowledgeBase kb;
  FmIndex index;
};

Loaded load_kb_and_index(const RunConfig& c) {
  require_file(c.corpus, "corpus");
  require_file(c.index, "index");
  KnowledgeBase kb(load_corpus(c.corpus));
  if (kb.size() == 0) throw ValidationError("corpus is empty");
  FmIndex index = FmIndex::load(c.index);
  if (!(index.vocabulary() == kb.vocabulary())) {
    throw ValidationError("index " + c.index.string() + " was built from a different corpus");
  }
  return {std::move(kb), std::move(index)};
}

ModelCheckpoint load_model(const std::filesystem::path& path, const KnowledgeBase& kb) {
  auto ck = ModelCheckpoint::load(path);
  if (ck.vocab_fingerprint != kb.vocabulary().fingerprint() ||
      ck.scorer.vocab_size() != kb.vocabulary().content_size()) {
    throw ValidationError("checkpoint " + path.string() + " belongs to a different vocabulary");
  }
  return ck;
}

std::vector<Query> load_query_file(const RunConfig& c, const KnowledgeBase& kb) {
  require_file(c.queries, "queries");
  auto queries = load_queries(c.queries);
  if (queries.empty()) throw ValidationError("query file is empty");
  check_gold_references(queries, kb.documents());
  return queries;
}

void save_checkpoint(const ModelCheckpoint& ck, const std::filesystem::path& path) {
  ck.save(path);
  if (ModelCheckpoint::load(path).serialize() != ck.serialize()) {
    throw Error("checkpoint " + path.string() + " did not read back identically");
  }
}

Json words_json(const std::vector<TokenId>& tokens, const Vocabulary& vocab) {
  Json a = Json::array();
  for (auto t : tokens) a.push_back(vocab.word(t));
  return a;
}

void configure_logging() {
  static bool done = false;
  if (done) return;
  done = true;
  auto logger = spdlog::stderr_color_mt("ause");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("AUSE_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto name = snake(key);
  for (const auto& f : fields()) {
    if (name == f.name) {
      f.set(*this, trim(value));
      return;
    }
  }
  throw ValidationError("unknown setting: " + std::string(key));
}

void RunConfig::validate() const {
  if (identifier_len < 1 || identifier_len > 1000) throw ValidationError("identifier_len must be in [1, 1000]");
  if (beam_width < 1) throw ValidationError("beam_width must be at least 1");
  if (top_k < 1) throw ValidationError("top_k must be at least 1");
  if (recall_ks.empty()) throw ValidationError("recall_ks needs at least one value");
  for (auto v : recall_ks) {
    if (v < 1) throw ValidationError("recall_ks values must be at least 1");
  }
  if (sample_rate < 1) throw ValidationError("sample_rate must be at least 1");
  rewards_of(*this).validate();
  if (k < 2) throw ValidationError("k must be at least 2");
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  for (double v : {lr, dpo_lr, generator_lr}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("learning rates must be finite and nonnegative");
  }
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.name) + "=" + f.get(*this) + "\n";
  return out;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.name);
  return out;
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
    try {
      base.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

// ---------------------------------------------------------------------------
// Commands

void cmd_build_index(const RunConfig& c) {
  require_file(c.corpus, "corpus");
  require(c.index, "index");
  require(c.output_dir, "output_dir");
  const auto start = std::chrono::steady_clock::now();
  KnowledgeBase kb(load_corpus(c.corpus));
  if (kb.size() == 0) throw ValidationError("corpus is empty");
  IndexOptions opt;
  opt.sample_rate = c.sample_rate;
  auto index = FmIndex::build(kb, opt);
  const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  const auto bytes = index.serialize();
  write_file_atomic(c.index, bytes);
  if (FmIndex::load(c.index).serialize() != bytes) throw Error("index did not read back identically");

  Json stats;
  stats["documents"] = index.document_count();
  stats["tokens"] = index.size();
  stats["vocab_size"] = kb.vocabulary().size();
  stats["content_vocab_size"] = kb.vocabulary().content_size();
  stats["index_bytes"] = bytes.size();
  stats["build_ms"] = elapsed;
  write_manifest(c, "build-index");
  write_file_atomic(c.output_dir / "index_stats.json", stats.dump(2) + "\n");
  spdlog::info("indexed {} documents, {} rows, vocabulary {} in {:.1f} ms", index.document_count(), index.size(),
               kb.vocabulary().size(), elapsed);
}

void cmd_train_sft(const RunConfig& c) {
  require_seed(c);
  require(c.model, "model");
  require(c.output_dir, "output_dir");
  auto [kb, index] = load_kb_and_index(c);
  const auto queries = load_query_file(c, kb);
  const auto& vocab = kb.vocabulary();

  std::vector<SftExample> sft;
  std::vector<GeneratorExample> gen_data;
  std::string targets;
  for (const auto& q : queries) {
    std::optional<std::size_t> ord;
    for (const auto& id : q.gold_doc_ids) {
      if ((ord = kb.ordinal(id))) break;
    }
    if (!ord) {
      spdlog::warn("query {} has no known gold document; skipped for training", q.query_id);
      continue;
    }
    const auto target = extract_target_identifier(kb.tokens(*ord), q, c.identifier_len, index);
    sft.push_back({encode_query(q, vocab), target.tokens});
    Json t;
    t["query_id"] = q.query_id;
    t["doc_id"] = target.doc_id;
    t["identifier"] = words_json(target.tokens, vocab);
    t["offset"] = target.offset;
    t["answer_hits"] = target.answer_hits;
    t["unique"] = target.unique;
    targets += t.dump() + "\n";

    auto gold = gold_answer_in_document(ReferenceAnswerGenerator{}, q, kb.words(*ord));
    if (gold) gen_data.push_back({q, kb.words(*ord), *gold});
  }
  if (sft.empty()) throw ValidationError("no query has a gold document in the corpus");

  ModelCheckpoint ck;
  ck.vocab_fingerprint = vocab.fingerprint();
  ck.scorer = ReferenceScorer(vocab.content_size());
  const auto report = train_sft(ck.scorer, sft, {c.epochs, c.lr, *c.seed});
  ck.generator = ReferenceAnswerGenerator::with_prior();
  const auto gen_curve = train_answer_generator(ck.generator, gen_data, c.generator_epochs, c.generator_lr, *c.seed);

  std::string gen_text;
  for (std::size_t e = 0; e < gen_curve.size(); ++e) {
    Json j;
    j["epoch"] = e;
    j["mean_loss"] = gen_curve[e];
    gen_text += j.dump() + "\n";
  }
  write_manifest(c, "train-sft");
  write_jsonl(c.output_dir / "targets.jsonl", targets);
  write_jsonl(c.output_dir / "sft_loss.jsonl", training_report_to_jsonl(report));
  write_jsonl(c.output_dir / "generator_loss.jsonl", gen_text);
  save_checkpoint(ck, c.model);
  spdlog::info("SFT on {} examples: mean loss {:.4f} -> {:.4f}", sft.size(), report.epoch_mean_loss.front(),
               report.epoch_mean_loss.back());
}

void cmd_calibrate(const RunConfig& c) {
  require_seed(c);
  require_file(c.model, "model");
  require(c.calibrated_model, "calibrated_model");
  require(c.output_dir, "output_dir");
  auto [kb, index] = load_kb_and_index(c);
  const auto queries = load_query_file(c, kb);
  auto ck = load_model(c.model, kb);

  TermFrequencyEmbedder embedder(kb.vocabulary());
  CalibrationOptions opt;
  opt.sampling = {c.k, c.temperature, c.identifier_len};
  opt.rewards = rewards_of(c);
  opt.seed = *c.seed;
  // the vqa reward is judged by the untrained generator, not the fitted one
  const auto reward_model = ReferenceAnswerGenerator::with_prior();
  const auto prefs = collect_preferences(queries, index, kb, ck.scorer, reward_model, embedder, opt);
  if (prefs.triplets.empty()) spdlog::warn("no query produced a preference triplet; checkpoint unchanged");
  const auto report = train_dpo(ck.scorer, prefs.triplets, {c.beta, c.dpo_epochs, c.dpo_lr, *c.seed});

  write_manifest(c, "calibrate");
  write_jsonl(c.output_dir / "samples.jsonl", samples_to_jsonl(prefs, kb.vocabulary()));
  write_jsonl(c.output_dir / "triplets.jsonl", triplets_to_jsonl(prefs.triplets, kb.vocabulary()));
  write_jsonl(c.output_dir / "dpo_loss.jsonl", training_report_to_jsonl(report));
  save_checkpoint(ck, c.calibrated_model);
  spdlog::info("calibrated on {} triplets from {} queries", prefs.triplets.size(), queries.size());
}

void cmd_retrieve(const RunConfig& c) {
  require_file(c.model, "model");
  require(c.output_dir, "output_dir");
  auto [kb, index] = load_kb_and_index(c);
  const auto ck = load_model(c.model, kb);
  std::vector<Query> queries;
  if (!c.query.empty()) {
    Query q;
    q.query_id = "query";
    q.question = c.query;
    queries.push_back(std::move(q));
  } else {
    require_file(c.queries, "queries");
    queries = load_queries(c.queries);
    if (queries.empty()) throw ValidationError("query file is empty");
  }

  std::string out;
  for (const auto& q : queries) {
    const auto encoded = encode_query(q, kb.vocabulary());
    const auto results = constrained_beam_search(index, ck.scorer, encoded, {c.beam_width, c.identifier_len, {}});
    const auto ranked = results.empty() ? RankedDocuments{} : map_to_documents(results, c.top_k);
    Json j;
    j["query_id"] = q.query_id;
    j["documents"] = Json::array();
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      Json d;
      d["rank"] = r + 1;
      d["doc_id"] = ranked[r].doc_id;
      d["logprob"] = ranked[r].logprob;
      d["identifier"] = words_json(ranked[r].identifier, kb.vocabulary());
      j["documents"].push_back(std::move(d));
    }
    j["identifiers"] = Json::array();
    for (const auto& res : results) {
      Json i;
      i["tokens"] = words_json(res.identifier, kb.vocabulary());
      i["logprob"] = res.logprob;
      i["doc_ids"] = res.doc_ids;
      j["identifiers"].push_back(std::move(i));
    }
    out += j.dump() + "\n";
  }
  write_manifest(c, "retrieve");
  write_jsonl(c.output_dir / "retrieval.jsonl", out);
}

void cmd_eval(const RunConfig& c) {
  require_file(c.model, "model");
  require(c.output_dir, "output_dir");
  auto [kb, index] = load_kb_and_index(c);
  const auto queries = load_query_file(c, kb);
  const auto ck = load_model(c.model, kb);
  EvalOptions opt;
  opt.beam_width = c.beam_width;
  opt.max_len = c.identifier_len;
  opt.top_k = c.top_k;
  opt.recall_ks = c.recall_ks;
  const auto report = evaluate(queries, index, kb, ck.scorer, ck.generator, opt);
  write_manifest(c, "eval");
  write_jsonl(c.output_dir / "eval.jsonl", to_jsonl(report, c.recall_ks));
  for (const auto& [k, v] : report.prr) std::cout << "PRR@" << k << " " << v << "\n";
  std::cout << "VQA " << report.mean_vqa_score << "\n";
  std::cout << "VQA(marginal) " << report.mean_marginal_vqa_score << "\n";
  if (report.mc_accuracy) std::cout << "MC " << *report.mc_accuracy << "\n";
}

// ---------------------------------------------------------------------------
// Entry point

int run(int argc, const char* const* argv) {
  configure_logging();
  CLI::App app{"ause: generative retrieval constrained by an FM-Index"};
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
    void (*fn)(const RunConfig&);
  };
  const std::vector<Command> commands{
      {"build-index", "build the FM-Index over a corpus", cmd_build_index},
      {"train-sft", "fit the retriever and answer generator on gold documents", cmd_train_sft},
      {"calibrate", "sample identifiers, build preference triplets and run DPO", cmd_calibrate},
      {"retrieve", "rank documents for a query or query file", cmd_retrieve},
      {"eval", "retrieve, answer and score a query file", cmd_eval},
  };

  std::string config_path;
  std::vector<std::string> values(fields().size());
  std::vector<std::pair<CLI::App*, std::vector<CLI::Option*>>> subs;
  for (const auto& cmd : commands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_path, "flat key=value config file")->check(CLI::ExistingFile);
    std::vector<CLI::Option*> opts;
    for (std::size_t i = 0; i < fields().size(); ++i) {
      opts.push_back(sub->add_option("--" + kebab(fields()[i].name), values[i], fields()[i].help));
    }
    subs.emplace_back(sub, std::move(opts));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (std::size_t s = 0; s < subs.size(); ++s) {
      auto& [sub, opts] = subs[s];
      if (!sub->parsed()) continue;
      RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
      for (std::size_t i = 0; i < opts.size(); ++i) {
        if (opts[i]->count() > 0) config.set(fields()[i].name, values[i]);
      }
      config.validate();
      commands[s].fn(config);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"ause"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ause::cli
