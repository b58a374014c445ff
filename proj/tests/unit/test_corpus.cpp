#include <gtest/gtest.h>

#include "ause/corpus.hpp"
#include "ause/errors.hpp"

namespace ause {
namespace {

TEST(Corpus, ParsesRecordsInOrder) {
  auto docs = parse_corpus(
      R"({"doc_id": "D1", "title": "Palm", "text": "the palm tree"})"
      "\n"
      R"({"doc_id": "D2", "title": "", "text": "the oak tree"})"
      "\n");
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].doc_id, "D1");
  EXPECT_EQ(docs[1].doc_id, "D2");
  EXPECT_EQ(docs[0].title, "Palm");
}

TEST(Corpus, RejectsDuplicateIds) {
  try {
    parse_corpus(R"({"doc_id": "D1", "title": "", "text": "a"})"
                 "\n"
                 R"({"doc_id": "D1", "title": "", "text": "b"})");
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate doc_id"), std::string::npos);
  }
}

TEST(Corpus, EmptyFileGivesNoDocuments) { EXPECT_TRUE(parse_corpus("").empty()); }

TEST(Corpus, MalformedLineNamesLineNumber) {
  try {
    parse_corpus(R"({"doc_id": "D1", "title": "", "text": "a"})"
                 "\n{not json\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Corpus, RejectsBlankBody) {
  EXPECT_THROW(parse_corpus(R"({"doc_id": "D1", "title": "t", "text": "  ...  "})"), ValidationError);
}

TEST(Vocabulary, CountsContentAndReservedIds) {
  std::vector<Document> docs{{"1", "", "a b"}, {"2", "", "b c"}};
  auto v = build_vocabulary(docs);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.content_size(), 3u);
  EXPECT_EQ(*v.find("a"), kFirstContentToken);
  EXPECT_EQ(*v.find("c"), kFirstContentToken + 2);
}

TEST(Vocabulary, SingleTokenDoc) {
  std::vector<Document> docs{{"1", "", "x"}};
  EXPECT_EQ(build_vocabulary(docs).size(), 3u);
}

TEST(Vocabulary, DeterministicAcrossBuilds) {
  std::vector<Document> docs{{"1", "Zeta", "b a c"}, {"2", "", "c d a"}};
  auto a = build_vocabulary(docs);
  auto b = build_vocabulary(docs);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_EQ(a.content_words(), (std::vector<std::string>{"a", "b", "c", "d", "zeta"}));
}

TEST(Vocabulary, EmptyCorpusIsRejected) {
  EXPECT_THROW(build_vocabulary(std::vector<Document>{}), ValidationError);
}

TEST(Tokenize, NormalizesCaseAndEdgePunctuation) {
  std::vector<Document> docs{{"1", "", "the palm tree"}};
  auto v = build_vocabulary(docs);
  auto ids = tokenize("The Palm tree.", v);
  EXPECT_EQ(detokenize(ids, v), "the palm tree");
  EXPECT_TRUE(tokenize("", v).empty());
  EXPECT_EQ(tokenize("palm banyan tree", v).size(), 2u);
}

TEST(Tokenize, KeepsInnerPunctuation) {
  EXPECT_EQ(split_words("\"Don't\" stop, e.g. now!"),
            (std::vector<std::string>{"don't", "stop", "e.g", "now"}));
}

TEST(Tokenize, IdempotentThroughDetokenize) {
  std::vector<Document> docs{{"1", "A Title!", "Some (mixed) Text, with: punctuation."}};
  auto v = build_vocabulary(docs);
  for (const auto& text : {std::string("Some (mixed) Text"), std::string("A title, with"), std::string("...")}) {
    auto once = tokenize(text, v);
    EXPECT_EQ(tokenize(detokenize(once, v), v), once);
  }
}

TEST(Tokenize, DocumentStreamIsTitleThenBody) {
  std::vector<Document> docs{{"1", "Palm", "grows tall"}};
  auto v = build_vocabulary(docs);
  auto td = tokenize_document(docs[0], v);
  EXPECT_EQ(detokenize(td.tokens, v), "palm grows tall");
  for (auto t : td.tokens) EXPECT_FALSE(Vocabulary::is_reserved(t));
}

TEST(Queries, ParsesOneRecord) {
  auto qs = parse_queries(
      R"({"query_id": "q1", "question": "What tree?", "caption": "a tree", "answers": [{"text": "palm", "count": 3}], "gold_doc_ids": ["D1"]})");
  ASSERT_EQ(qs.size(), 1u);
  EXPECT_EQ(qs[0].answers[0].count, 3);
  EXPECT_EQ(qs[0].gold_doc_ids, std::vector<std::string>{"D1"});
}

TEST(Queries, MissingAnswersIsAnError) {
  EXPECT_THROW(parse_queries(R"({"query_id": "q1", "question": "?", "caption": "", "answers": []})"),
               ValidationError);
  EXPECT_THROW(parse_queries(R"({"query_id": "q1", "question": "?", "caption": ""})"), ValidationError);
}

TEST(Queries, NonPositiveCountIsAnError) {
  EXPECT_THROW(
      parse_queries(R"({"query_id": "q1", "question": "?", "answers": [{"text": "x", "count": 0}]})"),
      ValidationError);
}

TEST(Queries, UnknownGoldDocumentIsKeptWithWarning) {
  auto qs = parse_queries(
      R"({"query_id": "q1", "question": "?", "caption": "", "answers": [{"text": "x", "count": 1}], "gold_doc_ids": ["nope"]})");
  std::vector<Document> docs{{"D1", "", "x"}};
  auto missing = check_gold_references(qs, docs);
  ASSERT_EQ(missing.size(), 1u);
  EXPECT_EQ(missing[0].second, "nope");
  EXPECT_EQ(qs[0].gold_doc_ids.size(), 1u);
}

TEST(Answers, NormalizationDropsArticlesAndPunctuation) {
  EXPECT_EQ(normalize_answer("The Palm-tree!"), "palm-tree");
  EXPECT_EQ(normalize_answer("an apple, a pear"), "apple pear");
}

}  // namespace
}  // namespace ause
