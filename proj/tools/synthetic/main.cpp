// Writes a planted synthetic corpus and query set.

#include <iostream>

#include <CLI11.hpp>

#include "ause/binary_io.hpp"
#include "synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ause-synth: planted synthetic knowledge base"};
  ause::synthetic::Spec spec;
  std::string corpus = "corpus.jsonl";
  std::string queries = "queries.jsonl";
  app.add_option("--documents", spec.documents, "number of documents");
  app.add_option("--queries", spec.queries, "number of queries (at most one per document)");
  app.add_option("--seed", spec.seed, "random seed");
  app.add_option("--corpus-out", corpus, "corpus output path");
  app.add_option("--queries-out", queries, "query output path");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto data = ause::synthetic::generate(spec);
    ause::write_file_atomic(corpus, ause::synthetic::documents_to_jsonl(data.documents));
    ause::write_file_atomic(queries, ause::synthetic::queries_to_jsonl(data.queries));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
