#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ause/corpus.hpp"

namespace ause {

/// Half-open row range [lo, hi) of the sorted suffixes, plus the number of
/// tokens matched so far. The width equals the number of corpus occurrences.
struct MatchInterval {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  std::uint32_t depth = 0;

  std::uint64_t width() const noexcept { return hi - lo; }
  bool empty() const noexcept { return hi <= lo; }
  bool operator==(const MatchInterval&) const = default;
};

struct TokenCount {
  TokenId token;
  std::uint64_t count;
  bool operator==(const TokenCount&) const = default;
};

struct IndexOptions {
  /// Every text position divisible by this is kept as a suffix-array sample.
  std::uint32_t sample_rate = 32;
  /// Distance between rank checkpoints in the BWT.
  std::uint32_t checkpoint_interval = 128;
};

/// FM-Index over the reversed corpus.
///
/// The indexed text is reverse(D_1) <sep> reverse(D_2) <sep> ... <sep> <end>.
/// Because the text is reversed, one backward-search step appends a token to
/// the right of a left-to-right pattern, so identifiers can be grown in the
/// order a decoder emits them.
///
/// Serialized layout (version 1, integers little-endian):
///   "AUSE" | u32 version | u32 sample_rate | u32 checkpoint_interval
///   | u32 n_words, n_words x (u32 len, bytes)          vocabulary
///   | u32 sigma, (sigma + 1) x u64                       C table
///   | u64 n, n x u32                                     BWT
///   | u64 n_checkpoints, n_checkpoints x sigma x u32     rank checkpoints
///   | u64 n_words, n_words x u64                         sampled-row bitmap
///   | u64 n_samples, n_samples x u32                     SA samples
///   | u32 n_docs, n_docs x (u64 start, u64 len, str id)  boundary table
///   | u64 FNV-1a of all preceding bytes
///
/// All query methods are const and thread-safe. The only mutable state is a
/// relaxed counter of rank queries used for complexity instrumentation.
class FmIndex {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  FmIndex() = default;
  FmIndex(const FmIndex& other);
  FmIndex(FmIndex&& other) noexcept;
  FmIndex& operator=(const FmIndex& other);
  FmIndex& operator=(FmIndex&& other) noexcept;

  /// Throws ValidationError on an empty corpus or a document holding a
  /// reserved token id.
  static FmIndex build(std::span<const TokenizedDocument> docs, Vocabulary vocab,
                       IndexOptions options = {});
  static FmIndex build(const KnowledgeBase& kb, IndexOptions options = {});

  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  /// Number of rows, i.e. |text| including separators and terminator.
  std::uint64_t size() const noexcept { return bwt_.size(); }
  std::size_t alphabet_size() const noexcept { return sigma_; }
  std::size_t content_vocab_size() const noexcept { return vocab_.content_size(); }
  std::size_t document_count() const noexcept { return doc_ids_.size(); }
  const std::string& document_id(std::size_t ordinal) const { return doc_ids_.at(ordinal); }
  const IndexOptions& options() const noexcept { return options_; }
  std::span<const TokenId> bwt() const noexcept { return bwt_; }
  std::uint64_t c_table(TokenId token) const { return c_.at(token); }

  /// Occurrences of token in bwt[0, i).
  std::uint64_t occ(TokenId token, std::uint64_t i) const;

  MatchInterval root() const noexcept { return {0, size(), 0}; }
  /// Interval of P·token given the interval of P. Reserved tokens raise
  /// ContractError since identifiers never cross document boundaries.
  MatchInterval extend_right(const MatchInterval& interval, TokenId token) const;
  /// Every content token that continues the interval's pattern, with the
  /// continuation count, ascending by token id. Costs exactly two rank
  /// queries per content token.
  std::vector<TokenCount> allowed_tokens(const MatchInterval& interval) const;
  /// Same enumeration as allowed_tokens, returning the child intervals.
  std::vector<std::pair<TokenId, MatchInterval>> allowed_extensions(const MatchInterval& interval) const;
  /// Text positions (in the reversed text) of up to `limit` rows of the interval.
  std::vector<std::uint64_t> locate_positions(const MatchInterval& interval, std::size_t limit) const;
  /// Distinct document ordinals, ascending.
  std::vector<std::size_t> locate_document_ordinals(const MatchInterval& interval,
                                                    std::size_t limit = SIZE_MAX) const;
  std::vector<std::string> locate_documents(const MatchInterval& interval,
                                            std::size_t limit = SIZE_MAX) const;

  /// Interval for a whole pattern; an empty pattern yields root().
  MatchInterval match(std::span<const TokenId> pattern) const;
  std::uint64_t count(std::span<const TokenId> pattern) const { return match(pattern).width(); }
  /// Counts a whitespace-separated phrase; words outside the vocabulary give 0.
  std::uint64_t count_phrase(std::string_view phrase) const;
  /// The document holding every occurrence of the pattern, if there is one.
  std::optional<std::string> unique_document(std::span<const TokenId> pattern) const;

  /// Document ordinal owning a position of the reversed text. The final
  /// terminator is attributed to the last document.
  std::size_t document_at(std::uint64_t text_position) const;

  std::vector<std::uint8_t> serialize() const;
  static FmIndex deserialize(std::span<const std::uint8_t> data);
  void save(const std::filesystem::path& path) const;
  static FmIndex load(const std::filesystem::path& path);

  std::uint64_t rank_queries() const noexcept { return rank_queries_.load(std::memory_order_relaxed); }
  void reset_rank_queries() const noexcept { rank_queries_.store(0, std::memory_order_relaxed); }

 private:
  std::uint64_t lf(std::uint64_t row) const;
  bool is_sampled(std::uint64_t row) const;
  std::uint64_t sampled_rank(std::uint64_t row) const;
  void build_rank_support();

  Vocabulary vocab_;
  IndexOptions options_;
  std::uint32_t sigma_ = 0;
  std::vector<TokenId> bwt_;
  std::vector<std::uint64_t> c_;
  std::vector<std::uint32_t> checkpoints_;
  std::vector<std::uint64_t> sampled_bits_;
  std::vector<std::uint32_t> sampled_word_rank_;
  std::vector<std::uint32_t> samples_;
  std::vector<std::uint64_t> doc_starts_;
  std::vector<std::uint64_t> doc_lengths_;
  std::vector<std::string> doc_ids_;
  mutable std::atomic<std::uint64_t> rank_queries_{0};
};

}  // namespace ause
