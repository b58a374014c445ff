#include "ause/fm_index.hpp"

#include <algorithm>
#include <bit>
#include <limits>

#include "ause/binary_io.hpp"
#include "ause/errors.hpp"
#include "ause/suffix_array.hpp"

namespace ause {
namespace {

constexpr char kMagic[4] = {'A', 'U', 'S', 'E'};

}  // namespace

FmIndex::FmIndex(const FmIndex& other)
    : vocab_(other.vocab_),
      options_(other.options_),
      sigma_(other.sigma_),
      bwt_(other.bwt_),
      c_(other.c_),
      checkpoints_(other.checkpoints_),
      sampled_bits_(other.sampled_bits_),
      sampled_word_rank_(other.sampled_word_rank_),
      samples_(other.samples_),
      doc_starts_(other.doc_starts_),
      doc_lengths_(other.doc_lengths_),
      doc_ids_(other.doc_ids_) {}

FmIndex::FmIndex(FmIndex&& other) noexcept
    : vocab_(std::move(other.vocab_)),
      options_(other.options_),
      sigma_(other.sigma_),
      bwt_(std::move(other.bwt_)),
      c_(std::move(other.c_)),
      checkpoints_(std::move(other.checkpoints_)),
      sampled_bits_(std::move(other.sampled_bits_)),
      sampled_word_rank_(std::move(other.sampled_word_rank_)),
      samples_(std::move(other.samples_)),
      doc_starts_(std::move(other.doc_starts_)),
      doc_lengths_(std::move(other.doc_lengths_)),
      doc_ids_(std::move(other.doc_ids_)) {}

FmIndex& FmIndex::operator=(const FmIndex& other) {
  if (this != &other) {
    FmIndex tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

FmIndex& FmIndex::operator=(FmIndex&& other) noexcept {
  vocab_ = std::move(other.vocab_);
  options_ = other.options_;
  sigma_ = other.sigma_;
  bwt_ = std::move(other.bwt_);
  c_ = std::move(other.c_);
  checkpoints_ = std::move(other.checkpoints_);
  sampled_bits_ = std::move(other.sampled_bits_);
  sampled_word_rank_ = std::move(other.sampled_word_rank_);
  samples_ = std::move(other.samples_);
  doc_starts_ = std::move(other.doc_starts_);
  doc_lengths_ = std::move(other.doc_lengths_);
  doc_ids_ = std::move(other.doc_ids_);
  rank_queries_.store(0, std::memory_order_relaxed);
  return *this;
}

FmIndex FmIndex::build(const KnowledgeBase& kb, IndexOptions options) {
  return build(kb.tokenized(), kb.vocabulary(), options);
}

FmIndex FmIndex::build(std::span<const TokenizedDocument> docs, Vocabulary vocab, IndexOptions options) {
  if (docs.empty()) throw ValidationError("cannot index an empty corpus");
  if (options.sample_rate == 0) throw ValidationError("sample_rate must be positive");
  if (options.checkpoint_interval == 0) throw ValidationError("checkpoint_interval must be positive");

  FmIndex idx;
  idx.vocab_ = std::move(vocab);
  idx.options_ = options;
  idx.sigma_ = static_cast<std::uint32_t>(idx.vocab_.size());

  std::uint64_t total = 1;
  for (const auto& d : docs) total += d.tokens.size() + 1;
  if (total >= std::numeric_limits<std::uint32_t>::max()) {
    throw ValidationError("corpus too large: " + std::to_string(total) + " tokens");
  }

  std::vector<std::uint32_t> text;
  text.reserve(total);
  for (const auto& d : docs) {
    idx.doc_starts_.push_back(text.size());
    idx.doc_lengths_.push_back(d.tokens.size() + 1);
    idx.doc_ids_.push_back(d.doc_id);
    for (auto it = d.tokens.rbegin(); it != d.tokens.rend(); ++it) {
      if (Vocabulary::is_reserved(*it) || *it >= idx.sigma_) {
        throw ValidationError("document \"" + d.doc_id + "\" holds invalid token id " + std::to_string(*it));
      }
      text.push_back(*it);
    }
    text.push_back(kDocSep);
  }
  text.push_back(kTextEnd);

  const auto sa = build_suffix_array(text, idx.sigma_);
  const std::uint64_t n = text.size();

  idx.bwt_.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    idx.bwt_[i] = text[(sa[i] + n - 1) % n];
  }

  idx.c_.assign(idx.sigma_ + 1, 0);
  for (auto t : text) ++idx.c_[t + 1];
  for (std::uint32_t t = 0; t < idx.sigma_; ++t) idx.c_[t + 1] += idx.c_[t];

  const std::size_t words = (n + 63) / 64;
  idx.sampled_bits_.assign(words, 0);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (sa[i] % options.sample_rate == 0) {
      idx.sampled_bits_[i / 64] |= std::uint64_t{1} << (i % 64);
      idx.samples_.push_back(sa[i]);
    }
  }

  idx.build_rank_support();
  return idx;
}

void FmIndex::build_rank_support() {
  const std::uint64_t n = bwt_.size();
  const std::uint64_t interval = options_.checkpoint_interval;
  const std::uint64_t blocks = n / interval + 1;
  checkpoints_.assign(blocks * sigma_, 0);
  std::vector<std::uint32_t> running(sigma_, 0);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (i % interval == 0) {
      std::copy(running.begin(), running.end(), checkpoints_.begin() + (i / interval) * sigma_);
    }
    ++running[bwt_[i]];
  }
  if (n % interval == 0) {
    std::copy(running.begin(), running.end(), checkpoints_.begin() + (n / interval) * sigma_);
  }

  sampled_word_rank_.assign(sampled_bits_.size() + 1, 0);
  for (std::size_t w = 0; w < sampled_bits_.size(); ++w) {
    sampled_word_rank_[w + 1] = sampled_word_rank_[w] + static_cast<std::uint32_t>(std::popcount(sampled_bits_[w]));
  }
}

std::uint64_t FmIndex::occ(TokenId token, std::uint64_t i) const {
  rank_queries_.fetch_add(1, std::memory_order_relaxed);
  const std::uint64_t interval = options_.checkpoint_interval;
  const std::uint64_t block = i / interval;
  std::uint64_t r = checkpoints_[block * sigma_ + token];
  for (std::uint64_t j = block * interval; j < i; ++j) {
    r += (bwt_[j] == token);
  }
  return r;
}

MatchInterval FmIndex::extend_right(const MatchInterval& interval, TokenId token) const {
  if (Vocabulary::is_reserved(token)) {
    throw ContractError("cannot extend an identifier with a reserved token");
  }
  if (token >= sigma_) throw ContractError("token id " + std::to_string(token) + " outside the vocabulary");
  const std::uint64_t base = c_[token];
  return {base + occ(token, interval.lo), base + occ(token, interval.hi), interval.depth + 1};
}

std::vector<std::pair<TokenId, MatchInterval>> FmIndex::allowed_extensions(const MatchInterval& interval) const {
  if (interval.empty()) throw ContractError("allowed_tokens on an empty interval");
  std::vector<std::pair<TokenId, MatchInterval>> out;
  for (TokenId t = kFirstContentToken; t < sigma_; ++t) {
    auto next = extend_right(interval, t);
    if (!next.empty()) out.emplace_back(t, next);
  }
  return out;
}

std::vector<TokenCount> FmIndex::allowed_tokens(const MatchInterval& interval) const {
  std::vector<TokenCount> out;
  for (const auto& [t, next] : allowed_extensions(interval)) out.push_back({t, next.width()});
  return out;
}

std::uint64_t FmIndex::lf(std::uint64_t row) const {
  const TokenId t = bwt_[row];
  return c_[t] + occ(t, row);
}

bool FmIndex::is_sampled(std::uint64_t row) const {
  return (sampled_bits_[row / 64] >> (row % 64)) & 1U;
}

std::uint64_t FmIndex::sampled_rank(std::uint64_t row) const {
  const std::uint64_t word = row / 64;
  const std::uint64_t bit = row % 64;
  const std::uint64_t mask = bit == 0 ? 0 : (~std::uint64_t{0} >> (64 - bit));
  return sampled_word_rank_[word] + static_cast<std::uint64_t>(std::popcount(sampled_bits_[word] & mask));
}

std::vector<std::uint64_t> FmIndex::locate_positions(const MatchInterval& interval, std::size_t limit) const {
  if (interval.empty()) throw ContractError("locate on an empty interval");
  if (interval.hi > size()) throw ContractError("interval outside the index");
  const std::uint64_t end = interval.lo + std::min<std::uint64_t>(interval.width(), limit);
  std::vector<std::uint64_t> out;
  out.reserve(end - interval.lo);
  for (std::uint64_t row = interval.lo; row < end; ++row) {
    std::uint64_t r = row;
    std::uint64_t steps = 0;
    while (!is_sampled(r)) {
      r = lf(r);
      ++steps;
    }
    out.push_back(samples_[sampled_rank(r)] + steps);
  }
  return out;
}

std::size_t FmIndex::document_at(std::uint64_t text_position) const {
  auto it = std::upper_bound(doc_starts_.begin(), doc_starts_.end(), text_position);
  return static_cast<std::size_t>(std::distance(doc_starts_.begin(), it)) - 1;
}

std::vector<std::size_t> FmIndex::locate_document_ordinals(const MatchInterval& interval,
                                                           std::size_t limit) const {
  std::vector<std::size_t> docs;
  for (auto pos : locate_positions(interval, limit)) docs.push_back(document_at(pos));
  std::sort(docs.begin(), docs.end());
  docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
  return docs;
}

std::vector<std::string> FmIndex::locate_documents(const MatchInterval& interval, std::size_t limit) const {
  std::vector<std::string> ids;
  for (auto o : locate_document_ordinals(interval, limit)) ids.push_back(doc_ids_[o]);
  return ids;
}

MatchInterval FmIndex::match(std::span<const TokenId> pattern) const {
  MatchInterval iv = root();
  for (TokenId t : pattern) {
    iv = extend_right(iv, t);
    if (iv.empty()) break;
  }
  return iv;
}

std::uint64_t FmIndex::count_phrase(std::string_view phrase) const {
  auto ids = vocab_.find_all(split_words(phrase));
  if (!ids) return 0;
  return count(*ids);
}

std::optional<std::string> FmIndex::unique_document(std::span<const TokenId> pattern) const {
  if (pattern.empty()) return std::nullopt;
  auto iv = match(pattern);
  if (iv.empty()) return std::nullopt;
  auto docs = locate_document_ordinals(iv);
  if (docs.size() != 1) return std::nullopt;
  return doc_ids_[docs.front()];
}

// ---------------------------------------------------------------------------
// Serialization

std::vector<std::uint8_t> FmIndex::serialize() const {
  ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kFormatVersion);
  w.u32(options_.sample_rate);
  w.u32(options_.checkpoint_interval);

  w.u32(static_cast<std::uint32_t>(vocab_.content_size()));
  for (const auto& word : vocab_.content_words()) w.str(word);

  w.u32(sigma_);
  for (auto c : c_) w.u64(c);

  w.u64(bwt_.size());
  for (auto t : bwt_) w.u32(t);

  w.u64(checkpoints_.size() / std::max<std::uint32_t>(sigma_, 1));
  for (auto c : checkpoints_) w.u32(c);

  w.u64(sampled_bits_.size());
  for (auto b : sampled_bits_) w.u64(b);
  w.u64(samples_.size());
  for (auto s : samples_) w.u32(s);

  w.u32(static_cast<std::uint32_t>(doc_ids_.size()));
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
    w.u64(doc_starts_[i]);
    w.u64(doc_lengths_[i]);
    w.str(doc_ids_[i]);
  }
  w.append_checksum();
  return w.take();
}

FmIndex FmIndex::deserialize(std::span<const std::uint8_t> data) {
  if (data.size() < 8 || !std::equal(kMagic, kMagic + 4, data.begin())) {
    throw FormatError("not an index file: bad magic");
  }
  {
    ByteReader head(data.subspan(4));
    const auto version = head.u32();
    if (version != kFormatVersion) {
      throw FormatError("unsupported index format version " + std::to_string(version) +
                        " (supported: " + std::to_string(kFormatVersion) + ")");
    }
  }
  ByteReader r(verify_checksum(data, "index"));
  r.bytes(4);
  r.u32();

  FmIndex idx;
  idx.options_.sample_rate = r.u32();
  idx.options_.checkpoint_interval = r.u32();
  if (idx.options_.sample_rate == 0 || idx.options_.checkpoint_interval == 0) {
    throw FormatError("index: invalid sampling parameters");
  }

  const auto n_words = r.u32();
  std::vector<std::string> words;
  words.reserve(n_words);
  for (std::uint32_t i = 0; i < n_words; ++i) words.push_back(r.str());
  idx.vocab_ = Vocabulary::from_words(words);
  if (idx.vocab_.content_words() != words) throw FormatError("index: vocabulary not sorted or not unique");

  idx.sigma_ = r.u32();
  if (idx.sigma_ != idx.vocab_.size()) throw FormatError("index: alphabet size does not match vocabulary");
  idx.c_.resize(idx.sigma_ + 1);
  for (auto& c : idx.c_) c = r.u64();

  const auto n = r.u64();
  if (n > r.remaining() / 4) throw FormatError("index: truncated BWT");
  idx.bwt_.resize(n);
  for (auto& t : idx.bwt_) {
    t = r.u32();
    if (t >= idx.sigma_) throw FormatError("index: BWT symbol outside alphabet");
  }
  if (idx.c_.back() != n) throw FormatError("index: C table inconsistent with BWT length");

  const auto blocks = r.u64();
  if (blocks != n / idx.options_.checkpoint_interval + 1) throw FormatError("index: checkpoint count mismatch");
  if (blocks * idx.sigma_ > r.remaining() / 4) throw FormatError("index: truncated checkpoints");
  idx.checkpoints_.resize(blocks * idx.sigma_);
  for (auto& c : idx.checkpoints_) c = r.u32();

  const auto bit_words = r.u64();
  if (bit_words != (n + 63) / 64) throw FormatError("index: sample bitmap size mismatch");
  idx.sampled_bits_.resize(bit_words);
  for (auto& b : idx.sampled_bits_) b = r.u64();
  const auto n_samples = r.u64();
  if (n_samples > r.remaining() / 4) throw FormatError("index: truncated samples");
  idx.samples_.resize(n_samples);
  for (auto& s : idx.samples_) s = r.u32();

  const auto n_docs = r.u32();
  for (std::uint32_t i = 0; i < n_docs; ++i) {
    idx.doc_starts_.push_back(r.u64());
    idx.doc_lengths_.push_back(r.u64());
    idx.doc_ids_.push_back(r.str());
  }
  if (r.remaining() != 0) throw FormatError("index: trailing bytes before checksum");

  idx.sampled_word_rank_.assign(idx.sampled_bits_.size() + 1, 0);
  for (std::size_t w = 0; w < idx.sampled_bits_.size(); ++w) {
    idx.sampled_word_rank_[w + 1] =
        idx.sampled_word_rank_[w] + static_cast<std::uint32_t>(std::popcount(idx.sampled_bits_[w]));
  }
  if (idx.sampled_word_rank_.back() != n_samples) throw FormatError("index: sample count mismatch");
  return idx;
}

void FmIndex::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

FmIndex FmIndex::load(const std::filesystem::path& path) { return deserialize(read_binary_file(path)); }

}  // namespace ause
