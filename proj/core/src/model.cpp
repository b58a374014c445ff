#include "ause/model.hpp"

#include <algorithm>

#include "ause/binary_io.hpp"
#include "ause/errors.hpp"

namespace ause {
namespace {

constexpr char kMagic[4] = {'A', 'U', 'S', 'M'};

}  // namespace

std::vector<std::uint8_t> ModelCheckpoint::serialize() const {
  ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kFormatVersion);
  w.u64(vocab_fingerprint);
  w.u64(scorer.vocab_size());
  const auto params = scorer.parameters();
  w.u64(params.size());
  for (double p : params) w.f64(p);
  w.u32(static_cast<std::uint32_t>(generator.weights().size()));
  for (double g : generator.weights()) w.f64(g);
  w.append_checksum();
  return w.take();
}

ModelCheckpoint ModelCheckpoint::deserialize(std::span<const std::uint8_t> data) {
  if (data.size() < 8 || !std::equal(kMagic, kMagic + 4, data.begin())) {
    throw FormatError("not a model checkpoint: bad magic");
  }
  {
    ByteReader head(data.subspan(4));
    const auto version = head.u32();
    if (version != kFormatVersion) {
      throw FormatError("unsupported checkpoint format version " + std::to_string(version) +
                        " (supported: " + std::to_string(kFormatVersion) + ")");
    }
  }
  ByteReader r(verify_checksum(data, "checkpoint"));
  r.bytes(8);
  ModelCheckpoint m;
  m.vocab_fingerprint = r.u64();
  const auto vocab = r.u64();
  const auto n = r.u64();
  if (vocab == 0 || n != ReferenceScorer::parameter_count_for(vocab)) {
    throw FormatError("checkpoint: parameter count does not match vocabulary size");
  }
  if (n > r.remaining() / 8) throw FormatError("checkpoint: truncated parameters");
  std::vector<double> params(n);
  for (auto& p : params) p = r.f64();
  m.scorer = ReferenceScorer(vocab, std::move(params));
  const auto nw = r.u32();
  if (nw != ReferenceAnswerGenerator::kFeatureCount) throw FormatError("checkpoint: generator weight count mismatch");
  for (auto& g : m.generator.weights()) g = r.f64();
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes before checksum");
  return m;
}

void ModelCheckpoint::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

ModelCheckpoint ModelCheckpoint::load(const std::filesystem::path& path) {
  return deserialize(read_binary_file(path));
}

}  // namespace ause
