#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ause {

/// Deterministic random stream. mt19937_64 output is fixed by the standard;
/// the conversions below avoid the implementation-defined distributions so
/// runs reproduce across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from a master seed and a stream name
  /// ("sampling", "shuffle", ...).
  static Rng substream(std::uint64_t seed, std::string_view name);

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ause
