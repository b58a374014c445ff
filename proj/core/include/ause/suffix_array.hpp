#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ause {

/// Suffix array of an integer string by induced sorting (SA-IS), O(n) time.
/// Symbols must lie in [0, alphabet_size). The text does not need a sentinel.
std::vector<std::uint32_t> build_suffix_array(std::span<const std::uint32_t> text,
                                              std::uint32_t alphabet_size);

}  // namespace ause
