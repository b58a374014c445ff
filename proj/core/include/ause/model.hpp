#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ause/rag.hpp"
#include "ause/scorer.hpp"

namespace ause {

/// Retriever parameters plus answer-generator weights, tied to one vocabulary.
///
/// Layout (version 1, little-endian):
///   "AUSM" | u32 version | u64 vocab fingerprint | u64 vocab size
///   | u64 n_params, n_params x f64 | u32 n_weights, n_weights x f64 | u64 FNV-1a
struct ModelCheckpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint64_t vocab_fingerprint = 0;
  ReferenceScorer scorer{1};
  ReferenceAnswerGenerator generator;

  std::vector<std::uint8_t> serialize() const;
  static ModelCheckpoint deserialize(std::span<const std::uint8_t> data);
  void save(const std::filesystem::path& path) const;
  static ModelCheckpoint load(const std::filesystem::path& path);
};

}  // namespace ause
