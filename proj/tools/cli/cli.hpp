#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ause::cli {

/// Resolved settings for one command. Config files use the snake_case
/// names below; flags use the kebab-case spelling (--beam-width).
struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path queries;
  std::filesystem::path index;
  std::filesystem::path model;
  std::filesystem::path calibrated_model;
  std::filesystem::path output_dir;
  /// Free-text query for `retrieve`; takes precedence over `queries`.
  std::string query;

  std::size_t identifier_len = 10;
  std::size_t beam_width = 10;
  std::size_t top_k = 5;
  std::vector<std::size_t> recall_ks{5, 10};
  std::size_t sample_rate = 32;

  double w_vqa = 1.0 / 3.0;
  double w_hit = 1.0 / 3.0;
  double w_sim = 1.0 / 3.0;
  double beta = 0.1;
  std::size_t k = 8;
  double temperature = 1.0;

  std::optional<std::uint64_t> seed;
  double lr = 0.5;
  std::size_t epochs = 20;
  double dpo_lr = 0.5;
  std::size_t dpo_epochs = 20;
  double generator_lr = 0.5;
  std::size_t generator_epochs = 50;

  /// Sets one field from its textual form; accepts snake or kebab case.
  void set(std::string_view key, std::string_view value);
  /// Range checks shared by every command.
  void validate() const;
  /// Every field as key=value, in declaration order; loadable as a config file.
  std::string to_text() const;

  static std::vector<std::string> keys();
};

/// Parses a flat key=value file. '#' starts a comment line; blank lines are
/// ignored. Unknown keys and malformed lines are errors naming the line.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

void cmd_build_index(const RunConfig& config);
void cmd_train_sft(const RunConfig& config);
void cmd_calibrate(const RunConfig& config);
void cmd_retrieve(const RunConfig& config);
void cmd_eval(const RunConfig& config);

/// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace ause::cli
