#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "newsrec/config.hpp"
#include "newsrec/model.hpp"
#include "newsrec/synthetic.hpp"

namespace newsrec {

inline constexpr const char* kCodeVersion = "newsrec 0.1.0";
inline constexpr const char* kOutputRootVariable = "NEWSREC_OUTPUT_ROOT";

/// Declarative description of one training run. Relative paths resolve
/// against the directory of the config file.
struct ExperimentConfig {
  std::string name = "run";
  std::filesystem::path train_dir;  // news.tsv + behaviors.tsv
  std::filesystem::path test_dir;
  std::optional<SyntheticSpec> synthetic;  // replaces train_dir/test_dir
  std::optional<std::int64_t> split_boundary;
  std::optional<std::filesystem::path> word_vectors;
  std::optional<std::filesystem::path> frozen_news;
  std::optional<std::filesystem::path> frozen_tokens;
  std::filesystem::path output_dir = "runs";
  std::uint64_t seed = 1;
  std::vector<std::size_t> eval_ks{5, 10};
  std::size_t max_history = kDefaultMaxHistory;
  ModelConfig model;
  TrainingConfig training;
  KeyValueConfig source;  // as parsed, with any seed override applied
};

ExperimentConfig parse_experiment(const KeyValueConfig& cfg, const std::filesystem::path& base_dir,
                                  std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig load_experiment(const std::filesystem::path& path,
                                 std::optional<std::uint64_t> seed_override = std::nullopt);

struct RunResult {
  std::filesystem::path run_dir;
  TrainingLog log;
  Evaluation test;
};

/// Trains, evaluates on the test directory and writes checkpoint.bin,
/// manifest.txt, epochs.csv and metrics.csv into a fresh run directory.
RunResult run_experiment(const ExperimentConfig& config);

/// `root/name`, or `root/name-1`, `root/name-2`, ... when taken.
std::filesystem::path fresh_run_dir(const std::filesystem::path& root, const std::string& name);

/// Root for run outputs: the environment override, else `fallback`.
std::filesystem::path output_root(const std::filesystem::path& fallback);

struct Dataset {
  NewsCatalog catalog;
  BehaviorLog log;
};

/// Reads `dir/news.tsv` and `dir/behaviors.tsv`. Articles of `extra` are
/// added to the catalog so histories may refer to them.
Dataset load_dataset(const std::filesystem::path& dir, std::size_t max_history,
                     const NewsCatalog* extra = nullptr);

void write_metrics_csv(const Evaluation& ev, std::ostream& out, bool per_impression = false);
void write_epochs_csv(const TrainingLog& log, std::size_t k, std::ostream& out);

}  // namespace newsrec
