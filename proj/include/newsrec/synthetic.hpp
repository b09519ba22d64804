#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "newsrec/config.hpp"
#include "newsrec/data.hpp"
#include "newsrec/frozen_store.hpp"

namespace newsrec {

/// Planted-preference dataset description. Each user favours one topic;
/// `concentration` c gives the favourite probability (c + 1) / (c + topics)
/// and the rest uniform, so c = inf yields single-topic users.
struct SyntheticSpec {
  std::size_t topics = 8;
  std::size_t news_per_topic = 250;
  std::size_t users = 500;
  std::size_t history_min = 5;
  std::size_t history_max = 20;
  double concentration = 20.0;
  std::size_t candidate_pool = 20;
  std::size_t max_positives = 2;
  double click_noise = 0.1;
  std::size_t tokens_per_topic = 30;
  std::size_t generic_tokens = 100;
  std::size_t title_min = 6;
  std::size_t title_max = 10;
  /// Probability that a title token comes from the article's topic
  /// vocabulary rather than the shared generic one.
  double title_topic_ratio = 0.5;
  std::size_t subcategories_per_topic = 2;
  std::size_t word_dim = 32;
  std::size_t train_impressions_per_user = 3;
  std::size_t test_impressions_per_user = 1;
  std::uint64_t seed = 1;

  void validate() const;
  static SyntheticSpec from_config(const KeyValueConfig& cfg);
};

struct SyntheticTruth {
  std::unordered_map<std::string, std::size_t> news_topic;
  std::unordered_map<std::string, std::size_t> user_topic;
};

struct SyntheticDataset {
  NewsCatalog catalog;
  BehaviorLog train_log;  // five days; the last one is the validation day
  BehaviorLog test_log;   // the following day
  std::vector<std::pair<std::string, std::vector<float>>> word_vectors;
  FrozenStore frozen_news;
  FrozenStore frozen_tokens;
  SyntheticTruth truth;
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Layout: train/{news,behaviors}.tsv, test/{news,behaviors}.tsv,
/// word_vectors.txt, frozen_news.bin, frozen_tokens.bin, topics.tsv.
void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir);

SyntheticTruth read_truth(const std::filesystem::path& path);

/// Ranker that knows the planted topics: 1 for candidates from the user's
/// favourite topic, 0 otherwise.
std::vector<double> oracle_scores(const SyntheticTruth& truth, const Impression& impression);

}  // namespace newsrec
