#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "newsrec/data.hpp"
#include "newsrec/metrics.hpp"
#include "newsrec/news_encoder.hpp"
#include "newsrec/optim.hpp"
#include "newsrec/user_encoder.hpp"

namespace newsrec {

struct ModelConfig {
  NewsEncoderConfig news;
  UserEncoderConfig user;
};

/// Inputs a model needs beyond its parameters.
struct ModelResources {
  Vocabularies vocab;
  std::vector<std::string> users;  // rows of the long-term table
  const WordVectorTable* word_vectors = nullptr;
  std::shared_ptr<const FrozenStore> frozen_news;
  std::shared_ptr<const FrozenStore> frozen_tokens;
};

/// News encoder, user encoder and dot-product scorer over one parameter
/// store.
class RecommenderModel {
 public:
  RecommenderModel(const ModelConfig& config, ModelResources resources, std::uint64_t seed);
  RecommenderModel(const RecommenderModel&) = delete;
  RecommenderModel& operator=(const RecommenderModel&) = delete;

  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  const ModelConfig& config() const { return config_; }
  const ModelResources& resources() const { return resources_; }
  const NewsEncoder& news_encoder() const { return *news_; }
  const UserEncoder& user_encoder() const { return *user_; }
  NewsEncoder& news_encoder() { return *news_; }
  UserEncoder& user_encoder() { return *user_; }
  std::size_t dim() const { return news_->output_dim(); }

  NewsFeatures features(const NewsRecord& record) const;

 private:
  ModelConfig config_;
  ModelResources resources_;
  ParameterStore store_;
  std::unique_ptr<NewsEncoder> news_;
  std::unique_ptr<UserEncoder> user_;
};

/// Dot product; throws ConfigError on a dimension mismatch.
double score(const Tensor& candidate, const Tensor& user);
Var score(Var candidate, Var user);

/// -log softmax(scores)[positive].
Var loss_listwise_ce(Var scores, std::size_t positive);

struct TrainingSample {
  std::size_t impression = 0;  // index into the log
  std::string positive;
  std::vector<std::string> negatives;
};

struct SampleSet {
  std::vector<TrainingSample> samples;
  std::size_t skipped_impressions = 0;  // no negatives at all
};

/// One sample per click. Negatives come from the same impression, without
/// replacement when at least K exist and with replacement otherwise.
SampleSet build_training_samples(const BehaviorLog& log, std::size_t negatives, std::uint64_t seed);

struct TrainingConfig {
  AdamOptions adam;
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  std::size_t negatives = 4;
  std::size_t validation_k = 10;
  std::uint64_t seed = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double validation_ndcg = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> best_epoch;
  double best_validation_ndcg = 0.0;
  std::size_t samples_per_epoch = 0;
  std::size_t skipped_impressions = 0;
};

/// Features for every article of a catalog, under the model's vocabulary.
class NewsIndex {
 public:
  NewsIndex(const RecommenderModel& model, const NewsCatalog& catalog);
  const NewsFeatures& at(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  std::unordered_map<std::string, NewsFeatures> features_;
};

/// Seeded shuffle, batches of samples, listwise loss, Adam. After every
/// epoch the validation nDCG@k is measured; the best epoch's parameters are
/// restored at the end. A NaN loss raises DivergenceError.
TrainingLog train(RecommenderModel& model, const NewsIndex& news, const BehaviorLog& train_log,
                  const BehaviorLog& validation_log, const TrainingConfig& config);

/// Forward-only embeddings for fixed parameters.
class Inference {
 public:
  Inference(const RecommenderModel& model, const NewsIndex& news);

  const Tensor& news(const std::string& id);
  /// Candidate-independent user vector; cand_aware needs `candidate`.
  Tensor user(const Impression& impression, const Tensor* candidate = nullptr);
  std::vector<double> scores(const Impression& impression);

 private:
  const RecommenderModel& model_;
  const NewsIndex& index_;
  std::unordered_map<std::string, Tensor> cache_;
};

/// Candidates by descending score, ties by ascending id, cut at k (the full
/// list when k exceeds the pool or k = 0).
RecommendationList rank_by_scores(const Impression& impression, const std::vector<double>& scores,
                                  std::size_t k = 0);
RecommendationList rank_candidates(Inference& inference, const Impression& impression,
                                   std::size_t k = 0);

struct ImpressionMetrics {
  std::string impression_id;
  std::vector<double> ndcg;  // per k
};

struct Evaluation {
  std::vector<std::size_t> ks;
  std::vector<double> mean_ndcg;  // per k
  std::size_t impressions = 0;    // included
  std::size_t excluded = 0;       // no positive label
  std::vector<ImpressionMetrics> rows;
};

/// Mean nDCG@k of any scorer over a log.
Evaluation evaluate_scores(const BehaviorLog& log, const std::vector<std::size_t>& ks,
                           const std::function<std::vector<double>(const Impression&)>& scorer);
Evaluation evaluate(Inference& inference, const BehaviorLog& log, const std::vector<std::size_t>& ks);

struct BaselineDistribution {
  double mean = 0.0;
  double stddev = 0.0;  // spread of the per-shuffle mean
  std::size_t shuffles = 0;
};

/// Mean nDCG@k of uniformly shuffled rankings, repeated `shuffles` times.
BaselineDistribution random_baseline(const BehaviorLog& log, std::size_t k, std::size_t shuffles,
                                     std::uint64_t seed);

}  // namespace newsrec
