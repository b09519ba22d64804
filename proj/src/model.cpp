#include "newsrec/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "newsrec/error.hpp"
#include "newsrec/rng.hpp"

namespace newsrec {

RecommenderModel::RecommenderModel(const ModelConfig& config, ModelResources resources,
                                   std::uint64_t seed)
    : config_(config), resources_(std::move(resources)) {
  Rng rng = Rng::derive(seed, 0);
  FrozenSources frozen{resources_.frozen_news.get(), resources_.frozen_tokens.get()};
  news_ = std::make_unique<NewsEncoder>(store_, config_.news, resources_.vocab, frozen, rng,
                                        resources_.word_vectors);
  user_ = std::make_unique<UserEncoder>(store_, config_.user, news_->output_dim(), resources_.users,
                                        rng);
  resources_.word_vectors = nullptr;  // only needed for initialization
  store_.round_to_storage();
}

NewsFeatures RecommenderModel::features(const NewsRecord& record) const {
  return featurize(record, resources_.vocab, config_.news.max_title_length);
}

double score(const Tensor& candidate, const Tensor& user) {
  if (candidate.size() != user.size()) {
    throw ConfigError("score: candidate " + to_string(candidate.shape()) + " vs user " +
                      to_string(user.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < user.size(); ++i) s += candidate[i] * user[i];
  return s;
}

Var score(Var candidate, Var user) {
  if (candidate.value().size() != user.value().size()) {
    throw ConfigError("score: candidate " + to_string(candidate.shape()) + " vs user " +
                      to_string(user.shape()));
  }
  return dot(candidate, user);
}

Var loss_listwise_ce(Var scores, std::size_t positive) { return cross_entropy(scores, positive); }

SampleSet build_training_samples(const BehaviorLog& log, std::size_t negatives, std::uint64_t seed) {
  if (negatives == 0) throw ConfigError("training: negatives must be at least 1");
  SampleSet out;
  Rng rng = Rng::derive(seed, 1);
  for (std::size_t i = 0; i < log.impressions.size(); ++i) {
    const auto& imp = log.impressions[i];
    std::vector<std::string> pos, neg;
    for (std::size_t c = 0; c < imp.candidates.size(); ++c) {
      (imp.labels[c] ? pos : neg).push_back(imp.candidates[c]);
    }
    if (pos.empty()) continue;
    if (neg.empty()) {
      ++out.skipped_impressions;
      continue;
    }
    for (const auto& p : pos) {
      TrainingSample s{i, p, {}};
      if (neg.size() >= negatives) {
        std::vector<std::string> pool = neg;
        for (std::size_t j = 0; j < negatives; ++j) {
          const std::size_t pick = j + rng.index(pool.size() - j);
          std::swap(pool[j], pool[pick]);
          s.negatives.push_back(pool[j]);
        }
      } else {
        for (std::size_t j = 0; j < negatives; ++j) s.negatives.push_back(neg[rng.index(neg.size())]);
      }
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

NewsIndex::NewsIndex(const RecommenderModel& model, const NewsCatalog& catalog) {
  for (const auto& r : catalog.records) features_.emplace(r.id, model.features(r));
}

const NewsFeatures& NewsIndex::at(const std::string& id) const {
  auto it = features_.find(id);
  if (it == features_.end()) throw DataError("unknown news id '" + id + "'");
  return it->second;
}

std::vector<std::string> NewsIndex::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, f] : features_) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::string describe_batch(std::size_t epoch, std::size_t batch) {
  return "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch);
}

Var batch_loss(const RecommenderModel& model, const NewsIndex& news, const BehaviorLog& log,
               std::span<const TrainingSample> batch, Tape& tape) {
  std::unordered_map<std::string, Var> encoded;
  auto embed = [&](const std::string& id) {
    auto it = encoded.find(id);
    if (it != encoded.end()) return it->second;
    Var v = model.news_encoder().encode(tape, news.at(id));
    encoded.emplace(id, v);
    return v;
  };
  const auto& users = model.user_encoder();
  std::optional<Var> total;
  for (const auto& sample : batch) {
    const auto& imp = log.impressions[sample.impression];
    std::vector<Var> rows;
    for (const auto& h : imp.history) rows.push_back(embed(h));
    Var history = rows.empty() ? tape.constant(Tensor({0, model.dim()})) : stack_rows(rows);
    const Mask mask(rows.size(), true);

    std::vector<Var> candidates{embed(sample.positive)};
    for (const auto& n : sample.negatives) candidates.push_back(embed(n));
    std::vector<Var> scores;
    if (users.candidate_aware()) {
      for (const Var& c : candidates) scores.push_back(score(c, users.encode(tape, history, mask, imp.user_id, c)));
    } else {
      Var u = users.encode(tape, history, mask, imp.user_id);
      for (const Var& c : candidates) scores.push_back(score(c, u));
    }
    Var loss = loss_listwise_ce(concat(scores), 0);
    total = total ? add(*total, loss) : loss;
  }
  return scale(*total, 1.0 / static_cast<double>(batch.size()));
}

}  // namespace

TrainingLog train(RecommenderModel& model, const NewsIndex& news, const BehaviorLog& train_log,
                  const BehaviorLog& validation_log, const TrainingConfig& config) {
  if (config.batch_size == 0) throw ConfigError("training: batch_size must be positive");
  TrainingLog log;
  if (config.epochs == 0) return log;
  if (train_log.impressions.empty()) throw ConfigError("training: empty training split");
  if (validation_log.impressions.empty()) throw ConfigError("training: empty validation split");

  SampleSet set = build_training_samples(train_log, config.negatives, config.seed);
  log.samples_per_epoch = set.samples.size();
  log.skipped_impressions = set.skipped_impressions;
  if (set.samples.empty()) throw ConfigError("training: no training samples (no clicked candidates)");

  Rng shuffle_rng = Rng::derive(config.seed, 2);
  auto trainable = model.params().trainable();
  std::vector<Tensor> best;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(set.samples.begin(), set.samples.end(), shuffle_rng.engine());
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < set.samples.size(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, set.samples.size());
      Tape tape;
      Var loss = batch_loss(model, news, train_log,
                            std::span<const TrainingSample>(set.samples).subspan(start, end - start), tape);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw DivergenceError("training diverged at " + describe_batch(epoch, batches + 1) +
                              ": loss is " + std::to_string(value));
      }
      model.params().zero_grad();
      tape.backward(loss);
      adam_step(trainable, config.adam);
      model.params().round_to_storage();
      loss_sum += value;
      ++batches;
    }
    Inference inference(model, news);
    const double ndcg = evaluate(inference, validation_log, {config.validation_k}).mean_ndcg[0];
    log.epochs.push_back({epoch, loss_sum / static_cast<double>(batches), ndcg});
    if (!log.best_epoch || ndcg > log.best_validation_ndcg) {
      log.best_epoch = epoch;
      log.best_validation_ndcg = ndcg;
      best = model.params().snapshot();
    }
  }
  model.params().restore(best);
  return log;
}

Inference::Inference(const RecommenderModel& model, const NewsIndex& news) : model_(model), index_(news) {}

const Tensor& Inference::news(const std::string& id) {
  auto it = cache_.find(id);
  if (it != cache_.end()) return it->second;
  Tape tape;
  Tensor value = model_.news_encoder().encode(tape, index_.at(id)).value();
  return cache_.emplace(id, std::move(value)).first->second;
}

Tensor Inference::user(const Impression& impression, const Tensor* candidate) {
  const std::size_t d = model_.dim();
  Tensor history({impression.history.size(), d});
  for (std::size_t i = 0; i < impression.history.size(); ++i) {
    const Tensor& v = news(impression.history[i]);
    std::copy(v.values().begin(), v.values().end(), history.row(i).begin());
  }
  Tape tape;
  Var h = tape.constant(std::move(history));
  const Mask mask(impression.history.size(), true);
  std::optional<Var> c;
  if (candidate) c = tape.constant(*candidate);
  if (model_.user_encoder().candidate_aware() && !c) {
    throw ConfigError("cand_aware user encoder has no candidate-independent user embedding");
  }
  return model_.user_encoder().encode(tape, h, mask, impression.user_id, c).value();
}

std::vector<double> Inference::scores(const Impression& impression) {
  std::vector<double> out;
  if (model_.user_encoder().candidate_aware()) {
    for (const auto& id : impression.candidates) {
      const Tensor c = news(id);
      out.push_back(score(c, user(impression, &c)));
    }
    return out;
  }
  const Tensor u = user(impression);
  for (const auto& id : impression.candidates) out.push_back(score(news(id), u));
  return out;
}

RecommendationList rank_by_scores(const Impression& impression, const std::vector<double>& scores,
                                  std::size_t k) {
  if (scores.size() != impression.candidates.size()) {
    throw DimensionError("rank: " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(impression.candidates.size()) + " candidates");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return impression.candidates[a] < impression.candidates[b];
  });
  if (k > 0 && k < order.size()) order.resize(k);
  RecommendationList list{impression.impression_id, {}, {}};
  for (auto i : order) {
    list.ids.push_back(impression.candidates[i]);
    list.scores.push_back(scores[i]);
  }
  return list;
}

RecommendationList rank_candidates(Inference& inference, const Impression& impression, std::size_t k) {
  return rank_by_scores(impression, inference.scores(impression), k);
}

Evaluation evaluate_scores(const BehaviorLog& log, const std::vector<std::size_t>& ks,
                           const std::function<std::vector<double>(const Impression&)>& scorer) {
  if (ks.empty()) throw ConfigError("evaluate: no cutoffs");
  Evaluation ev;
  ev.ks = ks;
  ev.mean_ndcg.assign(ks.size(), 0.0);
  for (const auto& imp : log.impressions) {
    const auto list = rank_by_scores(imp, scorer(imp));
    std::unordered_map<std::string, int> label;
    for (std::size_t c = 0; c < imp.candidates.size(); ++c) label[imp.candidates[c]] = imp.labels[c];
    std::vector<int> ranked;
    for (const auto& id : list.ids) ranked.push_back(label[id]);
    ImpressionMetrics row{imp.impression_id, {}};
    for (std::size_t k : ks) {
      auto v = ndcg_at_k(ranked, k);
      if (!v) break;
      row.ndcg.push_back(*v);
    }
    if (row.ndcg.empty()) {
      ++ev.excluded;
      continue;
    }
    for (std::size_t i = 0; i < ks.size(); ++i) ev.mean_ndcg[i] += row.ndcg[i];
    ++ev.impressions;
    ev.rows.push_back(std::move(row));
  }
  if (ev.impressions > 0) {
    for (double& m : ev.mean_ndcg) m /= static_cast<double>(ev.impressions);
  }
  return ev;
}

Evaluation evaluate(Inference& inference, const BehaviorLog& log, const std::vector<std::size_t>& ks) {
  return evaluate_scores(log, ks, [&](const Impression& imp) { return inference.scores(imp); });
}

BaselineDistribution random_baseline(const BehaviorLog& log, std::size_t k, std::size_t shuffles,
                                     std::uint64_t seed) {
  if (shuffles == 0) throw ConfigError("random baseline: need at least one shuffle");
  Rng rng = Rng::derive(seed, 3);
  std::vector<double> means;
  for (std::size_t s = 0; s < shuffles; ++s) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& imp : log.impressions) {
      std::vector<int> ranked = imp.labels;
      std::shuffle(ranked.begin(), ranked.end(), rng.engine());
      if (auto v = ndcg_at_k(ranked, k)) {
        total += *v;
        ++count;
      }
    }
    if (count == 0) throw DegenerateInputError("random baseline: no impression has a positive label");
    means.push_back(total / static_cast<double>(count));
  }
  BaselineDistribution out;
  out.shuffles = shuffles;
  out.mean = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(shuffles);
  double var = 0.0;
  for (double m : means) var += (m - out.mean) * (m - out.mean);
  out.stddev = shuffles > 1 ? std::sqrt(var / static_cast<double>(shuffles - 1)) : 0.0;
  return out;
}

}  // namespace newsrec
