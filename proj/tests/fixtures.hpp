#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "newsrec/data.hpp"
#include "newsrec/model.hpp"
#include "newsrec/synthetic.hpp"
#include "newsrec/nn.hpp"
#include "oracles.hpp"

namespace fixture {

using namespace newsrec;

// Random linear functional of a tensor output, so a gradient check sees
// every output entry.
inline Var probe(Tape& tape, Var out, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w(out.shape());
  for (double& v : w.values()) v = rng.uniform(-1.0, 1.0);
  return dot(out, tape.constant(std::move(w)));
}

inline void set_param(Parameter& p, const oracle::Mat& m) { p.value = oracle::to_tensor(m); }
inline void set_param(Parameter& p, const oracle::Vec& v) { p.value = oracle::to_tensor(v); }

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = a.size() == b.size() ? 0.0 : 1e300;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline double max_abs_diff(const Tensor& a, const oracle::Vec& b) {
  return max_abs_diff(a, oracle::to_tensor(b));
}

/// Articles "N1".."Nn" with random 1-6 token titles over words w0..w{words-1}
/// and categories c0..c{cats-1}, each with two subcategories.
inline NewsCatalog random_catalog(Rng& rng, std::size_t n, std::size_t words = 12, std::size_t cats = 3) {
  NewsCatalog catalog;
  for (std::size_t i = 0; i < n; ++i) {
    NewsRecord r;
    r.id = "N" + std::to_string(i + 1);
    const std::size_t c = rng.index(cats);
    r.category = "c" + std::to_string(c);
    r.subcategory = r.category + "s" + std::to_string(rng.index(2));
    const std::size_t len = rng.between(1, 6);
    for (std::size_t t = 0; t < len; ++t) {
      r.tokens.push_back("w" + std::to_string(rng.index(words)));
      r.title += (t ? " " : "") + r.tokens.back();
    }
    catalog.add(std::move(r));
  }
  return catalog;
}

/// Features with `extra` masked padding slots appended.
inline NewsFeatures with_padding(NewsFeatures f, std::size_t extra) {
  std::vector<std::int32_t> tokens;
  Mask mask;
  for (std::size_t i = 0; i < f.title_tokens.size(); ++i) {
    if (f.title_mask[i]) {
      tokens.push_back(f.title_tokens[i]);
      mask.push_back(true);
    }
  }
  for (std::size_t i = 0; i < extra; ++i) {
    tokens.push_back(kPaddingIndex);
    mask.push_back(false);
  }
  f.title_tokens = tokens;
  f.title_mask = mask;
  return f;
}

/// A few hundred articles and a few dozen users, small enough to train in
/// well under a second.
inline SyntheticSpec small_spec(std::uint64_t seed = 1) {
  SyntheticSpec spec;
  spec.topics = 4;
  spec.news_per_topic = 40;
  spec.users = 60;
  spec.tokens_per_topic = 12;
  spec.generic_tokens = 30;
  spec.candidate_pool = 10;
  spec.word_dim = 8;
  spec.seed = seed;
  return spec;
}

inline ModelConfig small_model(TextFamily text = TextFamily::kCnnAddAtt, UserFamily user = UserFamily::kLf) {
  ModelConfig cfg;
  cfg.news.text.family = text;
  cfg.news.text.word_dim = 8;
  cfg.news.text.output_dim = 16;
  cfg.news.text.heads = 4;
  cfg.news.text.query_dim = 8;
  cfg.news.category_embedding_dim = 6;
  cfg.news.category_dim = 8;
  cfg.user = UserEncoderConfig{};
  cfg.user.family = user;
  cfg.user.heads = 4;
  cfg.user.query_dim = 8;
  return cfg;
}

/// Synthetic data plus a freshly initialized model over its vocabulary.
struct World {
  SyntheticDataset data;
  WordVectorTable vectors;
  std::unique_ptr<RecommenderModel> model;
  std::unique_ptr<NewsIndex> index;

  World(const SyntheticSpec& spec, const ModelConfig& config, std::uint64_t seed) : data(generate_synthetic(spec)) {
    ModelResources res;
    res.vocab = data.catalog.vocab;
    std::set<std::string> users;
    for (const auto& imp : data.train_log.impressions) users.insert(imp.user_id);
    res.users.assign(users.begin(), users.end());
    vectors = random_word_embeddings(res.vocab.words, config.news.text.word_dim, seed);
    res.word_vectors = &vectors;
    model = std::make_unique<RecommenderModel>(config, std::move(res), seed);
    index = std::make_unique<NewsIndex>(*model, data.catalog);
  }
};

}  // namespace fixture
