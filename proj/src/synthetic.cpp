#include "newsrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "newsrec/error.hpp"
#include "newsrec/rng.hpp"

namespace newsrec {
namespace {

constexpr std::int64_t kDay = 86400;
// 11/09/2019 12:00:00 AM
constexpr std::int64_t kStart = 1573257600;

std::string topic_token(std::size_t topic, std::size_t j) {
  return "t" + std::to_string(topic) + "w" + std::to_string(j);
}

std::string generic_token(std::size_t j) { return "g" + std::to_string(j); }

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("synthetic spec: '") + name + "' must be positive");
  };
  positive(topics, "topics");
  positive(news_per_topic, "news_per_topic");
  positive(users, "users");
  positive(history_max, "history_max");
  positive(candidate_pool, "candidate_pool");
  positive(max_positives, "max_positives");
  positive(tokens_per_topic, "tokens_per_topic");
  positive(generic_tokens, "generic_tokens");
  positive(title_min, "title_min");
  positive(subcategories_per_topic, "subcategories_per_topic");
  positive(word_dim, "word_dim");
  positive(train_impressions_per_user, "train_impressions_per_user");
  positive(test_impressions_per_user, "test_impressions_per_user");
  if (topics < 2) throw ConfigError("synthetic spec: 'topics' must be at least 2");
  if (history_min > history_max) {
    throw ConfigError("synthetic spec: 'history_min' exceeds 'history_max'");
  }
  if (history_max > news_per_topic * topics) {
    throw ConfigError("synthetic spec: 'history_max' exceeds the number of articles");
  }
  if (title_min > title_max) throw ConfigError("synthetic spec: 'title_min' exceeds 'title_max'");
  if (max_positives >= candidate_pool) {
    throw ConfigError("synthetic spec: 'max_positives' must be below 'candidate_pool'");
  }
  if (max_positives > news_per_topic ||
      candidate_pool - 1 > news_per_topic * (topics - 1)) {
    throw ConfigError("synthetic spec: candidate pool cannot be filled from the articles");
  }
  if (!(click_noise >= 0.0 && click_noise < 1.0)) {
    throw ConfigError("synthetic spec: 'click_noise' must lie in [0, 1)");
  }
  if (!(concentration >= 0.0)) throw ConfigError("synthetic spec: 'concentration' must be >= 0");
  if (!(title_topic_ratio >= 0.0 && title_topic_ratio <= 1.0)) {
    throw ConfigError("synthetic spec: 'title_topic_ratio' must lie in [0, 1]");
  }
}

SyntheticSpec SyntheticSpec::from_config(const KeyValueConfig& cfg) {
  SyntheticSpec s;
  s.topics = cfg.get_size("topics", s.topics);
  s.news_per_topic = cfg.get_size("news_per_topic", s.news_per_topic);
  s.users = cfg.get_size("users", s.users);
  s.history_min = cfg.get_size("history_min", s.history_min);
  s.history_max = cfg.get_size("history_max", s.history_max);
  s.concentration = cfg.get_double("concentration", s.concentration);
  s.candidate_pool = cfg.get_size("candidate_pool", s.candidate_pool);
  s.max_positives = cfg.get_size("max_positives", s.max_positives);
  s.click_noise = cfg.get_double("click_noise", s.click_noise);
  s.tokens_per_topic = cfg.get_size("tokens_per_topic", s.tokens_per_topic);
  s.generic_tokens = cfg.get_size("generic_tokens", s.generic_tokens);
  s.title_min = cfg.get_size("title_min", s.title_min);
  s.title_max = cfg.get_size("title_max", s.title_max);
  s.title_topic_ratio = cfg.get_double("title_topic_ratio", s.title_topic_ratio);
  s.subcategories_per_topic = cfg.get_size("subcategories_per_topic", s.subcategories_per_topic);
  s.word_dim = cfg.get_size("word_dim", s.word_dim);
  s.train_impressions_per_user =
      cfg.get_size("train_impressions_per_user", s.train_impressions_per_user);
  s.test_impressions_per_user =
      cfg.get_size("test_impressions_per_user", s.test_impressions_per_user);
  s.seed = cfg.get_u64("seed", s.seed);
  cfg.require_all_consumed();
  s.validate();
  return s;
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticDataset data;
  Rng rng(spec.seed);
  const std::size_t dim = spec.word_dim;

  // Word vectors: topic direction plus jitter for topic words, pure jitter
  // for generic words.
  std::unordered_map<std::string, std::vector<float>> vectors;
  const double jitter = 0.5 / std::sqrt(static_cast<double>(dim));
  for (std::size_t t = 0; t < spec.topics; ++t) {
    std::vector<double> direction(dim);
    double norm = 0.0;
    for (double& v : direction) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < spec.tokens_per_topic; ++j) {
      std::vector<float> vec(dim);
      for (std::size_t c = 0; c < dim; ++c) {
        vec[c] = static_cast<float>(direction[c] / norm + rng.normal(0.0, jitter));
      }
      vectors.emplace(topic_token(t, j), vec);
      data.word_vectors.emplace_back(topic_token(t, j), std::move(vec));
    }
  }
  for (std::size_t j = 0; j < spec.generic_tokens; ++j) {
    std::vector<float> vec(dim);
    for (auto& v : vec) v = static_cast<float>(rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim))));
    vectors.emplace(generic_token(j), vec);
    data.word_vectors.emplace_back(generic_token(j), std::move(vec));
  }

  // Articles, grouped by topic.
  std::vector<std::vector<std::string>> by_topic(spec.topics);
  data.frozen_news = FrozenStore(dim);
  data.frozen_tokens = FrozenStore(dim);
  std::size_t next_news = 1;
  for (std::size_t t = 0; t < spec.topics; ++t) {
    for (std::size_t k = 0; k < spec.news_per_topic; ++k) {
      NewsRecord rec;
      rec.id = "N" + std::to_string(next_news++);
      rec.category = "cat" + std::to_string(t);
      rec.subcategory = rec.category + "sub" + std::to_string(rng.index(spec.subcategories_per_topic));
      const std::size_t len = rng.between(spec.title_min, spec.title_max);
      std::vector<double> mean(dim, 0.0);
      for (std::size_t i = 0; i < len; ++i) {
        const std::string token = rng.bernoulli(spec.title_topic_ratio)
                                      ? topic_token(t, rng.index(spec.tokens_per_topic))
                                      : generic_token(rng.index(spec.generic_tokens));
        if (i) rec.title += ' ';
        rec.title += token;
        rec.tokens.push_back(token);
        const auto& vec = vectors.at(token);
        for (std::size_t c = 0; c < dim; ++c) mean[c] += vec[c];
        data.frozen_tokens.insert(token_key(rec.id, i), vec);
      }
      double norm = 0.0;
      for (double v : mean) norm += v * v;
      norm = std::sqrt(norm);
      std::vector<float> unit(dim);
      for (std::size_t c = 0; c < dim; ++c) unit[c] = static_cast<float>(norm > 0 ? mean[c] / norm : 0.0);
      data.frozen_news.insert(rec.id, std::move(unit));
      data.truth.news_topic.emplace(rec.id, t);
      by_topic[t].push_back(rec.id);
      data.catalog.add(std::move(rec));
    }
  }

  const double c = spec.concentration;
  auto preferred_topic = [&](std::size_t favourite) {
    if (rng.bernoulli(spec.click_noise)) return rng.index(spec.topics);
    if (std::isinf(c)) return favourite;
    const double p_fav = (c + 1.0) / (c + static_cast<double>(spec.topics));
    if (rng.bernoulli(p_fav)) return favourite;
    std::size_t other = rng.index(spec.topics - 1);
    return other >= favourite ? other + 1 : other;
  };
  auto draw_from = [&](std::size_t topic) {
    return by_topic[topic][rng.index(by_topic[topic].size())];
  };

  struct Pending {
    Impression imp;
    bool test;
  };
  std::vector<Pending> pending;
  for (std::size_t u = 0; u < spec.users; ++u) {
    const std::string user = "U" + std::to_string(u + 1);
    const std::size_t favourite = rng.index(spec.topics);
    data.truth.user_topic.emplace(user, favourite);

    std::vector<std::string> history;
    std::set<std::string> seen;
    const std::size_t hist_len = rng.between(spec.history_min, spec.history_max);
    while (history.size() < hist_len) {
      std::string id = draw_from(preferred_topic(favourite));
      if (seen.insert(id).second) history.push_back(std::move(id));
    }

    const std::size_t total = spec.train_impressions_per_user + spec.test_impressions_per_user;
    for (std::size_t i = 0; i < total; ++i) {
      const bool test = i >= spec.train_impressions_per_user;
      Impression imp;
      imp.user_id = user;
      imp.history = history;
      imp.timestamp = test ? kStart + 5 * kDay + static_cast<std::int64_t>(rng.index(kDay))
                           : kStart + static_cast<std::int64_t>(rng.index(5 * kDay));
      std::set<std::string> pool;
      const std::size_t positives = rng.between(1, spec.max_positives);
      std::vector<std::pair<std::string, int>> slate;
      while (slate.size() < positives) {
        std::string id = draw_from(preferred_topic(favourite));
        if (pool.insert(id).second) slate.emplace_back(std::move(id), 1);
      }
      while (slate.size() < spec.candidate_pool) {
        std::size_t topic = rng.index(spec.topics - 1);
        if (topic >= favourite) ++topic;
        std::string id = draw_from(topic);
        if (pool.insert(id).second) slate.emplace_back(std::move(id), 0);
      }
      std::shuffle(slate.begin(), slate.end(), rng.engine());
      for (auto& [id, label] : slate) {
        imp.candidates.push_back(id);
        imp.labels.push_back(label);
      }
      pending.push_back({std::move(imp), test});
    }
  }
  std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return std::tie(a.test, a.imp.timestamp) < std::tie(b.test, b.imp.timestamp);
  });
  std::size_t next_impression = 1;
  for (auto& p : pending) {
    p.imp.impression_id = std::to_string(next_impression++);
    (p.test ? data.test_log : data.train_log).impressions.push_back(std::move(p.imp));
  }
  return data;
}

void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "train");
  std::filesystem::create_directories(dir / "test");
  for (const char* split : {"train", "test"}) {
    auto news = open_output(dir / split / "news.tsv");
    write_news_tsv(data.catalog, news);
    auto behaviors = open_output(dir / split / "behaviors.tsv");
    write_behaviors_tsv(std::string(split) == "train" ? data.train_log : data.test_log, behaviors);
  }
  {
    auto out = open_output(dir / "word_vectors.txt");
    out << std::setprecision(std::numeric_limits<float>::max_digits10);
    for (const auto& [token, vec] : data.word_vectors) {
      out << token;
      for (float v : vec) out << ' ' << v;
      out << '\n';
    }
  }
  save_frozen_store(data.frozen_news, dir / "frozen_news.bin");
  save_frozen_store(data.frozen_tokens, dir / "frozen_tokens.bin");
  {
    auto out = open_output(dir / "topics.tsv");
    for (const auto& rec : data.catalog.records) {
      out << "news\t" << rec.id << '\t' << data.truth.news_topic.at(rec.id) << '\n';
    }
    std::vector<std::pair<std::string, std::size_t>> users(data.truth.user_topic.begin(),
                                                           data.truth.user_topic.end());
    std::sort(users.begin(), users.end());
    for (const auto& [user, topic] : users) out << "user\t" << user << '\t' << topic << '\n';
  }
}

SyntheticTruth read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  SyntheticTruth truth;
  std::string kind, id;
  std::size_t topic = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    if (!(fields >> kind >> id >> topic) || (kind != "news" && kind != "user")) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": malformed topic line");
    }
    (kind == "news" ? truth.news_topic : truth.user_topic)[id] = topic;
  }
  return truth;
}

std::vector<double> oracle_scores(const SyntheticTruth& truth, const Impression& impression) {
  const std::size_t favourite = truth.user_topic.at(impression.user_id);
  std::vector<double> scores;
  for (const auto& id : impression.candidates) {
    scores.push_back(truth.news_topic.at(id) == favourite ? 1.0 : 0.0);
  }
  return scores;
}

}  // namespace newsrec
