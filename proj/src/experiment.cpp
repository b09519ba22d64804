#include "newsrec/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "newsrec/checkpoint.hpp"
#include "newsrec/error.hpp"

namespace newsrec {
namespace {

std::string fixed(double v, int digits = 8) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

std::filesystem::path existing(const std::filesystem::path& base, const KeyValueConfig& cfg,
                               const std::string& key) {
  auto p = resolve(base, *cfg.get(key));
  if (!std::filesystem::exists(p)) {
    throw ConfigError(cfg.source() + ": field '" + key + "': no such path '" + p.string() + "'");
  }
  return std::filesystem::absolute(p).lexically_normal();
}

bool uses_words(TextFamily f) {
  return f == TextFamily::kCnnAddAtt || f == TextFamily::kMhsaAddAtt || f == TextFamily::kCnnMhsaAddAtt;
}

std::vector<std::string> users_of(const BehaviorLog& log) {
  std::set<std::string> users;
  for (const auto& imp : log.impressions) users.insert(imp.user_id);
  return {users.begin(), users.end()};
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

ExperimentConfig parse_experiment(const KeyValueConfig& input, const std::filesystem::path& base_dir,
                                  std::optional<std::uint64_t> seed_override) {
  KeyValueConfig cfg = input;
  if (seed_override) cfg.set("seed", std::to_string(*seed_override));
  ExperimentConfig e;
  e.source = cfg;
  e.name = cfg.get_string("name", e.name);
  if (e.name.empty() || e.name.find('/') != std::string::npos) {
    throw ConfigError(cfg.source() + ": field 'name': expected a plain directory name, got '" + e.name + "'");
  }
  e.seed = cfg.get_u64("seed", e.seed);

  if (cfg.has("synthetic")) {
    if (cfg.has("train_dir") || cfg.has("test_dir")) {
      throw ConfigError(cfg.source() + ": 'synthetic' excludes 'train_dir' and 'test_dir'");
    }
    const auto spec_path = existing(base_dir, cfg, "synthetic");
    e.synthetic = SyntheticSpec::from_config(KeyValueConfig::load(spec_path));
  } else {
    if (!cfg.has("train_dir")) throw ConfigError(cfg.source() + ": field 'train_dir' is required");
    e.train_dir = existing(base_dir, cfg, "train_dir");
    e.test_dir = cfg.has("test_dir") ? existing(base_dir, cfg, "test_dir") : e.train_dir;
  }
  if (auto b = cfg.get("split_boundary")) {
    try {
      e.split_boundary = parse_boundary(*b);
    } catch (const Error&) {
      throw ConfigError(cfg.source() + ": field 'split_boundary': expected a timestamp, got '" + *b + "'");
    }
  }
  if (cfg.has("word_vectors")) e.word_vectors = existing(base_dir, cfg, "word_vectors");
  if (cfg.has("frozen_news")) e.frozen_news = existing(base_dir, cfg, "frozen_news");
  if (cfg.has("frozen_tokens")) e.frozen_tokens = existing(base_dir, cfg, "frozen_tokens");
  e.output_dir = resolve(base_dir, cfg.get_string("output_dir", "runs"));
  e.eval_ks = cfg.get_size_list("eval_ks", e.eval_ks);

  e.model = parse_model_config(cfg);
  const bool frozen = !uses_words(e.model.news.text.family);
  auto& t = e.training;
  t.seed = e.seed;
  t.adam.learning_rate = cfg.get_double("train.lr", t.adam.learning_rate);
  t.adam.beta1 = cfg.get_double("train.beta1", t.adam.beta1);
  t.adam.beta2 = cfg.get_double("train.beta2", t.adam.beta2);
  t.adam.epsilon = cfg.get_double("train.epsilon", t.adam.epsilon);
  t.epochs = cfg.get_size("train.epochs", frozen ? 10 : 20);
  t.batch_size = cfg.get_positive("train.batch_size", t.batch_size);
  t.negatives = cfg.get_positive("train.negatives", t.negatives);
  e.max_history = cfg.get_positive("train.max_history", e.max_history);
  if (!(t.adam.learning_rate >= 0.0)) {
    throw ConfigError(cfg.source() + ": field 'train.lr': expected a non-negative number");
  }
  if (!(t.adam.beta1 >= 0.0 && t.adam.beta1 < 1.0 && t.adam.beta2 >= 0.0 && t.adam.beta2 < 1.0)) {
    throw ConfigError(cfg.source() + ": Adam betas must lie in [0, 1)");
  }
  cfg.require_all_consumed();
  return e;
}

ExperimentConfig load_experiment(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  auto cfg = KeyValueConfig::load(path);
  return parse_experiment(cfg, std::filesystem::absolute(path).parent_path(), seed_override);
}

std::filesystem::path output_root(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv(kOutputRootVariable); env && *env) return env;
  return fallback;
}

std::filesystem::path fresh_run_dir(const std::filesystem::path& root, const std::string& name) {
  std::filesystem::create_directories(root);
  auto candidate = root / name;
  for (int i = 1; std::filesystem::exists(candidate); ++i) {
    candidate = root / (name + "-" + std::to_string(i));
  }
  std::filesystem::create_directory(candidate);
  return candidate;
}

Dataset load_dataset(const std::filesystem::path& dir, std::size_t max_history, const NewsCatalog* extra) {
  for (const char* file : {"news.tsv", "behaviors.tsv"}) {
    if (!std::filesystem::exists(dir / file)) {
      throw ConfigError("missing '" + (dir / file).string() + "'");
    }
  }
  Dataset d;
  d.catalog = parse_news_tsv(dir / "news.tsv");
  if (extra) merge_catalog(d.catalog, *extra);
  d.log = parse_behaviors_tsv(dir / "behaviors.tsv", d.catalog, max_history);
  return d;
}

void write_metrics_csv(const Evaluation& ev, std::ostream& out, bool per_impression) {
  if (per_impression) {
    out << "impression_id";
    for (auto k : ev.ks) out << ",ndcg@" << k;
    out << '\n';
    for (const auto& row : ev.rows) {
      out << row.impression_id;
      for (double v : row.ndcg) out << ',' << fixed(v);
      out << '\n';
    }
    return;
  }
  for (std::size_t i = 0; i < ev.ks.size(); ++i) out << (i ? "," : "") << "ndcg@" << ev.ks[i];
  out << ",impressions,excluded\n";
  for (std::size_t i = 0; i < ev.ks.size(); ++i) out << (i ? "," : "") << fixed(ev.mean_ndcg[i]);
  out << ',' << ev.impressions << ',' << ev.excluded << '\n';
}

void write_epochs_csv(const TrainingLog& log, std::size_t k, std::ostream& out) {
  out << "epoch,mean_loss,validation_ndcg@" << k << '\n';
  for (const auto& e : log.epochs) {
    out << e.epoch << ',' << fixed(e.mean_loss) << ',' << fixed(e.validation_ndcg) << '\n';
  }
}

RunResult run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  RunResult result;
  result.run_dir = fresh_run_dir(output_root(config.output_dir), config.name);

  std::filesystem::path train_dir = config.train_dir, test_dir = config.test_dir;
  auto word_vectors = config.word_vectors;
  auto frozen_news = config.frozen_news;
  auto frozen_tokens = config.frozen_tokens;
  if (config.synthetic) {
    const auto data_dir = std::filesystem::absolute(result.run_dir / "data");
    write_synthetic(generate_synthetic(*config.synthetic), data_dir);
    train_dir = data_dir / "train";
    test_dir = data_dir / "test";
    if (!word_vectors) word_vectors = data_dir / "word_vectors.txt";
    if (!frozen_news) frozen_news = data_dir / "frozen_news.bin";
    if (!frozen_tokens) frozen_tokens = data_dir / "frozen_tokens.bin";
  }

  Dataset train_data = load_dataset(train_dir, config.max_history);
  Dataset test_data = load_dataset(test_dir, config.max_history, &train_data.catalog);
  const std::int64_t boundary = config.split_boundary.value_or(last_day_boundary(train_data.log));
  TemporalSplit split = temporal_split(train_data.log, boundary);

  KeyValueConfig section = model_config_entries(config.model);
  section.set("train.max_history", std::to_string(config.max_history));
  auto recorded = [&](const std::filesystem::path& p) {
    // Inside the run directory: relative, so identical runs give identical checkpoints.
    const auto rel = std::filesystem::absolute(p).lexically_relative(std::filesystem::absolute(result.run_dir));
    return !rel.empty() && *rel.begin() != ".." ? rel.generic_string() : std::filesystem::absolute(p).string();
  };
  if (frozen_news) section.set("frozen_news", recorded(*frozen_news));
  if (frozen_tokens) section.set("frozen_tokens", recorded(*frozen_tokens));

  ModelConfig model_config = config.model;
  ModelResources resources;
  resources.vocab = train_data.catalog.vocab;
  resources.users = users_of(train_data.log);
  std::optional<WordVectorTable> vectors;
  if (uses_words(model_config.news.text.family) && word_vectors) {
    vectors = load_word_embeddings(*word_vectors, resources.vocab.words, config.seed);
    if (!config.source.has("news.word_dim")) {
      model_config.news.text.word_dim = vectors->dim;
      section.set("news.word_dim", std::to_string(vectors->dim));
    }
    resources.word_vectors = &*vectors;
  }
  KeyValueConfig store_paths;
  if (frozen_news) store_paths.set("frozen_news", frozen_news->string());
  if (frozen_tokens) store_paths.set("frozen_tokens", frozen_tokens->string());
  load_frozen_sources(model_config, store_paths, resources);

  RecommenderModel model(model_config, std::move(resources), config.seed);
  NewsIndex train_index(model, train_data.catalog);
  result.log = train(model, train_index, split.train, split.validation, config.training);

  NewsIndex test_index(model, test_data.catalog);
  Inference inference(model, test_index);
  result.test = evaluate(inference, test_data.log, config.eval_ks);

  const auto& dir = result.run_dir;
  const std::uint64_t digest = config.source.digest();
  save_checkpoint(model, section, digest, dir / "checkpoint.bin");
  write_atomically(dir / "epochs.csv", [&](std::ostream& out) {
    write_epochs_csv(result.log, config.training.validation_k, out);
  });
  write_atomically(dir / "metrics.csv", [&](std::ostream& out) { write_metrics_csv(result.test, out); });

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_atomically(dir / "manifest.txt", [&](std::ostream& out) {
    const std::size_t k = config.training.validation_k;
    out << "config_digest = " << hex_digest(digest) << '\n';
    out << "code_version = " << kCodeVersion << '\n';
    out << "seed = " << config.seed << '\n';
    out << "started = " << started << '\n';
    out << "wall_clock_seconds = " << fixed(seconds, 3) << '\n';
    out << "split_boundary = " << format_timestamp(boundary) << '\n';
    out << "train_impressions = " << split.train.impressions.size() << '\n';
    out << "validation_impressions = " << split.validation.impressions.size() << '\n';
    out << "samples_per_epoch = " << result.log.samples_per_epoch << '\n';
    out << "skipped_impressions = " << result.log.skipped_impressions << '\n';
    out << "epochs_run = " << result.log.epochs.size() << '\n';
    for (const auto& e : result.log.epochs) {
      out << "epoch." << e.epoch << ".mean_loss = " << fixed(e.mean_loss) << '\n';
      out << "epoch." << e.epoch << ".validation_ndcg@" << k << " = " << fixed(e.validation_ndcg) << '\n';
    }
    if (result.log.best_epoch) {
      out << "best_epoch = " << *result.log.best_epoch << '\n';
      out << "best_validation_ndcg@" << k << " = " << fixed(result.log.best_validation_ndcg) << '\n';
    }
    for (std::size_t i = 0; i < result.test.ks.size(); ++i) {
      out << "test.ndcg@" << result.test.ks[i] << " = " << fixed(result.test.mean_ndcg[i]) << '\n';
    }
    out << "test.impressions = " << result.test.impressions << '\n';
    out << "test.excluded = " << result.test.excluded << '\n';
  });
  return result;
}

}  // namespace newsrec
