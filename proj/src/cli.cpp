#include "newsrec/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "newsrec/checkpoint.hpp"
#include "newsrec/experiment.hpp"
#include "newsrec/frozen_store.hpp"
#include "newsrec/synthetic.hpp"

namespace newsrec {
namespace {

std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void with_output(const std::string& path, std::ostream& fallback,
                 const std::function<void(std::ostream&)>& writer) {
  if (path.empty()) {
    writer(fallback);
    return;
  }
  auto p = std::filesystem::path(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  write_atomically(p, writer);
}

KeyValueConfig store_overrides(const std::string& frozen_news, const std::string& frozen_tokens) {
  KeyValueConfig o;
  if (!frozen_news.empty()) o.set("frozen_news", std::filesystem::absolute(frozen_news).string());
  if (!frozen_tokens.empty()) o.set("frozen_tokens", std::filesystem::absolute(frozen_tokens).string());
  return o;
}

struct CheckpointArgs {
  std::string checkpoint;
  std::string data;
  std::string frozen_news;
  std::string frozen_tokens;
};

void add_checkpoint_args(CLI::App* cmd, CheckpointArgs& a) {
  cmd->add_option("checkpoint", a.checkpoint, "checkpoint.bin of a run")->required();
  cmd->add_option("data", a.data, "directory with news.tsv and behaviors.tsv")->required();
  cmd->add_option("--frozen-news", a.frozen_news, "replace the frozen article store");
  cmd->add_option("--frozen-tokens", a.frozen_tokens, "replace the frozen token store");
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed, std::ostream& out) {
  if (!std::filesystem::exists(config_path)) throw ConfigError("no such config file '" + config_path + "'");
  auto config = load_experiment(config_path, seed);
  auto result = run_experiment(config);
  out << "run directory: " << result.run_dir.string() << '\n';
  for (const auto& e : result.log.epochs) {
    out << "epoch " << e.epoch << ": loss " << g9(e.mean_loss) << ", validation ndcg@"
        << config.training.validation_k << " " << g9(e.validation_ndcg) << '\n';
  }
  write_metrics_csv(result.test, out);
  return kExitOk;
}

int cmd_evaluate(const CheckpointArgs& a, const std::vector<std::size_t>& ks, const std::string& out_path,
                 const std::string& lists_path, bool per_impression, std::ostream& out) {
  auto loaded = load_checkpoint(a.checkpoint, store_overrides(a.frozen_news, a.frozen_tokens));
  auto data = load_dataset(a.data, loaded.max_history);
  NewsIndex index(*loaded.model, data.catalog);
  Inference inference(*loaded.model, index);
  std::vector<RecommendationList> lists;
  auto ev = evaluate_scores(data.log, ks, [&](const Impression& imp) {
    auto scores = inference.scores(imp);
    if (!lists_path.empty()) lists.push_back(rank_by_scores(imp, scores));
    return scores;
  });
  with_output(out_path, out, [&](std::ostream& o) { write_metrics_csv(ev, o, per_impression); });
  if (!lists_path.empty()) {
    with_output(lists_path, out, [&](std::ostream& o) { write_recommendation_lists(lists, o); });
  }
  return kExitOk;
}

int cmd_dump(const CheckpointArgs& a, const std::string& target, const std::string& out_path, bool tsv,
             std::ostream& out) {
  auto loaded = load_checkpoint(a.checkpoint, store_overrides(a.frozen_news, a.frozen_tokens));
  auto data = load_dataset(a.data, loaded.max_history);
  NewsIndex index(*loaded.model, data.catalog);
  Inference inference(*loaded.model, index);
  FrozenStore store(loaded.model->dim());
  auto add = [&](const std::string& id, const Tensor& v) {
    store.insert(id, std::vector<float>(v.values().begin(), v.values().end()));
  };
  if (target == "news") {
    std::vector<std::string> ids;
    for (const auto& r : data.catalog.records) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) add(id, inference.news(id));
  } else {
    if (loaded.model->user_encoder().candidate_aware()) {
      throw ConfigError("dump-embeddings: cand_aware users have no candidate-independent embedding");
    }
    std::map<std::string, const Impression*> latest;
    for (const auto& imp : data.log.impressions) latest[imp.user_id] = &imp;
    for (const auto& [user, imp] : latest) add(user, inference.user(*imp));
  }
  const std::string path =
      out_path.empty() ? (output_root(".") / (target + "_embeddings.bin")).string() : out_path;
  if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  save_frozen_store(store, path);
  if (tsv) {
    auto p = std::filesystem::path(path).replace_extension(".tsv");
    save_frozen_store(store, p, true);
  }
  out << "wrote " << store.size() << " " << target << " embeddings of dimension " << store.dim() << " to "
      << path << '\n';
  return kExitOk;
}

std::pair<std::string, std::string> split_artifact(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq != std::string::npos && eq > 0) return {arg.substr(0, eq), arg.substr(eq + 1)};
  return {std::filesystem::path(arg).stem().string(), arg};
}

EmbeddingMatrix read_embedding_matrix(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("no such embedding file '" + path + "'");
  const auto store = load_frozen_store(path);
  EmbeddingMatrix e;
  e.ids = store.ids();
  e.matrix = Tensor({store.size(), store.dim()});
  for (std::size_t r = 0; r < store.size(); ++r) {
    const auto& v = store.at(e.ids[r]);
    std::copy(v.begin(), v.end(), e.matrix.row(r).begin());
  }
  return e;
}

int cmd_compare(const std::vector<std::string>& artifacts, const std::string& metric, std::size_t k,
                bool cluster, const std::string& sweep, const std::string& out_dir, std::size_t subsample,
                std::uint64_t seed, std::ostream& out) {
  if (artifacts.size() < 2) throw UsageError("compare: need at least two artifacts");
  std::vector<std::string> labels, paths;
  for (const auto& a : artifacts) {
    auto [label, path] = split_artifact(a);
    if (std::find(labels.begin(), labels.end(), label) != labels.end()) {
      throw UsageError("compare: duplicate label '" + label + "'");
    }
    labels.push_back(label);
    paths.push_back(path);
  }
  const std::filesystem::path dir = out_dir.empty() ? output_root(".") : std::filesystem::path(out_dir);
  std::filesystem::create_directories(dir);

  ComparisonMatrix matrix;
  std::optional<JaccardSweep> curve;
  if (metric == "cka") {
    std::vector<EmbeddingMatrix> mats;
    for (const auto& p : paths) mats.push_back(read_embedding_matrix(p));
    for (std::size_t i = 1; i < mats.size(); ++i) {
      const auto& a = mats[0].ids;
      const auto& b = mats[i].ids;
      for (std::size_t r = 0; r < std::max(a.size(), b.size()); ++r) {
        if (r >= a.size() || r >= b.size() || a[r] != b[r]) {
          throw AlignmentError("compare: rows of '" + labels[0] + "' and '" + labels[i] + "' differ at row " +
                               std::to_string(r) + " ('" + (r < a.size() ? a[r] : "<none>") + "' vs '" +
                               (r < b.size() ? b[r] : "<none>") + "')");
        }
      }
    }
    if (subsample > 0) {
      for (auto& m : mats) m = subsample_rows(m, subsample, seed);
    }
    matrix = cka_matrix(labels, mats);
  } else if (metric == "jaccard") {
    std::vector<std::vector<RecommendationList>> lists;
    for (const auto& p : paths) {
      if (!std::filesystem::exists(p)) throw ConfigError("no such list file '" + p + "'");
      auto l = read_recommendation_lists(p);
      std::sort(l.begin(), l.end(), [](const auto& x, const auto& y) { return x.impression_id < y.impression_id; });
      lists.push_back(std::move(l));
    }
    std::size_t pool = 0;
    for (std::size_t i = 0; i < lists.size(); ++i) {
      const auto& a = lists[0];
      const auto& b = lists[i];
      for (std::size_t r = 0; r < std::max(a.size(), b.size()); ++r) {
        if (r >= a.size() || r >= b.size() || a[r].impression_id != b[r].impression_id) {
          throw AlignmentError("compare: impressions of '" + labels[0] + "' and '" + labels[i] +
                               "' differ at '" + (r < a.size() ? a[r].impression_id : b[r].impression_id) + "'");
        }
        pool = std::max(pool, b[r].ids.size());
      }
    }
    matrix = jaccard_matrix(labels, lists, k);
    std::size_t lo = 1, hi = pool;
    if (!sweep.empty()) {
      const auto colon = sweep.find(':');
      try {
        if (colon == std::string::npos) throw std::invalid_argument(sweep);
        lo = std::stoul(sweep.substr(0, colon));
        hi = std::stoul(sweep.substr(colon + 1));
      } catch (const std::exception&) {
        throw ConfigError("compare: --sweep-k expects 'lo:hi', got '" + sweep + "'");
      }
    }
    curve = jaccard_sweep(labels, lists, lo, hi);
  } else {
    throw ConfigError("compare: unknown metric '" + metric + "' (expected cka or jaccard)");
  }

  const std::string name = metric == "cka" ? "cka.csv" : "jaccard@" + std::to_string(k) + ".csv";
  write_atomically(dir / name, [&](std::ostream& o) { write_comparison_csv(matrix, o); });
  write_comparison_csv(matrix, out);
  if (curve) {
    write_atomically(dir / "jaccard_sweep.csv", [&](std::ostream& o) { write_jaccard_sweep_csv(*curve, o); });
  }
  if (cluster) {
    const auto dendrogram = hierarchical_cluster(matrix);
    write_atomically(dir / "dendrogram.txt", [&](std::ostream& o) { write_dendrogram(dendrogram, o); });
    write_dendrogram(dendrogram, out);
  }
  return kExitOk;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
              std::ostream& out) {
  if (!std::filesystem::exists(spec_path)) throw ConfigError("no such spec file '" + spec_path + "'");
  auto cfg = KeyValueConfig::load(spec_path);
  std::filesystem::path dir = out_dir;
  if (auto configured = cfg.get("output_dir")) {
    if (dir.empty()) dir = std::filesystem::absolute(spec_path).parent_path() / *configured;
    cfg.erase("output_dir");
  }
  if (dir.empty()) dir = output_root(".") / std::filesystem::path(spec_path).stem();
  if (seed) cfg.set("seed", std::to_string(*seed));
  const auto spec = SyntheticSpec::from_config(cfg);
  const auto data = generate_synthetic(spec);
  write_synthetic(data, dir);
  out << "wrote " << data.catalog.records.size() << " articles, " << data.train_log.impressions.size()
      << " training and " << data.test_log.impressions.size() << " test impressions to " << dir.string()
      << '\n';
  return kExitOk;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDivergence: return kExitDivergence;
    case ErrorKind::kArtifactMismatch: return kExitArtifactMismatch;
    case ErrorKind::kAlignment: return kExitAlignment;
    default: return kExitConfig;
  }
}

void write_recommendation_lists(const std::vector<RecommendationList>& lists, std::ostream& out) {
  for (const auto& l : lists) {
    out << l.impression_id << '\t';
    for (std::size_t i = 0; i < l.ids.size(); ++i) out << (i ? " " : "") << l.ids[i];
    out << '\t';
    for (std::size_t i = 0; i < l.scores.size(); ++i) out << (i ? " " : "") << g9(l.scores[i]);
    out << '\n';
  }
}

std::vector<RecommendationList> read_recommendation_lists(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::vector<RecommendationList> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields");
    }
    RecommendationList l;
    l.impression_id = line.substr(0, t1);
    std::istringstream ids(line.substr(t1 + 1, t2 - t1 - 1)), scores(line.substr(t2 + 1));
    for (std::string id; ids >> id;) l.ids.push_back(id);
    for (double s; scores >> s;) l.scores.push_back(s);
    if (l.ids.size() != l.scores.size()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": ids and scores differ in length");
    }
    out.push_back(std::move(l));
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train, evaluate and compare neural news recommenders", "newsrec"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");

  std::string config_path;
  auto* train = app.add_subcommand("train", "train a model from an experiment config");
  train->add_option("config", config_path, "experiment config")->required();

  CheckpointArgs eval_args;
  std::vector<std::size_t> ks{5, 10};
  std::string eval_out, lists_out;
  bool per_impression = false;
  auto* evaluate = app.add_subcommand("evaluate", "mean nDCG@k of a checkpoint on a dataset");
  add_checkpoint_args(evaluate, eval_args);
  evaluate->add_option("--k", ks, "cutoffs, e.g. 5,10")->delimiter(',');
  evaluate->add_option("--out", eval_out, "metrics CSV path (default: stdout)");
  evaluate->add_option("--lists", lists_out, "also write ranked recommendation lists here");
  evaluate->add_flag("--per-impression", per_impression, "one CSV row per impression");

  CheckpointArgs dump_args;
  std::string target = "news", dump_out;
  bool dump_tsv = false;
  auto* dump = app.add_subcommand("dump-embeddings", "write news or user embeddings of a dataset");
  add_checkpoint_args(dump, dump_args);
  dump->add_option("--target", target, "news or user")->check(CLI::IsMember({"news", "user"}));
  dump->add_option("--out", dump_out, "binary store path (default: <output root>/<target>_embeddings.bin)");
  dump->add_flag("--tsv", dump_tsv, "also write a TSV copy");

  std::vector<std::string> artifacts;
  std::string metric = "cka", sweep, compare_dir;
  std::size_t compare_k = 10, subsample = 0;
  bool cluster = false;
  auto* compare = app.add_subcommand("compare", "pairwise CKA or Jaccard@k between artifacts");
  compare->add_option("artifacts", artifacts, "label=path entries")->required();
  compare->add_option("--metric", metric, "cka or jaccard");
  compare->add_option("--k", compare_k, "cutoff for jaccard");
  compare->add_flag("--cluster", cluster, "average-linkage dendrogram");
  compare->add_option("--sweep-k", sweep, "jaccard curve range lo:hi");
  compare->add_option("--out-dir", compare_dir, "directory for CSV outputs (default: output root)");
  compare->add_option("--subsample", subsample, "CKA over a seeded subset of rows");

  std::string spec_path, synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("spec", spec_path, "synthetic spec")->required();
  synth->add_option("--out", synth_out, "output directory");

  // Accept --seed after the subcommand too.
  for (auto* sub : {train, evaluate, dump, compare, synth}) {
    sub->add_option("--seed", seed, "override the configured seed");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  auto seed_given = [&]() -> std::optional<std::uint64_t> {
    if (seed_opt->count() > 0) return seed;
    for (auto* sub : {train, evaluate, dump, compare, synth}) {
      if (sub->parsed() && sub->get_option("--seed")->count() > 0) return seed;
    }
    return std::nullopt;
  };

  try {
    if (train->parsed()) return cmd_train(config_path, seed_given(), out);
    if (evaluate->parsed()) return cmd_evaluate(eval_args, ks, eval_out, lists_out, per_impression, out);
    if (dump->parsed()) return cmd_dump(dump_args, target, dump_out, dump_tsv, out);
    if (compare->parsed()) {
      return cmd_compare(artifacts, metric, compare_k, cluster, sweep, compare_dir, subsample,
                         seed_given().value_or(1), out);
    }
    if (synth->parsed()) return cmd_synth(spec_path, synth_out, seed_given(), out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace newsrec
