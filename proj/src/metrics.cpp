#include "newsrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "newsrec/error.hpp"
#include "newsrec/rng.hpp"

namespace newsrec {
namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void require_square(const Tensor& m, const char* name) {
  if (m.rank() != 2 || m.rows() != m.cols()) {
    throw DimensionError(std::string("hsic: ") + name + " must be square, got " + to_string(m.shape()));
  }
}

// H S H, entry-wise: s_ij - row_i - col_j + total.
Tensor double_center(const Tensor& s) {
  const std::size_t n = s.rows();
  std::vector<double> row_mean(n, 0.0), col_mean(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      row_mean[i] += s.at(i, j);
      col_mean[j] += s.at(i, j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    total += row_mean[i];
    row_mean[i] /= static_cast<double>(n);
    col_mean[i] /= static_cast<double>(n);
  }
  total /= static_cast<double>(n * n);
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = s.at(i, j) - row_mean[i] - col_mean[j] + total;
  return out;
}

Tensor centered_gram(const Tensor& e) {
  const std::size_t n = e.rows(), d = e.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) mean[c] += e.at(i, c);
  for (double& m : mean) m /= static_cast<double>(n);
  Tensor x({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) x.at(i, c) = e.at(i, c) - mean[c];
  Tensor g({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += x.at(i, c) * x.at(j, c);
      g.at(i, j) = s;
      g.at(j, i) = s;
    }
  }
  return g;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::optional<double> ndcg_at_k(std::span<const int> ranked_labels, std::size_t k) {
  if (k == 0) throw UsageError("ndcg_at_k: k must be positive");
  std::size_t positives = 0;
  double dcg = 0.0;
  for (std::size_t i = 0; i < ranked_labels.size(); ++i) {
    if (ranked_labels[i] == 0) continue;
    ++positives;
    if (i < k) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  if (positives == 0) return std::nullopt;
  double ideal = 0.0;
  for (std::size_t i = 0; i < std::min(positives, k); ++i) {
    ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / ideal;
}

double jaccard_at_k(const RecommendationList& a, const RecommendationList& b, std::size_t k) {
  if (a.impression_id != b.impression_id) {
    throw UsageError("jaccard_at_k: lists belong to impressions '" + a.impression_id + "' and '" +
                     b.impression_id + "'");
  }
  if (k == 0) throw UsageError("jaccard_at_k: k must be positive");
  const std::size_t ka = std::min(k, a.ids.size()), kb = std::min(k, b.ids.size());
  std::unordered_set<std::string> top_a(a.ids.begin(), a.ids.begin() + static_cast<std::ptrdiff_t>(ka));
  std::size_t shared = 0;
  for (std::size_t i = 0; i < kb; ++i) shared += top_a.contains(b.ids[i]);
  const std::size_t uni = top_a.size() + kb - shared;
  if (uni == 0) return 1.0;
  return static_cast<double>(shared) / static_cast<double>(uni);
}

double mean_jaccard_at_k(std::span<const RecommendationList> a, std::span<const RecommendationList> b,
                         std::size_t k) {
  if (a.size() != b.size()) {
    throw UsageError("mean_jaccard_at_k: " + std::to_string(a.size()) + " lists against " +
                     std::to_string(b.size()));
  }
  if (a.empty()) throw DegenerateInputError("mean_jaccard_at_k: no impressions");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += jaccard_at_k(a[i], b[i], k);
  return total / static_cast<double>(a.size());
}

double hsic_linear(const Tensor& s, const Tensor& s_prime) {
  require_square(s, "S");
  require_square(s_prime, "S'");
  if (s.rows() != s_prime.rows()) {
    throw DimensionError("hsic: " + to_string(s.shape()) + " against " + to_string(s_prime.shape()));
  }
  const std::size_t n = s.rows();
  if (n < 2) throw DegenerateInputError("hsic: need at least 2 instances, got " + std::to_string(n));
  // trace(S H S' H) = sum_ij (H S H)_ij S'_ji since H is idempotent.
  const Tensor a = double_center(s);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) total += a.at(i, j) * s_prime.at(j, i);
  const double denom = static_cast<double>(n - 1);
  return total / (denom * denom);
}

void EmbeddingMatrix::validate() const {
  if (matrix.rank() != 2 || matrix.rows() != ids.size()) {
    throw DimensionError("embedding matrix: " + std::to_string(ids.size()) + " ids for shape " +
                         to_string(matrix.shape()));
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw DataError("embedding matrix: duplicate row id '" + id + "'");
  }
}

double linear_cka(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  a.validate();
  b.validate();
  if (a.ids.size() != b.ids.size()) {
    throw UsageError("linear_cka: " + std::to_string(a.ids.size()) + " rows against " +
                     std::to_string(b.ids.size()));
  }
  for (std::size_t i = 0; i < a.ids.size(); ++i) {
    if (a.ids[i] != b.ids[i]) {
      throw UsageError("linear_cka: row " + std::to_string(i) + " is '" + a.ids[i] + "' vs '" +
                       b.ids[i] + "'");
    }
  }
  if (a.ids.size() < 2) throw DegenerateInputError("linear_cka: need at least 2 rows");
  const Tensor s = centered_gram(a.matrix);
  const Tensor t = centered_gram(b.matrix);
  const double xy = hsic_linear(s, t);
  const double xx = hsic_linear(s, s);
  const double yy = hsic_linear(t, t);
  const double denom = std::sqrt(xx * yy);
  if (!(denom > 0.0)) throw DegenerateInputError("linear_cka: constant embeddings");
  return std::clamp(xy / denom, 0.0, 1.0);
}

EmbeddingMatrix subsample_rows(const EmbeddingMatrix& e, std::size_t count, std::uint64_t seed) {
  e.validate();
  if (count >= e.ids.size()) return e;
  std::vector<std::size_t> order(e.ids.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  order.resize(count);
  std::sort(order.begin(), order.end());
  const std::size_t d = e.matrix.cols();
  EmbeddingMatrix out;
  out.matrix = Tensor({count, d});
  for (std::size_t r = 0; r < count; ++r) {
    out.ids.push_back(e.ids[order[r]]);
    auto src = e.matrix.row(order[r]);
    std::copy(src.begin(), src.end(), out.matrix.row(r).begin());
  }
  return out;
}

void ComparisonMatrix::validate(bool unit_diagonal, double tolerance) const {
  const std::size_t n = labels.size();
  if (values.rank() != 2 || values.rows() != n || values.cols() != n) {
    throw DimensionError("comparison matrix: " + std::to_string(n) + " labels for shape " +
                         to_string(values.shape()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (unit_diagonal && std::abs(values.at(i, i) - 1.0) > tolerance) {
      throw UsageError("comparison matrix: diagonal entry for '" + labels[i] + "' is " +
                       fixed6(values.at(i, i)));
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(values.at(i, j) - values.at(j, i)) > tolerance) {
        throw UsageError("comparison matrix: asymmetric entry for '" + labels[i] + "' and '" +
                         labels[j] + "'");
      }
    }
  }
}

ComparisonMatrix comparison_matrix(const std::vector<std::string>& labels, const std::string& metric,
                                   const std::function<double(std::size_t, std::size_t)>& pair,
                                   bool unit_diagonal) {
  const std::size_t n = labels.size();
  ComparisonMatrix m{labels, Tensor({n, n}), metric};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      try {
        m.values.at(i, j) = pair(i, j);
      } catch (const Error& e) {
        rethrow_with_context(e, labels[i] + " vs " + labels[j] + ": ");
      }
    }
  }
  m.validate(unit_diagonal);
  return m;
}

ComparisonMatrix cka_matrix(const std::vector<std::string>& labels,
                            const std::vector<EmbeddingMatrix>& embeddings) {
  if (labels.size() != embeddings.size()) throw UsageError("cka_matrix: label count mismatch");
  return comparison_matrix(
      labels, "cka",
      [&](std::size_t i, std::size_t j) { return linear_cka(embeddings[i], embeddings[j]); }, true);
}

ComparisonMatrix jaccard_matrix(const std::vector<std::string>& labels,
                                const std::vector<std::vector<RecommendationList>>& lists,
                                std::size_t k) {
  if (labels.size() != lists.size()) throw UsageError("jaccard_matrix: label count mismatch");
  return comparison_matrix(
      labels, "jaccard@" + std::to_string(k),
      [&](std::size_t i, std::size_t j) { return mean_jaccard_at_k(lists[i], lists[j], k); }, true);
}

std::vector<double> JaccardSweep::mean_curve() const {
  std::vector<double> out;
  for (const auto& row : values) {
    out.push_back(row.empty() ? 1.0
                              : std::accumulate(row.begin(), row.end(), 0.0) /
                                    static_cast<double>(row.size()));
  }
  return out;
}

JaccardSweep jaccard_sweep(const std::vector<std::string>& labels,
                           const std::vector<std::vector<RecommendationList>>& lists,
                           std::size_t k_min, std::size_t k_max) {
  if (k_min == 0 || k_min > k_max) {
    throw UsageError("jaccard_sweep: invalid range " + std::to_string(k_min) + ":" + std::to_string(k_max));
  }
  JaccardSweep sweep;
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = i + 1; j < labels.size(); ++j) sweep.pairs.push_back(labels[i] + "|" + labels[j]);
  for (std::size_t k = k_min; k <= k_max; ++k) {
    sweep.ks.push_back(k);
    auto& row = sweep.values.emplace_back();
    for (std::size_t i = 0; i < labels.size(); ++i)
      for (std::size_t j = i + 1; j < labels.size(); ++j) row.push_back(mean_jaccard_at_k(lists[i], lists[j], k));
  }
  return sweep;
}

Dendrogram hierarchical_cluster(const ComparisonMatrix& m) {
  m.validate(false);
  const std::size_t n = m.labels.size();
  Dendrogram out{m.labels, {}};
  struct Cluster {
    std::size_t id;
    std::size_t size;
    std::size_t first_leaf;
  };
  std::vector<Cluster> active;
  for (std::size_t i = 0; i < n; ++i) active.push_back({i, 1, i});
  // dist[i][j] between active slots; merged clusters reuse the lower slot.
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dist[i][j] = 1.0 - m.values.at(i, j);

  std::size_t next_id = n;
  while (active.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    auto key = [&](std::size_t i, std::size_t j) {
      auto a = active[i].first_leaf, b = active[j].first_leaf;
      return std::pair(std::min(a, b), std::max(a, b));
    };
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double d = dist[i][j];
        if (d < best || (d == best && key(i, j) < key(bi, bj))) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    const Cluster a = active[bi], b = active[bj];
    out.merges.push_back({std::min(a.id, b.id), std::max(a.id, b.id), best, a.size + b.size});
    // Lance-Williams update for average linkage.
    const double wa = static_cast<double>(a.size), wb = static_cast<double>(b.size);
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (k == bi || k == bj) continue;
      const double d = (wa * dist[bi][k] + wb * dist[bj][k]) / (wa + wb);
      dist[bi][k] = dist[k][bi] = d;
    }
    active[bi] = {next_id++, a.size + b.size, std::min(a.first_leaf, b.first_leaf)};
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(bj));
    for (auto& row : dist) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return out;
}

void write_comparison_csv(const ComparisonMatrix& m, std::ostream& out) {
  out << m.metric;
  for (const auto& l : m.labels) out << ',' << l;
  out << '\n';
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    out << m.labels[i];
    for (std::size_t j = 0; j < m.labels.size(); ++j) out << ',' << fixed6(m.values.at(i, j));
    out << '\n';
  }
}

ComparisonMatrix read_comparison_csv(std::istream& in, const std::string& metric) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("comparison csv: missing header");
  auto header = split_csv(line);
  ComparisonMatrix m;
  m.metric = metric.empty() ? header.front() : metric;
  m.labels.assign(header.begin() + 1, header.end());
  const std::size_t n = m.labels.size();
  m.values = Tensor({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw FormatError("comparison csv: missing row " + std::to_string(i + 2));
    auto cells = split_csv(line);
    if (cells.size() != n + 1 || cells[0] != m.labels[i]) {
      throw FormatError("comparison csv: malformed row " + std::to_string(i + 2));
    }
    for (std::size_t j = 0; j < n; ++j) {
      try {
        m.values.at(i, j) = std::stod(cells[j + 1]);
      } catch (const std::exception&) {
        throw FormatError("comparison csv: bad number '" + cells[j + 1] + "' on row " + std::to_string(i + 2));
      }
    }
  }
  return m;
}

void write_dendrogram(const Dendrogram& d, std::ostream& out) {
  const std::size_t n = d.labels.size();
  auto name = [&](std::size_t id) { return id < n ? d.labels[id] : "#" + std::to_string(id); };
  for (const auto& merge : d.merges) {
    out << "merge " << name(merge.a) << ' ' << name(merge.b) << " at " << fixed6(merge.height) << '\n';
  }
}

void write_jaccard_sweep_csv(const JaccardSweep& sweep, std::ostream& out) {
  out << 'k';
  for (const auto& p : sweep.pairs) out << ',' << p;
  out << ",mean\n";
  const auto mean = sweep.mean_curve();
  for (std::size_t r = 0; r < sweep.ks.size(); ++r) {
    out << sweep.ks[r];
    for (double v : sweep.values[r]) out << ',' << fixed6(v);
    out << ',' << fixed6(mean[r]) << '\n';
  }
}

}  // namespace newsrec
