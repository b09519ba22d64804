#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "newsrec/tensor.hpp"

namespace newsrec {

/// Binary-relevance nDCG@k over labels listed in ranked order. Empty when
/// the list holds no positive; callers count those as excluded.
std::optional<double> ndcg_at_k(std::span<const int> ranked_labels, std::size_t k);

/// Candidate ids in descending score order.
struct RecommendationList {
  std::string impression_id;
  std::vector<std::string> ids;
  std::vector<double> scores;
};

/// |top-k(a) ∩ top-k(b)| / |top-k(a) ∪ top-k(b)|, ignoring order.
double jaccard_at_k(const RecommendationList& a, const RecommendationList& b, std::size_t k);

/// Unweighted mean of jaccard_at_k over impression-aligned lists.
double mean_jaccard_at_k(std::span<const RecommendationList> a,
                         std::span<const RecommendationList> b, std::size_t k);

/// Biased estimator trace(S H S' H) / (n - 1)^2 with H the centering matrix.
double hsic_linear(const Tensor& s, const Tensor& s_prime);

struct EmbeddingMatrix {
  std::vector<std::string> ids;
  Tensor matrix;  // [ids.size() x d]

  void validate() const;
};

/// Linear CKA between two row-aligned embedding sets, clipped to [0, 1].
double linear_cka(const EmbeddingMatrix& a, const EmbeddingMatrix& b);

/// Seeded subset of `count` rows, kept in original order. Two matrices with
/// the same ids and seed select the same rows.
EmbeddingMatrix subsample_rows(const EmbeddingMatrix& e, std::size_t count, std::uint64_t seed);

struct ComparisonMatrix {
  std::vector<std::string> labels;
  Tensor values;
  std::string metric;

  /// Throws UsageError unless symmetric and (when asked) unit-diagonal.
  void validate(bool unit_diagonal, double tolerance = 1e-9) const;
};

/// Fills every ordered pair from `pair(i, j)`. Errors are re-raised with the
/// pair's labels prepended.
ComparisonMatrix comparison_matrix(const std::vector<std::string>& labels, const std::string& metric,
                                   const std::function<double(std::size_t, std::size_t)>& pair,
                                   bool unit_diagonal);

ComparisonMatrix cka_matrix(const std::vector<std::string>& labels,
                            const std::vector<EmbeddingMatrix>& embeddings);

ComparisonMatrix jaccard_matrix(const std::vector<std::string>& labels,
                                const std::vector<std::vector<RecommendationList>>& lists,
                                std::size_t k);

/// Mean Jaccard@k for every unordered pair and every k in [k_min, k_max].
struct JaccardSweep {
  std::vector<std::string> pairs;  // "a|b"
  std::vector<std::size_t> ks;
  std::vector<std::vector<double>> values;  // [k][pair]

  std::vector<double> mean_curve() const;
};

JaccardSweep jaccard_sweep(const std::vector<std::string>& labels,
                           const std::vector<std::vector<RecommendationList>>& lists,
                           std::size_t k_min, std::size_t k_max);

struct Merge {
  std::size_t a = 0;  // cluster ids: leaves 0..n-1, merges n, n+1, ...
  std::size_t b = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::vector<std::string> labels;
  std::vector<Merge> merges;
};

/// Average-linkage agglomeration on distances 1 - s. Ties go to the pair
/// whose smallest leaf indices come first.
Dendrogram hierarchical_cluster(const ComparisonMatrix& m);

void write_comparison_csv(const ComparisonMatrix& m, std::ostream& out);
ComparisonMatrix read_comparison_csv(std::istream& in, const std::string& metric = "");
void write_dendrogram(const Dendrogram& d, std::ostream& out);
void write_jaccard_sweep_csv(const JaccardSweep& sweep, std::ostream& out);

}  // namespace newsrec
