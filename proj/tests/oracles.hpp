// Scalar-loop reference implementations used only by tests. Nothing here
// touches the tape or the library's metric code.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "newsrec/rng.hpp"
#include "newsrec/tensor.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Mat random_mat(newsrec::Rng& rng, std::size_t r, std::size_t c,
                      double lo = -1.0, double hi = 1.0) {
  Mat m(r, Vec(c));
  for (auto& row : m)
    for (double& v : row) v = rng.uniform(lo, hi);
  return m;
}

inline Vec random_vec(newsrec::Rng& rng, std::size_t n, double lo = -1.0,
                      double hi = 1.0) {
  Vec v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline newsrec::Tensor to_tensor(const Mat& m) {
  std::vector<double> data;
  for (const auto& row : m) data.insert(data.end(), row.begin(), row.end());
  return newsrec::Tensor::matrix(m.size(), m.empty() ? 0 : m[0].size(), data);
}

inline newsrec::Tensor to_tensor(const Vec& v) { return newsrec::Tensor::vector(v); }

inline Mat to_mat(const newsrec::Tensor& t) {
  Mat m(t.rows(), Vec(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.size(), Vec(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t p = 0; p < b.size(); ++p) c[i][j] += a[i][p] * b[p][j];
  return c;
}

inline Mat transpose(const Mat& a) {
  Mat t(a[0].size(), Vec(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline Vec vecmat(const Vec& v, const Mat& m) {
  Vec out(m[0].size(), 0.0);
  for (std::size_t j = 0; j < out.size(); ++j)
    for (std::size_t p = 0; p < v.size(); ++p) out[j] += v[p] * m[p][j];
  return out;
}

inline Vec softmax(const Vec& x, const std::vector<bool>& mask) {
  Vec out(x.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (mask[i]) total += std::exp(x[i]);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (mask[i]) out[i] = std::exp(x[i]) / total;
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// kernels[j][c][o]
using Kernel = std::vector<Mat>;

inline Mat conv1d_same(const Mat& seq, const Kernel& k, const Vec& bias) {
  const int len = static_cast<int>(seq.size());
  const int w = static_cast<int>(k.size());
  const int pad = (w - 1) / 2;
  Mat out(seq.size(), bias);
  for (int t = 0; t < len; ++t)
    for (int j = 0; j < w; ++j) {
      const int src = t + j - pad;
      if (src < 0 || src >= len) continue;
      for (std::size_t c = 0; c < seq[0].size(); ++c)
        for (std::size_t o = 0; o < bias.size(); ++o)
          out[t][o] += seq[src][c] * k[j][c][o];
    }
  return out;
}

struct Pool {
  Vec pooled;
  Vec weights;
};

inline Pool additive_attention(const Mat& seq, const std::vector<bool>& mask,
                               const Mat& w, const Vec& b, const Vec& q,
                               const Vec* context_term = nullptr) {
  Vec logits(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    double a = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
      double pre = b[k] + (context_term ? (*context_term)[k] : 0.0);
      for (std::size_t c = 0; c < seq[i].size(); ++c) pre += seq[i][c] * w[c][k];
      a += q[k] * std::tanh(pre);
    }
    logits[i] = a;
  }
  Pool out{Vec(seq[0].size(), 0.0), softmax(logits, mask)};
  for (std::size_t i = 0; i < seq.size(); ++i)
    for (std::size_t c = 0; c < seq[i].size(); ++c)
      out.pooled[c] += out.weights[i] * seq[i][c];
  return out;
}

inline Mat mhsa(const Mat& seq, const std::vector<bool>& mask, const Mat& wq,
                const Mat& wk, const Mat& wv, std::size_t heads) {
  const std::size_t len = seq.size();
  const std::size_t out_dim = wq[0].size();
  const std::size_t dh = out_dim / heads;
  Mat q = matmul(seq, wq), k = matmul(seq, wk), v = matmul(seq, wv);
  Mat out(len, Vec(out_dim, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < len; ++i) {
      if (!mask[i]) continue;
      Vec scores(len, 0.0);
      for (std::size_t j = 0; j < len; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += q[i][h * dh + c] * k[j][h * dh + c];
        scores[j] = s / std::sqrt(static_cast<double>(dh));
      }
      Vec p = softmax(scores, mask);
      for (std::size_t j = 0; j < len; ++j)
        for (std::size_t c = 0; c < dh; ++c) out[i][h * dh + c] += p[j] * v[j][h * dh + c];
    }
  }
  return out;
}

struct GruWeights {
  Mat wz, wr, wh, uz, ur, uh;
  Vec bz, br, bh;
};

struct GruResult {
  Mat states;
  Vec last;
};

inline GruResult gru(const Mat& seq, const std::vector<bool>& mask, const GruWeights& g,
                     const Vec& h0) {
  Vec h = h0;
  GruResult out;
  const std::size_t d = h0.size();
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (mask[t]) {
      Vec next(d);
      Vec rh(d);
      Vec z(d), r(d);
      for (std::size_t o = 0; o < d; ++o) {
        double az = g.bz[o], ar = g.br[o];
        for (std::size_t c = 0; c < seq[t].size(); ++c) {
          az += seq[t][c] * g.wz[c][o];
          ar += seq[t][c] * g.wr[c][o];
        }
        for (std::size_t c = 0; c < d; ++c) {
          az += h[c] * g.uz[c][o];
          ar += h[c] * g.ur[c][o];
        }
        z[o] = sigmoid(az);
        r[o] = sigmoid(ar);
      }
      for (std::size_t c = 0; c < d; ++c) rh[c] = r[c] * h[c];
      for (std::size_t o = 0; o < d; ++o) {
        double ac = g.bh[o];
        for (std::size_t c = 0; c < seq[t].size(); ++c) ac += seq[t][c] * g.wh[c][o];
        for (std::size_t c = 0; c < d; ++c) ac += rh[c] * g.uh[c][o];
        next[o] = (1.0 - z[o]) * std::tanh(ac) + z[o] * h[o];
      }
      h = next;
    }
    out.states.push_back(h);
  }
  out.last = h;
  return out;
}

// Adam written straight from the published update rule.
struct AdamState {
  double m = 0.0, v = 0.0;
  int t = 0;
};

inline double adam_update(double x, double g, AdamState& s, double lr, double b1,
                          double b2, double eps) {
  s.t += 1;
  s.m = b1 * s.m + (1 - b1) * g;
  s.v = b2 * s.v + (1 - b2) * g * g;
  double mh = s.m / (1 - std::pow(b1, s.t));
  double vh = s.v / (1 - std::pow(b2, s.t));
  return x - lr * mh / (std::sqrt(vh) + eps);
}

// nDCG by definition: enumerate positions, compare with the best ordering.
inline double ndcg(const std::vector<int>& ranked, std::size_t k) {
  auto dcg = [k](const std::vector<int>& labels) {
    double s = 0.0;
    for (std::size_t i = 0; i < labels.size() && i < k; ++i)
      if (labels[i]) s += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return s;
  };
  std::vector<int> ideal = ranked;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  return dcg(ranked) / dcg(ideal);
}

inline double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b,
                      std::size_t k) {
  std::set<std::string> sa(a.begin(), a.begin() + static_cast<long>(std::min(k, a.size())));
  std::set<std::string> sb(b.begin(), b.begin() + static_cast<long>(std::min(k, b.size())));
  std::size_t inter = 0;
  for (const auto& x : sa) inter += sb.count(x);
  std::set<std::string> uni = sa;
  uni.insert(sb.begin(), sb.end());
  return static_cast<double>(inter) / static_cast<double>(uni.size());
}

// sum_{ijkl} S_ij H_jk S'_kl H_li / (n-1)^2 written as an explicit double sum
// over the centered kernel entries.
inline double hsic(const Mat& s, const Mat& s2) {
  const std::size_t n = s.size();
  Mat h(n, Vec(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) h[i][j] = (i == j ? 1.0 : 0.0) - 1.0 / n;
  Mat a = matmul(matmul(h, s), h);
  Mat b = matmul(matmul(h, s2), h);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) total += a[i][j] * b[j][i];
  return total / static_cast<double>((n - 1) * (n - 1));
}

inline Mat center_columns(const Mat& e) {
  Mat c = e;
  for (std::size_t j = 0; j < e[0].size(); ++j) {
    double mean = 0.0;
    for (const auto& row : e) mean += row[j];
    mean /= static_cast<double>(e.size());
    for (auto& row : c) row[j] -= mean;
  }
  return c;
}

// Feature-space linear CKA: ||Y^T X||_F^2 / (||X^T X||_F ||Y^T Y||_F).
inline double cka_feature_space(const Mat& e1, const Mat& e2) {
  Mat x = center_columns(e1), y = center_columns(e2);
  auto fro2 = [](const Mat& m) {
    double s = 0.0;
    for (const auto& r : m)
      for (double v : r) s += v * v;
    return s;
  };
  double num = fro2(matmul(transpose(y), x));
  double den = std::sqrt(fro2(matmul(transpose(x), x))) *
               std::sqrt(fro2(matmul(transpose(y), y)));
  return num / den;
}

struct MergeStep {
  std::size_t a, b;
  double height;
};

// Average linkage recomputed from the original distances at every step.
inline std::vector<MergeStep> average_linkage(const Mat& similarity) {
  const std::size_t n = similarity.size();
  std::vector<std::vector<std::size_t>> members(n);
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    members[i] = {i};
    ids[i] = i;
  }
  std::size_t next = n;
  std::vector<MergeStep> out;
  while (members.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        double total = 0.0;
        for (std::size_t p : members[i])
          for (std::size_t q : members[j]) total += 1.0 - similarity[p][q];
        double avg = total / static_cast<double>(members[i].size() * members[j].size());
        if (avg < best) {
          best = avg;
          bi = i;
          bj = j;
        }
      }
    std::size_t a = std::min(ids[bi], ids[bj]), b = std::max(ids[bi], ids[bj]);
    out.push_back({a, b, best});
    std::vector<std::size_t> merged = members[bi];
    merged.insert(merged.end(), members[bj].begin(), members[bj].end());
    members.erase(members.begin() + static_cast<long>(bj));
    ids.erase(ids.begin() + static_cast<long>(bj));
    members[bi] = merged;
    ids[bi] = next++;
  }
  return out;
}

}  // namespace oracle
