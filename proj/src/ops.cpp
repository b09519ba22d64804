#include "newsrec/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "newsrec/error.hpp"

namespace newsrec {
namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) {
    throw UsageError(std::string(op) + ": operands live on different tapes");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + to_string(a.shape()) +
                         " and " + to_string(b.shape()) + " differ");
  }
}

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m x k] += A[m x n] * B[k x n]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
      c[i * k + p] += acc;
    }
  }
}

// C[k x n] += A[m x k]^T * B[m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

template <typename Forward, typename Derivative>
Var unary(Var a, Forward forward, Derivative derivative) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  const int in = a.id();
  return a.tape().record(std::move(y), {in},
                         [in, derivative](Tape& t, int self) {
                           const Tensor& x = t.value(in);
                           const Tensor& y = t.value(self);
                           const Tensor& g = t.grad(self);
                           Tensor& gx = t.grad(in);
                           for (std::size_t i = 0; i < x.size(); ++i) {
                             gx[i] += g[i] * derivative(x[i], y[i]);
                           }
                         });
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rank() != 2 || av.rank() < 1 || av.rank() > 2 ||
      av.cols() != bv.rows()) {
    throw DimensionError("matmul: cannot multiply " + to_string(av.shape()) +
                         " by " + to_string(bv.shape()));
  }
  const std::size_t m = av.rank() == 1 ? 1 : av.rows();
  const std::size_t k = av.cols();
  const std::size_t n = bv.cols();
  Tensor c(av.rank() == 1 ? Shape{n} : Shape{m, n});
  gemm_nn(av.values().data(), bv.values().data(), c.values().data(), m, k, n);
  const int ia = a.id();
  const int ib = b.id();
  return a.tape().record(
      std::move(c), {ia, ib}, [ia, ib, m, k, n](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.needs_grad(ia)) {
          gemm_nt(g.values().data(), t.value(ib).values().data(),
                  t.grad(ia).values().data(), m, n, k);
        }
        if (t.needs_grad(ib)) {
          gemm_tn(t.value(ia).values().data(), g.values().data(),
                  t.grad(ib).values().data(), m, k, n);
        }
      });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  if (x.rank() != 2) {
    throw DimensionError("transpose needs a matrix, got " + to_string(x.shape()));
  }
  const std::size_t r = x.rows();
  const std::size_t c = x.cols();
  Tensor y(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y.at(j, i) = x.at(i, j);
  const int in = a.id();
  return a.tape().record(std::move(y), {in}, [in, r, c](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(in);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
  });
}

Var reshape(Var a, Shape shape) {
  Tensor y = a.value().reshaped(std::move(shape));
  const int in = a.id();
  return a.tape().record(std::move(y), {in}, [in](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(in);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const int ia = a.id();
  const int ib = b.id();
  return a.tape().record(std::move(y), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    for (int in : {ia, ib}) {
      if (!t.needs_grad(in)) continue;
      Tensor& gx = t.grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const int ia = a.id();
  const int ib = b.id();
  return a.tape().record(std::move(y), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const int ia = a.id();
  const int ib = b.id();
  return a.tape().record(std::move(y), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      const Tensor& bv = t.value(ib);
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.needs_grad(ib)) {
      const Tensor& av = t.value(ia);
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var add_bias(Var a, Var bias) {
  require_same_tape(a, bias, "add_bias");
  const Tensor& x = a.value();
  const Tensor& b = bias.value();
  if (b.rank() != 1 || x.rank() < 1 || x.rank() > 2 || x.cols() != b.size()) {
    throw DimensionError("add_bias: cannot broadcast " + to_string(b.shape()) +
                         " over " + to_string(x.shape()));
  }
  Tensor y = x;
  const std::size_t n = b.size();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i % n];
  const int ia = a.id();
  const int ib = bias.id();
  return a.tape().record(std::move(y), {ia, ib}, [ia, ib, n](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
    }
  });
}

Var scale(Var a, double factor) { return affine(a, factor, 0.0); }

Var affine(Var a, double alpha, double beta) {
  return unary(
      a, [alpha, beta](double x) { return alpha * x + beta; },
      [alpha](double, double) { return alpha; });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x < 0.0 ? 0.0 : x; },  // NaN passes through
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const int in = a.id();
  return a.tape().record(Tensor::scalar(total), {in}, [in](Tape& t, int self) {
    const double g = t.grad(self)[0];
    for (double& v : t.grad(in).values()) v += g;
  });
}

Var dot(Var a, Var b) {
  require_same_tape(a, b, "dot");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.size() != bv.size()) {
    throw DimensionError("dot: shapes " + to_string(av.shape()) + " and " +
                         to_string(bv.shape()) + " differ in size");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) total += av[i] * bv[i];
  const int ia = a.id();
  const int ib = b.id();
  return a.tape().record(
      Tensor::scalar(total), {ia, ib}, [ia, ib](Tape& t, int self) {
        const double g = t.grad(self)[0];
        if (t.needs_grad(ia)) {
          const Tensor& bv = t.value(ib);
          Tensor& ga = t.grad(ia);
          for (std::size_t i = 0; i < bv.size(); ++i) ga[i] += g * bv[i];
        }
        if (t.needs_grad(ib)) {
          const Tensor& av = t.value(ia);
          Tensor& gb = t.grad(ib);
          for (std::size_t i = 0; i < av.size(); ++i) gb[i] += g * av[i];
        }
      });
}

Var softmax_masked(Var logits, const Mask& mask) {
  const Tensor& x = logits.value();
  const std::size_t width = x.rank() == 0 ? 1 : x.shape().back();
  if (mask.size() != width) {
    throw DimensionError("softmax_masked: mask of length " +
                         std::to_string(mask.size()) + " for logits " +
                         to_string(x.shape()));
  }
  if (std::none_of(mask.begin(), mask.end(), [](bool m) { return m; })) {
    throw DegenerateInputError("softmax_masked: every position is masked");
  }
  Tensor y(x.shape());
  const std::size_t rows = width == 0 ? 0 : x.size() / width;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.values().data() + r * width;
    double* yr = y.values().data() + r * width;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < width; ++j)
      if (mask[j]) peak = std::max(peak, xr[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      yr[j] = mask[j] ? std::exp(xr[j] - peak) : 0.0;
      total += yr[j];
    }
    for (std::size_t j = 0; j < width; ++j) yr[j] /= total;
  }
  const int in = logits.id();
  return logits.tape().record(
      std::move(y), {in}, [in, rows, width](Tape& t, int self) {
        const Tensor& y = t.value(self);
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(in);
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t base = r * width;
          double inner = 0.0;
          for (std::size_t j = 0; j < width; ++j)
            inner += y[base + j] * g[base + j];
          for (std::size_t j = 0; j < width; ++j)
            gx[base + j] += y[base + j] * (g[base + j] - inner);
        }
      });
}

Var row(Var a, std::size_t index) {
  const Tensor& x = a.value();
  if (x.rank() != 2 || index >= x.rows()) {
    throw DimensionError("row " + std::to_string(index) + " of " +
                         to_string(x.shape()));
  }
  const std::size_t c = x.cols();
  auto r = x.row(index);
  Tensor y(Shape{c}, std::vector<double>(r.begin(), r.end()));
  const int in = a.id();
  return a.tape().record(std::move(y), {in}, [in, index, c](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(in);
    for (std::size_t j = 0; j < c; ++j) gx[index * c + j] += g[j];
  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  const std::size_t d = rows[0].value().size();
  std::vector<double> data;
  data.reserve(rows.size() * d);
  std::vector<int> inputs;
  for (const Var& r : rows) {
    require_same_tape(rows[0], r, "stack_rows");
    if (r.value().rank() != 1 || r.value().size() != d) {
      throw DimensionError("stack_rows: row of shape " + to_string(r.shape()) +
                           ", expected [" + std::to_string(d) + "]");
    }
    data.insert(data.end(), r.value().values().begin(), r.value().values().end());
    inputs.push_back(r.id());
  }
  Tensor y(Shape{rows.size(), d}, std::move(data));
  auto ids = inputs;
  return rows[0].tape().record(
      std::move(y), std::move(inputs), [ids, d](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        for (std::size_t r = 0; r < ids.size(); ++r) {
          if (!t.needs_grad(ids[r])) continue;
          Tensor& gx = t.grad(ids[r]);
          for (std::size_t j = 0; j < d; ++j) gx[j] += g[r * d + j];
        }
      });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  std::vector<int> inputs;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p, "concat");
    inputs.push_back(p.id());
  }
  const bool matrices = parts[0].value().rank() == 2;
  if (!matrices) {
    std::vector<double> data;
    std::vector<std::size_t> offsets;
    for (const Var& p : parts) {
      if (p.value().rank() > 1) {
        throw DimensionError("concat: mixed ranks, got " + to_string(p.shape()));
      }
      offsets.push_back(data.size());
      data.insert(data.end(), p.value().values().begin(), p.value().values().end());
    }
    Tensor y = Tensor::vector(std::move(data));
    auto ids = inputs;
    return parts[0].tape().record(
        std::move(y), std::move(inputs), [ids, offsets](Tape& t, int self) {
          const Tensor& g = t.grad(self);
          for (std::size_t p = 0; p < ids.size(); ++p) {
            if (!t.needs_grad(ids[p])) continue;
            Tensor& gx = t.grad(ids[p]);
            for (std::size_t j = 0; j < gx.size(); ++j) gx[j] += g[offsets[p] + j];
          }
        });
  }
  const std::size_t rows = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.value().rank() != 2 || p.value().rows() != rows) {
      throw DimensionError("concat: part of shape " + to_string(p.shape()) +
                           " does not have " + std::to_string(rows) + " rows");
    }
    widths.push_back(p.value().cols());
    total += p.value().cols();
  }
  Tensor y(Shape{rows, total});
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& x = parts[p].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < widths[p]; ++j)
        y.at(r, offset + j) = x.at(r, j);
    offset += widths[p];
  }
  auto ids = inputs;
  return parts[0].tape().record(
      std::move(y), std::move(inputs),
      [ids, widths, rows, total](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        std::size_t offset = 0;
        for (std::size_t p = 0; p < ids.size(); ++p) {
          if (t.needs_grad(ids[p])) {
            Tensor& gx = t.grad(ids[p]);
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t j = 0; j < widths[p]; ++j)
                gx[r * widths[p] + j] += g[r * total + offset + j];
          }
          offset += widths[p];
        }
      });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  if (x.rank() != 2 || begin > end || end > x.cols()) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") of " + to_string(x.shape()));
  }
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  const std::size_t w = end - begin;
  Tensor y(Shape{rows, w});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < w; ++j) y.at(r, j) = x.at(r, begin + j);
  const int in = a.id();
  return a.tape().record(
      std::move(y), {in}, [in, rows, cols, begin, w](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(in);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < w; ++j)
            gx[r * cols + begin + j] += g[r * w + j];
      });
}

Var gather_rows(Var table, std::span<const std::int32_t> indices) {
  const Tensor& x = table.value();
  if (x.rank() != 2) {
    throw DimensionError("gather_rows needs a matrix, got " + to_string(x.shape()));
  }
  const std::size_t d = x.cols();
  Tensor y(Shape{indices.size(), d});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] < 0 || static_cast<std::size_t>(indices[r]) >= x.rows()) {
      throw DataError("index " + std::to_string(indices[r]) +
                      " outside table of " + std::to_string(x.rows()) + " rows");
    }
    auto src = x.row(static_cast<std::size_t>(indices[r]));
    std::copy(src.begin(), src.end(), y.row(r).begin());
  }
  const int in = table.id();
  std::vector<std::int32_t> idx(indices.begin(), indices.end());
  return table.tape().record(std::move(y), {in}, [in, idx, d](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(in);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < d; ++j)
        gx[static_cast<std::size_t>(idx[r]) * d + j] += g[r * d + j];
  });
}

Var mask_rows(Var a, const Mask& mask) {
  const Tensor& x = a.value();
  if (x.rank() != 2 || mask.size() != x.rows()) {
    throw DimensionError("mask_rows: mask of length " + std::to_string(mask.size()) +
                         " for " + to_string(x.shape()));
  }
  Tensor y = x;
  for (std::size_t r = 0; r < mask.size(); ++r)
    if (!mask[r])
      for (double& v : y.row(r)) v = 0.0;
  const int in = a.id();
  return a.tape().record(std::move(y), {in}, [in, mask](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(in);
    const std::size_t c = g.cols();
    for (std::size_t r = 0; r < mask.size(); ++r)
      if (mask[r])
        for (std::size_t j = 0; j < c; ++j) gx[r * c + j] += g[r * c + j];
  });
}

Var masked_mean_rows(Var a, const Mask& mask) {
  const Tensor& x = a.value();
  if (x.rank() != 2 || mask.size() != x.rows()) {
    throw DimensionError("masked_mean_rows: mask of length " +
                         std::to_string(mask.size()) + " for " +
                         to_string(x.shape()));
  }
  const auto count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (count == 0) throw DegenerateInputError("masked_mean_rows: every row is masked");
  const std::size_t c = x.cols();
  Tensor y(Shape{c});
  for (std::size_t r = 0; r < mask.size(); ++r)
    if (mask[r])
      for (std::size_t j = 0; j < c; ++j) y[j] += x.at(r, j);
  for (double& v : y.values()) v /= static_cast<double>(count);
  const int in = a.id();
  return a.tape().record(
      std::move(y), {in}, [in, mask, count, c](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(in);
        const double inv = 1.0 / static_cast<double>(count);
        for (std::size_t r = 0; r < mask.size(); ++r)
          if (mask[r])
            for (std::size_t j = 0; j < c; ++j) gx[r * c + j] += g[j] * inv;
      });
}

Var im2col_same(Var seq, std::size_t window) {
  const Tensor& x = seq.value();
  if (x.rank() != 2) {
    throw DimensionError("im2col_same needs [L x d], got " + to_string(x.shape()));
  }
  if (window % 2 == 0) {
    throw ConfigError("convolution window must be odd, got " + std::to_string(window));
  }
  const std::size_t len = x.rows();
  const std::size_t d = x.cols();
  const auto pad = static_cast<std::ptrdiff_t>((window - 1) / 2);
  Tensor y(Shape{len, window * d});
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t j = 0; j < window; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      auto from = x.row(static_cast<std::size_t>(src));
      std::copy(from.begin(), from.end(), y.row(t).begin() + static_cast<std::ptrdiff_t>(j * d));
    }
  }
  const int in = seq.id();
  return seq.tape().record(
      std::move(y), {in}, [in, len, d, window, pad](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(in);
        for (std::size_t t = 0; t < len; ++t) {
          for (std::size_t j = 0; j < window; ++j) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - pad;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
            for (std::size_t c = 0; c < d; ++c) {
              gx[static_cast<std::size_t>(src) * d + c] +=
                  g[t * window * d + j * d + c];
            }
          }
        }
      });
}

Var cross_entropy(Var scores, std::size_t target) {
  const Tensor& s = scores.value();
  if (s.rank() != 1 || target >= s.size()) {
    throw DimensionError("cross_entropy: target " + std::to_string(target) +
                         " for scores " + to_string(s.shape()));
  }
  const double peak = *std::max_element(s.values().begin(), s.values().end());
  double total = 0.0;
  for (double v : s.values()) total += std::exp(v - peak);
  const double log_norm = peak + std::log(total);
  const int in = scores.id();
  return scores.tape().record(
      Tensor::scalar(log_norm - s[target]), {in},
      [in, target, log_norm](Tape& t, int self) {
        const double g = t.grad(self)[0];
        const Tensor& s = t.value(in);
        Tensor& gs = t.grad(in);
        for (std::size_t i = 0; i < s.size(); ++i) {
          const double p = std::exp(s[i] - log_norm);
          gs[i] += g * (p - (i == target ? 1.0 : 0.0));
        }
      });
}

}  // namespace newsrec
