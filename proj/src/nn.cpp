#include "newsrec/nn.hpp"

#include <cmath>

#include "newsrec/error.hpp"

namespace newsrec {

Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

Linear Linear::create(ParameterStore& store, const std::string& name,
                      std::size_t in, std::size_t out, Rng& rng, bool with_bias) {
  Linear layer;
  layer.weight = &store.add(name + ".weight", fan_in_uniform({in, out}, in, rng));
  if (with_bias) layer.bias = &store.add(name + ".bias", Tensor(Shape{out}));
  return layer;
}

Var linear(Tape& tape, const Linear& layer, Var x) {
  Var y = matmul(x, tape.parameter(*layer.weight));
  if (layer.bias) y = add_bias(y, tape.parameter(*layer.bias));
  return y;
}

AdditiveAttention AdditiveAttention::create(ParameterStore& store,
                                            const std::string& name, std::size_t dim,
                                            std::size_t query_dim, Rng& rng,
                                            std::size_t context_dim) {
  AdditiveAttention att;
  att.projection =
      &store.add(name + ".projection", fan_in_uniform({dim, query_dim}, dim, rng));
  att.bias = &store.add(name + ".bias", Tensor(Shape{query_dim}));
  att.query = &store.add(name + ".query", fan_in_uniform({query_dim}, query_dim, rng));
  if (context_dim > 0) {
    att.context = &store.add(name + ".context",
                             fan_in_uniform({context_dim, query_dim}, context_dim, rng));
  }
  return att;
}

AttentionPool additive_attention_pool(Tape& tape, const AdditiveAttention& att,
                                      Var seq, const Mask& mask,
                                      std::optional<Var> context) {
  if (seq.value().rank() != 2 || seq.value().rows() != mask.size()) {
    throw DimensionError("additive attention over " + to_string(seq.shape()) +
                         " with mask of length " + std::to_string(mask.size()));
  }
  Var bias = tape.parameter(*att.bias);
  if (context) {
    if (!att.context) {
      throw ConfigError("additive attention has no candidate projection");
    }
    bias = add(bias, matmul(*context, tape.parameter(*att.context)));
  }
  Var hidden = tanh(add_bias(matmul(seq, tape.parameter(*att.projection)), bias));
  const std::size_t len = mask.size();
  Var logits = reshape(matmul(hidden, reshape(tape.parameter(*att.query),
                                              {att.query->value.size(), 1})),
                       {len});
  Var weights = softmax_masked(logits, mask);
  Var pooled = matmul(weights, seq);
  return {pooled, weights};
}

Conv1d Conv1d::create(ParameterStore& store, const std::string& name,
                      std::size_t window, std::size_t in, std::size_t out, Rng& rng) {
  if (window % 2 == 0) {
    throw ConfigError("convolution window must be odd, got " + std::to_string(window));
  }
  Conv1d conv;
  conv.kernels = &store.add(name + ".kernels",
                            fan_in_uniform({window, in, out}, window * in, rng));
  conv.bias = &store.add(name + ".bias", Tensor(Shape{out}));
  return conv;
}

Var conv1d_same(Tape& tape, const Conv1d& conv, Var seq) {
  const Shape& ks = conv.kernels->value.shape();
  const std::size_t window = ks[0];
  if (seq.value().rank() != 2 || seq.value().cols() != ks[1]) {
    throw DimensionError("conv1d_same: input " + to_string(seq.shape()) +
                         " against kernels " + to_string(ks));
  }
  Var cols = im2col_same(seq, window);
  Var kernel = reshape(tape.parameter(*conv.kernels), {window * ks[1], ks[2]});
  return add_bias(matmul(cols, kernel), tape.parameter(*conv.bias));
}

MultiHeadSelfAttention MultiHeadSelfAttention::create(ParameterStore& store,
                                                      const std::string& name,
                                                      std::size_t in, std::size_t out,
                                                      std::size_t heads, Rng& rng) {
  if (heads == 0 || out % heads != 0) {
    throw ConfigError("attention width " + std::to_string(out) +
                      " is not divisible by " + std::to_string(heads) + " heads");
  }
  MultiHeadSelfAttention mhsa;
  mhsa.query = &store.add(name + ".query", fan_in_uniform({in, out}, in, rng));
  mhsa.key = &store.add(name + ".key", fan_in_uniform({in, out}, in, rng));
  mhsa.value = &store.add(name + ".value", fan_in_uniform({in, out}, in, rng));
  mhsa.heads = heads;
  return mhsa;
}

Var multi_head_self_attention(Tape& tape, const MultiHeadSelfAttention& mhsa,
                              Var seq, const Mask& mask) {
  const std::size_t out = mhsa.out_dim();
  if (mhsa.heads == 0 || out % mhsa.heads != 0) {
    throw ConfigError("attention width " + std::to_string(out) +
                      " is not divisible by " + std::to_string(mhsa.heads) + " heads");
  }
  if (seq.value().rank() != 2 || seq.value().rows() != mask.size()) {
    throw DimensionError("self-attention over " + to_string(seq.shape()) +
                         " with mask of length " + std::to_string(mask.size()));
  }
  const std::size_t head_dim = out / mhsa.heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Var q = matmul(seq, tape.parameter(*mhsa.query));
  Var k = matmul(seq, tape.parameter(*mhsa.key));
  Var v = matmul(seq, tape.parameter(*mhsa.value));
  std::vector<Var> heads;
  heads.reserve(mhsa.heads);
  for (std::size_t h = 0; h < mhsa.heads; ++h) {
    const std::size_t lo = h * head_dim;
    const std::size_t hi = lo + head_dim;
    Var scores = scale(matmul(slice_cols(q, lo, hi), transpose(slice_cols(k, lo, hi))),
                       inv_scale);
    heads.push_back(matmul(softmax_masked(scores, mask), slice_cols(v, lo, hi)));
  }
  Var joined = heads.size() == 1 ? heads[0] : concat(heads);
  return mask_rows(joined, mask);
}

Gru Gru::create(ParameterStore& store, const std::string& name, std::size_t in,
                std::size_t hidden, Rng& rng) {
  Gru g;
  g.input_update = &store.add(name + ".input_update", fan_in_uniform({in, hidden}, in, rng));
  g.input_reset = &store.add(name + ".input_reset", fan_in_uniform({in, hidden}, in, rng));
  g.input_cand = &store.add(name + ".input_candidate", fan_in_uniform({in, hidden}, in, rng));
  g.state_update =
      &store.add(name + ".state_update", fan_in_uniform({hidden, hidden}, hidden, rng));
  g.state_reset =
      &store.add(name + ".state_reset", fan_in_uniform({hidden, hidden}, hidden, rng));
  g.state_cand =
      &store.add(name + ".state_candidate", fan_in_uniform({hidden, hidden}, hidden, rng));
  g.bias_update = &store.add(name + ".bias_update", Tensor(Shape{hidden}));
  g.bias_reset = &store.add(name + ".bias_reset", Tensor(Shape{hidden}));
  g.bias_cand = &store.add(name + ".bias_candidate", Tensor(Shape{hidden}));
  return g;
}

GruOutput gru_forward(Tape& tape, const Gru& gru, Var seq, const Mask& mask, Var h0) {
  const std::size_t hidden = gru.hidden_dim();
  if (h0.value().rank() != 1 || h0.value().size() != hidden) {
    throw DimensionError("gru_forward: initial state " + to_string(h0.shape()) +
                         " for hidden size " + std::to_string(hidden));
  }
  const std::size_t len = mask.size();
  std::vector<Var> states;
  states.reserve(len);
  Var h = h0;
  if (len > 0) {
    if (seq.value().rank() != 2 || seq.value().rows() != len ||
        seq.value().cols() != gru.input_update->value.rows()) {
      throw DimensionError("gru_forward: input " + to_string(seq.shape()) +
                           " with mask of length " + std::to_string(len));
    }
    Var xz = matmul(seq, tape.parameter(*gru.input_update));
    Var xr = matmul(seq, tape.parameter(*gru.input_reset));
    Var xc = matmul(seq, tape.parameter(*gru.input_cand));
    Var uz = tape.parameter(*gru.state_update);
    Var ur = tape.parameter(*gru.state_reset);
    Var uc = tape.parameter(*gru.state_cand);
    Var bz = tape.parameter(*gru.bias_update);
    Var br = tape.parameter(*gru.bias_reset);
    Var bc = tape.parameter(*gru.bias_cand);
    for (std::size_t t = 0; t < len; ++t) {
      if (mask[t]) {
        Var z = sigmoid(add(add(row(xz, t), matmul(h, uz)), bz));
        Var r = sigmoid(add(add(row(xr, t), matmul(h, ur)), br));
        Var c = tanh(add(add(row(xc, t), matmul(mul(r, h), uc)), bc));
        h = add(mul(affine(z, -1.0, 1.0), c), mul(z, h));
      }
      states.push_back(h);
    }
  }
  Var stacked = states.empty() ? tape.constant(Tensor(Shape{0, hidden}))
                               : stack_rows(states);
  return {stacked, h};
}

}  // namespace newsrec
