#pragma once

#include <optional>
#include <string>

#include "newsrec/autodiff.hpp"
#include "newsrec/ops.hpp"
#include "newsrec/rng.hpp"

namespace newsrec {

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights.
Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng);

struct Linear {
  Parameter* weight = nullptr;  // [in x out]
  Parameter* bias = nullptr;    // [out], optional

  static Linear create(ParameterStore& store, const std::string& name,
                       std::size_t in, std::size_t out, Rng& rng,
                       bool with_bias = true);
  std::size_t in_dim() const { return weight->value.rows(); }
  std::size_t out_dim() const { return weight->value.cols(); }
};

Var linear(Tape& tape, const Linear& layer, Var x);

/// Additive attention a_i = q^T tanh(W h_i + b [+ V c]).
struct AdditiveAttention {
  Parameter* projection = nullptr;  // W [d x d_q]
  Parameter* bias = nullptr;        // b [d_q]
  Parameter* query = nullptr;       // q [d_q]
  Parameter* context = nullptr;     // V [d_c x d_q], candidate-aware only

  static AdditiveAttention create(ParameterStore& store, const std::string& name,
                                  std::size_t dim, std::size_t query_dim, Rng& rng,
                                  std::size_t context_dim = 0);
};

struct AttentionPool {
  Var pooled;   // [d]
  Var weights;  // [L]
};

AttentionPool additive_attention_pool(Tape& tape, const AdditiveAttention& att,
                                      Var seq, const Mask& mask,
                                      std::optional<Var> context = std::nullopt);

struct Conv1d {
  Parameter* kernels = nullptr;  // [w x d_in x d_out]
  Parameter* bias = nullptr;     // [d_out]

  static Conv1d create(ParameterStore& store, const std::string& name,
                       std::size_t window, std::size_t in, std::size_t out, Rng& rng);
  std::size_t window() const { return kernels->value.extent(0); }
};

/// Same-length 1-D convolution with (w-1)/2 zeros on each side; no activation.
Var conv1d_same(Tape& tape, const Conv1d& conv, Var seq);

struct MultiHeadSelfAttention {
  Parameter* query = nullptr;  // [d_in x d_out]
  Parameter* key = nullptr;
  Parameter* value = nullptr;
  std::size_t heads = 1;

  static MultiHeadSelfAttention create(ParameterStore& store, const std::string& name,
                                       std::size_t in, std::size_t out,
                                       std::size_t heads, Rng& rng);
  std::size_t out_dim() const { return query->value.cols(); }
};

/// Scaled dot-product attention per head over unmasked keys; head outputs
/// are concatenated and masked query rows come out as zero vectors.
Var multi_head_self_attention(Tape& tape, const MultiHeadSelfAttention& mhsa,
                              Var seq, const Mask& mask);

struct Gru {
  Parameter* input_update = nullptr;  // W_z [d_in x d_h]
  Parameter* input_reset = nullptr;   // W_r
  Parameter* input_cand = nullptr;    // W_h
  Parameter* state_update = nullptr;  // U_z [d_h x d_h]
  Parameter* state_reset = nullptr;   // U_r
  Parameter* state_cand = nullptr;    // U_h
  Parameter* bias_update = nullptr;   // [d_h]
  Parameter* bias_reset = nullptr;
  Parameter* bias_cand = nullptr;

  static Gru create(ParameterStore& store, const std::string& name, std::size_t in,
                    std::size_t hidden, Rng& rng);
  std::size_t hidden_dim() const { return state_update->value.rows(); }
};

struct GruOutput {
  Var states;  // [L x d_h]
  Var last;    // [d_h]
};

/// z = sig(x W_z + h U_z + b_z), r = sig(x W_r + h U_r + b_r),
/// c = tanh(x W_h + (r * h) U_h + b_h), h' = (1 - z) * c + z * h.
/// Masked steps carry the previous state forward.
GruOutput gru_forward(Tape& tape, const Gru& gru, Var seq, const Mask& mask, Var h0);

}  // namespace newsrec
