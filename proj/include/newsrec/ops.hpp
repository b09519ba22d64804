#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "newsrec/autodiff.hpp"

namespace newsrec {

/// Per-position validity flags; `true` marks a real (unpadded) entry.
using Mask = std::vector<bool>;

// Differentiable primitives. Each appends one node to the tape of its
// first argument. A rank-1 tensor acts as a single row wherever a matrix
// is expected.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, Shape shape);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Adds a length-n vector to every row of a [m x n] (or [n]) tensor.
Var add_bias(Var a, Var bias);
Var scale(Var a, double factor);
/// alpha * a + beta, element-wise.
Var affine(Var a, double alpha, double beta);

Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);

Var sum(Var a);
Var dot(Var a, Var b);

/// Row-wise softmax over the last axis; masked positions are exactly zero.
/// The mask is shared by every row. Throws DegenerateInputError when every
/// position is masked.
Var softmax_masked(Var logits, const Mask& mask);

Var row(Var a, std::size_t index);
Var stack_rows(std::span<const Var> rows);
/// Rank <= 1 parts are joined end to end; rank-2 parts side by side.
Var concat(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);

Var gather_rows(Var table, std::span<const std::int32_t> indices);
/// Zeroes the masked rows of a [L x d] tensor.
Var mask_rows(Var a, const Mask& mask);
/// Mean of the unmasked rows of a [L x d] tensor. Requires one unmasked row.
Var masked_mean_rows(Var a, const Mask& mask);

/// Unfolds [L x d] into [L x window*d]: row t holds positions
/// t-(window-1)/2 .. t+(window-1)/2, zero outside the sequence.
Var im2col_same(Var seq, std::size_t window);

/// -log softmax(scores)[target] for a rank-1 score vector.
Var cross_entropy(Var scores, std::size_t target);

}  // namespace newsrec
