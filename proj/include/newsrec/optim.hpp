#pragma once

#include <span>

#include "newsrec/autodiff.hpp"

namespace newsrec {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update per parameter, then clears gradients.
/// Throws UsageError when a parameter has no populated gradient.
void adam_step(std::span<Parameter* const> params, const AdamOptions& options);

}  // namespace newsrec
