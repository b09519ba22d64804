#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "newsrec/autodiff.hpp"

namespace newsrec {

struct ParameterCheck {
  std::string name;
  std::size_t entries_checked = 0;
  double max_relative_error = 0.0;
};

struct GradientCheckReport {
  std::vector<ParameterCheck> parameters;
  double tolerance = 0.0;

  double max_relative_error() const;
  bool passed() const { return max_relative_error() < tolerance; }
};

struct GradientCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-3;
  /// Entries compared per parameter; smaller parameters are checked fully.
  std::size_t samples_per_parameter = 100;
  /// Denominator floor of the relative error, so entries whose true
  /// gradient is zero are judged on absolute error.
  double floor = 1e-6;
  std::uint64_t seed = 7;
};

/// Builds a scalar from the parameters on a fresh tape. Must be pure.
using Fragment = std::function<Var(Tape&)>;

/// Compares backpropagated gradients against central differences.
GradientCheckReport gradient_check(const Fragment& fragment,
                                   std::span<Parameter* const> params,
                                   const GradientCheckOptions& options = {});

}  // namespace newsrec
