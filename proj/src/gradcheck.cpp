#include "newsrec/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "newsrec/rng.hpp"

namespace newsrec {

double GradientCheckReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& p : parameters) worst = std::max(worst, p.max_relative_error);
  return worst;
}

GradientCheckReport gradient_check(const Fragment& fragment,
                                   std::span<Parameter* const> params,
                                   const GradientCheckOptions& options) {
  for (Parameter* p : params) p->clear_grad();
  {
    Tape tape;
    Var loss = fragment(tape);
    tape.backward(loss);
  }
  auto evaluate = [&fragment] {
    Tape tape;
    return fragment(tape).value().item();
  };

  GradientCheckReport report;
  report.tolerance = options.tolerance;
  Rng rng(options.seed);
  for (Parameter* p : params) {
    ParameterCheck check{p->name, 0, 0.0};
    std::vector<std::size_t> entries(p->value.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (entries.size() > options.samples_per_parameter) {
      std::shuffle(entries.begin(), entries.end(), rng.engine());
      entries.resize(options.samples_per_parameter);
    }
    for (std::size_t i : entries) {
      const double original = p->value[i];
      p->value[i] = original + options.step;
      const double plus = evaluate();
      p->value[i] = original - options.step;
      const double minus = evaluate();
      p->value[i] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double analytic = p->grad[i];
      const double denom =
          std::max({std::abs(numeric), std::abs(analytic), options.floor});
      check.max_relative_error =
          std::max(check.max_relative_error, std::abs(numeric - analytic) / denom);
      ++check.entries_checked;
    }
    report.parameters.push_back(check);
  }
  for (Parameter* p : params) p->clear_grad();
  return report;
}

}  // namespace newsrec
