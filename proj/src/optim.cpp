#include "newsrec/optim.hpp"

#include <cmath>

#include "newsrec/error.hpp"

namespace newsrec {

void adam_step(std::span<Parameter* const> params, const AdamOptions& options) {
  for (const Parameter* p : params) {
    if (!p->has_grad) {
      throw UsageError("adam_step: parameter '" + p->name + "' has no gradient");
    }
  }
  for (Parameter* p : params) {
    p->step_count += 1;
    const double t = static_cast<double>(p->step_count);
    const double correct1 = 1.0 - std::pow(options.beta1, t);
    const double correct2 = 1.0 - std::pow(options.beta2, t);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      double& m = p->adam_m[i];
      double& v = p->adam_v[i];
      m = options.beta1 * m + (1.0 - options.beta1) * g;
      v = options.beta2 * v + (1.0 - options.beta2) * g * g;
      const double m_hat = m / correct1;
      const double v_hat = v / correct2;
      p->value[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
    p->clear_grad();
  }
}

}  // namespace newsrec
