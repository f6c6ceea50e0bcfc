#include "ehrgmtl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ehrgmtl {

double finite_diff_check(const TensorFn& f, const TensorPtr& x, double step) {
  if (step <= 0.0)
    throw ContractError("finite_diff_check: step must be positive");

  std::vector<double> analytic;
  {
    Tape tape;
    TensorPtr loss = f(tape);
    if (loss->numel() != 1)
      throw ContractError("finite_diff_check: f must be scalar-valued, got shape " +
                          shape_str(loss->shape));
    x->zero_grad();
    tape.backward(loss);
    analytic = x->grad;  // zeros-sized even if x is unreachable
  }

  double max_disc = 0.0;
  for (size_t i = 0; i < x->values.size(); ++i) {
    const double saved = x->values[i];
    x->values[i] = saved + step;
    double fp;
    {
      Tape tape;
      fp = f(tape)->scalar();
    }
    x->values[i] = saved - step;
    double fm;
    {
      Tape tape;
      fm = f(tape)->scalar();
    }
    x->values[i] = saved;

    const double fd = (fp - fm) / (2.0 * step);
    const double a = analytic.empty() ? 0.0 : analytic[i];
    const double disc = std::abs(a - fd) / std::max(1e-8, std::abs(fd));
    max_disc = std::max(max_disc, disc);
  }
  return max_disc;
}

}  // namespace ehrgmtl
