#pragma once

#include <functional>

#include "ehrgmtl/tensor.hpp"

namespace ehrgmtl {

// Scalar-valued function rebuilt on a caller-provided tape. The harness
// calls it repeatedly while perturbing one tensor in place, so the function
// must read its inputs by reference on every call.
using TensorFn = std::function<TensorPtr(Tape&)>;

// Compares the analytic gradient of f with central finite differences at x.
// Returns max over components of
//   |analytic - central_difference| / max(1e-8, |central_difference|).
double finite_diff_check(const TensorFn& f, const TensorPtr& x, double step);

}  // namespace ehrgmtl
