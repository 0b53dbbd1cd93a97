#pragma once

#include <functional>
#include <span>

#include "tddmn/tensor.hpp"

namespace tddmn {

// Compares tape gradients against central finite differences.
//
// `f` must rebuild the forward computation from the current values of
// `inputs` and return a scalar loss; it must be pure (no dropout, no RNG
// consumption) so that repeated evaluations are comparable. Returns the
// maximum over all coordinates of
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(const std::function<Tensor(Tape&)>& f, std::span<Tensor> inputs,
                  double eps = 1e-5);

}  // namespace tddmn
