#include "tddmn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace tddmn {

double grad_check(const std::function<Tensor(Tape&)>& f, std::span<Tensor> inputs, double eps) {
  if (eps <= 0.0) throw shape_error("grad_check: eps must be positive");

  for (Tensor& t : inputs) t.zero_grad();
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f(tape);
    tape.backward(loss);
    for (Tensor& t : inputs) analytic.push_back(t.grad());
  }

  const auto eval = [&]() {
    Tape tape(false);
    return f(tape).item();
  };

  double max_rel = 0.0;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor& t = inputs[ti];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + eps;
      const double hi = eval();
      t.data()[i] = saved - eps;
      const double lo = eval();
      t.data()[i] = saved;
      const double numeric = (hi - lo) / (2.0 * eps);
      const double a = analytic[ti][i];
      const double rel = std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace tddmn
