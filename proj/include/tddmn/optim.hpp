#pragma once

#include <string>
#include <vector>

#include "tddmn/gru.hpp"
#include "tddmn/tensor.hpp"

namespace tddmn {

// Classic Adam with L2-style weight decay (decay is added to the gradient
// before the moment updates, not decoupled).
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

class AdamState {
 public:
  AdamState(std::vector<NamedTensor> params, AdamConfig config);

  // One update from the gradients currently stored on the parameters.
  // Throws if any tracked parameter has no populated gradient.
  void step();

  std::size_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }

 private:
  std::vector<NamedTensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig config_;
  std::size_t step_ = 0;
};

}  // namespace tddmn
