#pragma once

#include "disamgnn/autograd.hpp"

#include <cstddef>
#include <vector>

namespace disamgnn {

struct AdamOptions {
  double lr = 1e-3;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam with weight decay folded into the gradient as an L2
/// term (g += weight_decay * theta).
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// Applies one update to `params` using their current `grad` arrays.
  /// Moment arrays are created on the first call; later calls throw
  /// std::invalid_argument if the parameter list or any shape changed.
  void step(std::vector<ad::Parameter>& params);

  std::size_t steps() const { return step_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  AdamOptions options_;
  std::size_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace disamgnn
