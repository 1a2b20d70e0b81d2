#include "disamgnn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace disamgnn {

void Adam::step(std::vector<ad::Parameter>& params) {
  if (m_.empty() && step_ == 0) {
    for (const auto& p : params) {
      m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  if (params.size() != m_.size()) throw std::invalid_argument("adam: parameter count changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (p.value.rows() != m_[i].rows() || p.value.cols() != m_[i].cols() ||
        p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw std::invalid_argument("adam: shape mismatch for parameter '" + p.name + "'");
    }
  }

  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(options_.beta1, t);
  const double bc2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    Matrix g = p.grad;
    if (options_.weight_decay != 0.0) g += options_.weight_decay * p.value;
    m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * g;
    v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * g.cwiseProduct(g);
    auto m_hat = m_[i].array() / bc1;
    auto v_hat = v_[i].array() / bc2;
    p.value.array() -= options_.lr * m_hat / (v_hat.sqrt() + options_.eps);
  }
}

}  // namespace disamgnn
