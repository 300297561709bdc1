#include "robust1d/optimizer.hpp"

#include <cmath>

#include "robust1d/errors.hpp"

namespace robust1d {

Optimizer::Optimizer(OptimizerSettings settings) : settings_(settings) {
  if (!(settings_.learning_rate > 0.0)) throw ContractViolation("optimizer: learning rate must be > 0");
  if (settings_.momentum < 0.0 || settings_.momentum >= 1.0) {
    throw ContractViolation("optimizer: momentum/beta1 must be in [0, 1)");
  }
  if (settings_.beta2 < 0.0 || settings_.beta2 >= 1.0) throw ContractViolation("optimizer: beta2 must be in [0, 1)");
}

void Optimizer::step(std::span<Tensor* const> params) {
  if (first_.empty()) {
    for (const Tensor* p : params) {
      first_.emplace_back(p->size(), 0.0);
      if (settings_.kind == OptimizerKind::Adam) second_.emplace_back(p->size(), 0.0);
    }
  }
  if (first_.size() != params.size()) throw ContractViolation("optimizer: parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->has_grad()) {
      throw ContractViolation("optimizer: parameter " + std::to_string(i) + " has no gradient");
    }
    if (first_[i].size() != params[i]->size()) throw ContractViolation("optimizer: moment buffer shape mismatch");
  }

  ++steps_;
  const double lr = settings_.learning_rate;
  const double b1 = settings_.momentum;
  if (settings_.kind == OptimizerKind::SgdMomentum) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto w = params[i]->data();
      auto g = params[i]->grad();
      auto& vel = first_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        vel[j] = b1 * vel[j] + g[j];
        w[j] -= lr * vel[j];
      }
      params[i]->zero_grad();
    }
    return;
  }

  const double b2 = settings_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->data();
    auto g = params[i]->grad();
    auto& m = first_[i];
    auto& v = second_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + settings_.epsilon);
    }
    params[i]->zero_grad();
  }
}

}  // namespace robust1d
