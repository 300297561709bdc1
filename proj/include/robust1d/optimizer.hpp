#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "robust1d/tensor.hpp"

namespace robust1d {

enum class OptimizerKind { SgdMomentum, Adam };

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 0.001;
  /// Momentum for SGD, beta1 for Adam.
  double momentum = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Applies SGD-with-momentum or Adam updates. Moment buffers are bound to the
/// position of each parameter in the list passed to step().
class Optimizer {
 public:
  explicit Optimizer(OptimizerSettings settings);

  /// Updates every parameter from its gradient, then zeroes the gradients.
  void step(std::span<Tensor* const> params);

  const OptimizerSettings& settings() const { return settings_; }
  std::size_t steps_taken() const { return steps_; }

 private:
  OptimizerSettings settings_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::size_t steps_ = 0;
};

}  // namespace robust1d
