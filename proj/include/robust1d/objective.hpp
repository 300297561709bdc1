#pragma once

#include <functional>

#include "robust1d/losses.hpp"
#include "robust1d/model.hpp"

namespace robust1d {

/// A scalar loss evaluated on a forward pass. Attacks ascend it with respect
/// to the input.
using AttackLoss = std::function<Var(Tape&, const ForwardResult&, losses::Labels)>;

/// The objective the model was trained with. `centers` is borrowed and must
/// outlive the returned function; it may be null for losses without centers.
AttackLoss trained_objective(const LossConfig& config, const Tensor* centers);

/// Plain cross-entropy on the logits.
AttackLoss cross_entropy_objective();

}  // namespace robust1d
