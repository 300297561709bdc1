#include "robust1d/objective.hpp"

#include "robust1d/errors.hpp"

namespace robust1d {

AttackLoss trained_objective(const LossConfig& config, const Tensor* centers) {
  config.validate();
  if (config.uses_centers() && centers == nullptr) {
    throw ContractViolation(to_string(config.kind) + " objective needs class centers");
  }
  return [config, centers](Tape& tape, const ForwardResult& r, losses::Labels labels) {
    const Var c = centers ? tape.constant_ref(*centers) : Var{};
    return losses::objective(config, r.features, r.logits, labels, c);
  };
}

AttackLoss cross_entropy_objective() {
  return [](Tape&, const ForwardResult& r, losses::Labels labels) { return losses::cross_entropy(r.logits, labels); };
}

}  // namespace robust1d
