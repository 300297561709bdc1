#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "robust1d/objective.hpp"

namespace robust1d {

enum class ContinuousAttackKind { Fgsm, Pgd };

struct ContinuousAttackSpec {
  ContinuousAttackKind kind = ContinuousAttackKind::Pgd;
  double epsilon = 8.0 / 255.0;
  std::size_t steps = 10;
  /// 0 selects epsilon / 4.
  double step_size = 0.0;
  /// Uniform start inside the epsilon ball, drawn per sample from `seed`.
  bool random_start = false;
  double lower = 0.0;
  double upper = 1.0;
  std::uint64_t seed = 0;

  double alpha() const { return step_size > 0.0 ? step_size : epsilon / 4.0; }
  /// epsilon = 0 is accepted as the no-op attack.
  void validate() const;
  /// e.g. "pgd:eps=0.0313725,steps=10,alpha=0.00784314"
  std::string describe() const;
};

struct ContinuousAttackResult {
  Tensor adversarial;
  /// Rows whose input gradient was non-finite; those rows are returned unchanged.
  std::vector<bool> failed;
};

/// Gradient of `loss` with respect to a batch of inputs. Rows containing a
/// non-finite entry are flagged in `finite_rows` (false).
Tensor input_gradient(const Classifier& model, const AttackLoss& loss, const Tensor& x, losses::Labels labels,
                      std::vector<bool>& finite_rows);

/// clip(x + epsilon * sign(grad), lower, upper)
ContinuousAttackResult fgsm(const Classifier& model, const AttackLoss& loss, const Tensor& x, losses::Labels labels,
                            double epsilon, double lower = 0.0, double upper = 1.0);

/// Iterated signed steps, each clipped to the box and projected onto the
/// epsilon ball around x. `first_index` is the dataset position of row 0 and
/// selects the per-sample random-start streams.
ContinuousAttackResult pgd(const Classifier& model, const AttackLoss& loss, const Tensor& x, losses::Labels labels,
                           const ContinuousAttackSpec& spec, std::size_t first_index = 0);

/// Dispatches on spec.kind.
ContinuousAttackResult run_attack(const Classifier& model, const AttackLoss& loss, const Tensor& x,
                                  losses::Labels labels, const ContinuousAttackSpec& spec,
                                  std::size_t first_index = 0);

struct BatchAttackResult {
  Tensor adversarial;
  /// Prediction on the adversarial row differs from the label.
  std::vector<bool> success;
  std::vector<bool> failed;

  std::size_t successes() const;
  std::size_t failures() const;
};

/// Attacks every row of x in fixed chunks of kAttackChunk rows, spread over
/// threads. Results depend only on the inputs and spec, not on thread count.
inline constexpr std::size_t kAttackChunk = 32;
BatchAttackResult batch_attack(const Classifier& model, const AttackLoss& loss, const Tensor& x,
                               losses::Labels labels, const ContinuousAttackSpec& spec);

}  // namespace robust1d
