#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "robust1d/continuous_attacks.hpp"
#include "robust1d/keyvalue.hpp"
#include "robust1d/losses.hpp"
#include "robust1d/optimizer.hpp"
#include "robust1d/text_attacks.hpp"

namespace robust1d {

enum class Profile { Full, Tiny };
std::string to_string(Profile p);
Profile parse_profile(const std::string& s);

/// One attack, written as "fgsm:eps=8/255", "pgd:eps=0.1,steps=10,alpha=0.025"
/// or "text:score=r1s,transform=substitute,budget=30".
struct AttackSpec {
  enum class Kind { Continuous, Text };
  Kind kind = Kind::Continuous;
  ContinuousAttackSpec continuous;
  DiscreteAttackSpec text;
  /// Seed given explicitly in the spec; otherwise the experiment seed is used.
  bool seeded = false;

  /// Throws ContractViolation for unknown names, keys or values.
  static AttackSpec parse(const std::string& spec);
  /// Canonical text; parse(id()) == *this.
  std::string id() const;
  /// Perturbation budget: epsilon or the word budget.
  double epsilon() const;
  void set_seed(std::uint64_t seed);
};

struct ExperimentConfig {
  /// Dataset manifest path.
  std::string manifest;
  Profile profile = Profile::Tiny;
  LossConfig loss;
  /// 0 selects the profile default (100 full, 10 tiny).
  std::size_t epochs = 0;
  /// 0 selects the profile default (128 full, 32 tiny).
  std::size_t batch_size = 0;
  /// 0 selects the profile default (1014 full, 128 tiny). Text only.
  std::size_t length = 0;
  OptimizerSettings optimizer;
  std::vector<AttackSpec> attacks;
  /// Present when training augments batches with adversarial counterparts.
  std::optional<AttackSpec> training_attack;
  /// Adversarial rows per clean row in each augmented batch.
  double adversarial_ratio = 1.0;
  /// Attacks ascend the trained loss; otherwise plain cross-entropy.
  bool adaptive_attacks = true;
  /// Evaluated test samples; 0 evaluates the whole test split.
  std::size_t subsample = 500;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  /// The config file text, echoed into reports.
  std::string source;

  std::size_t resolved_epochs() const;
  std::size_t resolved_batch_size() const;
  std::size_t resolved_length() const;

  /// Reads [data] manifest, [model] profile/length, [loss] kind/margin/
  /// variant/center_weight, [train] epochs/batch_size/learning_rate/optimizer/
  /// adversarial_attack/adversarial_ratio, [eval] attacks/subsample/adaptive,
  /// and top-level seed/output. Unknown keys are errors.
  static ExperimentConfig from_keyvalue(const KeyValueFile& kv);
  static ExperimentConfig load(const std::string& path);
  void validate() const;
};

}  // namespace robust1d
