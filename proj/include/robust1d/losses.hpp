#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "robust1d/tape.hpp"

namespace robust1d {

/// Learned per-class feature centers, [num_classes x feature_dim].
struct ClassCenters {
  Tensor matrix;
  bool trainable = true;

  ClassCenters() = default;
  ClassCenters(std::size_t num_classes, std::size_t feature_dim, std::uint64_t seed);

  std::size_t num_classes() const { return matrix.dim(0); }
  std::size_t feature_dim() const { return matrix.dim(1); }
};

/// Denominator of the contrastive ratio.
enum class ContrastiveVariant {
  /// 1 + sum over negative classes of |x_i - c_j|.
  SampleToCenter,
  /// sum over negative classes of |c_{y_i} - c_j|; no stabilizer.
  CenterToCenter,
};

/// What the contrastive term's 1/k prefactor divides by.
enum class ContrastiveNormalizer { BatchSize, ClassCount };

enum class LossKind { CrossEntropy, Center, MarginalCE, MarginalContrastive };

struct LossConfig {
  LossKind kind = LossKind::MarginalContrastive;
  double margin = 0.5;
  ContrastiveVariant variant = ContrastiveVariant::SampleToCenter;
  ContrastiveNormalizer normalizer = ContrastiveNormalizer::BatchSize;
  /// Weight of the center term for LossKind::Center.
  double center_weight = 0.01;

  bool uses_centers() const { return kind == LossKind::Center || kind == LossKind::MarginalContrastive; }
  void validate() const;
};

std::string to_string(LossKind kind);
std::string to_string(ContrastiveVariant variant);
LossKind parse_loss_kind(const std::string& s);
ContrastiveVariant parse_variant(const std::string& s);

namespace losses {

using Labels = std::span<const std::size_t>;

/// Mean over the batch of -log softmax(logits)[y].
Var cross_entropy(Var logits, Labels labels);

/// Cross-entropy with margin m subtracted from each true-class logit before
/// normalization. m = 0 is exactly cross_entropy.
Var marginal_softmax(Var logits, Labels labels, double margin);

/// (1/B) sum_i |f_i - c_{y_i}|^2
Var center(Var features, Labels labels, Var centers);

/// (1/k) sum_i |x_i - c_{y_i}| / denominator_i, with the denominator chosen
/// by `variant`. Needs at least two classes.
Var contrastive(Var features, Labels labels, Var centers, ContrastiveVariant variant,
                ContrastiveNormalizer normalizer = ContrastiveNormalizer::BatchSize);

/// marginal_softmax + contrastive, unweighted.
Var marginal_contrastive(Var features, Var logits, Labels labels, Var centers, const LossConfig& config);

/// The training objective selected by config. `centers` is ignored by losses
/// that do not use them.
Var objective(const LossConfig& config, Var features, Var logits, Labels labels, Var centers);

}  // namespace losses

}  // namespace robust1d
