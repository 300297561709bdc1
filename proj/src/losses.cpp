#include "robust1d/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "robust1d/errors.hpp"
#include "robust1d/ops.hpp"
#include "robust1d/rng.hpp"

namespace robust1d {

ClassCenters::ClassCenters(std::size_t num_classes, std::size_t feature_dim, std::uint64_t seed)
    : matrix(Shape{num_classes, feature_dim}) {
  Rng rng(seed);
  for (double& v : matrix.data()) v = 0.1 * rng.normal();
}

void LossConfig::validate() const {
  if (!(margin >= 0.0)) throw ContractViolation("loss: margin must be >= 0");
  if (!(center_weight >= 0.0)) throw ContractViolation("loss: center weight must be >= 0");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::CrossEntropy: return "ce";
    case LossKind::Center: return "center";
    case LossKind::MarginalCE: return "marginal";
    case LossKind::MarginalContrastive: return "marginal-contrastive";
  }
  return "?";
}

std::string to_string(ContrastiveVariant variant) {
  return variant == ContrastiveVariant::SampleToCenter ? "eq4" : "eq6";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "ce") return LossKind::CrossEntropy;
  if (s == "center") return LossKind::Center;
  if (s == "marginal") return LossKind::MarginalCE;
  if (s == "marginal-contrastive") return LossKind::MarginalContrastive;
  throw ContractViolation("unknown loss '" + s + "'");
}

ContrastiveVariant parse_variant(const std::string& s) {
  if (s == "eq4") return ContrastiveVariant::SampleToCenter;
  if (s == "eq6") return ContrastiveVariant::CenterToCenter;
  throw ContractViolation("unknown contrastive variant '" + s + "'");
}

namespace losses {

namespace {

void check_logits(Var logits, Labels labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2) throw ShapeError("loss: logits must be [batch x classes], got " + shape_string(s));
  if (s[0] != labels.size()) {
    throw ShapeError("loss: " + std::to_string(labels.size()) + " labels for logits " + shape_string(s));
  }
  for (std::size_t y : labels) {
    if (y >= s[1]) throw ContractViolation("loss: label " + std::to_string(y) + " out of range");
  }
}

void check_features(Var features, Labels labels, Var centers) {
  const Shape& f = features.shape();
  const Shape& c = centers.shape();
  if (f.size() != 2 || c.size() != 2 || f[1] != c[1] || f[0] != labels.size()) {
    throw ShapeError("loss: features " + shape_string(f) + " incompatible with centers " + shape_string(c) +
                     " and " + std::to_string(labels.size()) + " labels");
  }
  for (std::size_t y : labels) {
    if (y >= c[0]) throw ContractViolation("loss: label " + std::to_string(y) + " out of range");
  }
}

double distance(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return std::sqrt(s);
}

// acc += scale * (a - b) / dist, skipped at dist = 0 (subgradient 0).
void add_unit(double* acc, const double* a, const double* b, std::size_t d, double dist, double scale) {
  if (dist == 0.0) return;
  const double f = scale / dist;
  for (std::size_t k = 0; k < d; ++k) acc[k] += f * (a[k] - b[k]);
}

}  // namespace

Var cross_entropy(Var logits, Labels labels) { return marginal_softmax(logits, labels, 0.0); }

Var marginal_softmax(Var logits, Labels labels, double margin) {
  if (!(margin >= 0.0)) throw ContractViolation("marginal softmax: margin must be >= 0");
  check_logits(logits, labels);
  const std::size_t batch = labels.size(), n = logits.shape()[1];
  const Tensor& z = logits.value();
  // Softmax of the margin-shifted logits, kept for the backward pass.
  std::vector<double> prob(batch * n);
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const double* row = z.data().data() + i * n;
    double* p = prob.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) p[j] = row[j] - (j == labels[i] ? margin : 0.0);
    const double mx = *std::max_element(p, p + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      p[j] = std::exp(p[j] - mx);
      s += p[j];
    }
    for (std::size_t j = 0; j < n; ++j) p[j] /= s;
    total += mx + std::log(s) - (row[labels[i]] - margin);
  }
  std::vector<std::size_t> ys(labels.begin(), labels.end());
  return logits.tape->record(
      Tensor::scalar(total / static_cast<double>(batch)), {logits},
      [logits, ys = std::move(ys), prob = std::move(prob), n](Tape& t, std::span<const double> g) {
        auto gz = t.grad_buffer(logits.id);
        const double scale = g[0] / static_cast<double>(ys.size());
        for (std::size_t i = 0; i < ys.size(); ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            gz[i * n + j] += scale * (prob[i * n + j] - (j == ys[i] ? 1.0 : 0.0));
          }
        }
      });
}

Var center(Var features, Labels labels, Var centers) {
  check_features(features, labels, centers);
  const std::size_t batch = labels.size(), d = features.shape()[1];
  const double* f = features.value().data().data();
  const double* c = centers.value().data().data();
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const double dist = distance(f + i * d, c + labels[i] * d, d);
    total += dist * dist;
  }
  std::vector<std::size_t> ys(labels.begin(), labels.end());
  return features.tape->record(
      Tensor::scalar(total / static_cast<double>(batch)), {features, centers},
      [features, centers, ys = std::move(ys), d](Tape& t, std::span<const double> g) {
        const double* f = t.value(features).data().data();
        const double* c = t.value(centers).data().data();
        const double scale = 2.0 * g[0] / static_cast<double>(ys.size());
        const bool want_f = t.requires_grad(features), want_c = t.requires_grad(centers);
        double* gf = want_f ? t.grad_buffer(features.id).data() : nullptr;
        double* gc = want_c ? t.grad_buffer(centers.id).data() : nullptr;
        for (std::size_t i = 0; i < ys.size(); ++i) {
          for (std::size_t k = 0; k < d; ++k) {
            const double diff = scale * (f[i * d + k] - c[ys[i] * d + k]);
            if (gf) gf[i * d + k] += diff;
            if (gc) gc[ys[i] * d + k] -= diff;
          }
        }
      });
}

Var contrastive(Var features, Labels labels, Var centers, ContrastiveVariant variant,
                ContrastiveNormalizer normalizer) {
  check_features(features, labels, centers);
  const std::size_t batch = labels.size(), d = features.shape()[1], n = centers.shape()[0];
  if (n < 2) throw ContractViolation("contrastive loss needs at least two classes");
  const double* x = features.value().data().data();
  const double* c = centers.value().data().data();

  // Per-sample numerator and denominator, reused by the backward pass.
  std::vector<double> num(batch), den(batch);
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t y = labels[i];
    num[i] = distance(x + i * d, c + y * d, d);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == y) continue;
      s += variant == ContrastiveVariant::SampleToCenter ? distance(x + i * d, c + j * d, d)
                                                         : distance(c + y * d, c + j * d, d);
    }
    if (variant == ContrastiveVariant::SampleToCenter) {
      den[i] = 1.0 + s;
    } else {
      if (!(s > 1e-12)) throw NumericError("contrastive loss: class centers coincide (division guard)");
      den[i] = s;
    }
    total += num[i] / den[i];
  }
  const double k = normalizer == ContrastiveNormalizer::BatchSize ? static_cast<double>(batch)
                                                                    : static_cast<double>(n);
  std::vector<std::size_t> ys(labels.begin(), labels.end());
  return features.tape->record(
      Tensor::scalar(total / k), {features, centers},
      [features, centers, variant, ys = std::move(ys), num = std::move(num), den = std::move(den), d, n,
       k](Tape& t, std::span<const double> g) {
        const double* x = t.value(features).data().data();
        const double* c = t.value(centers).data().data();
        const bool want_x = t.requires_grad(features), want_c = t.requires_grad(centers);
        double* gx = want_x ? t.grad_buffer(features.id).data() : nullptr;
        double* gc = want_c ? t.grad_buffer(centers.id).data() : nullptr;
        std::vector<double> scratch_x(d), scratch_c(n * d);
        for (std::size_t i = 0; i < ys.size(); ++i) {
          const std::size_t y = ys[i];
          const double* xi = x + i * d;
          const double* cy = c + y * d;
          const double s = g[0] / k;
          const double inv = s / den[i];
          const double ratio = s * num[i] / (den[i] * den[i]);
          std::fill(scratch_x.begin(), scratch_x.end(), 0.0);
          std::fill(scratch_c.begin(), scratch_c.end(), 0.0);
          // numerator |x_i - c_y|
          add_unit(scratch_x.data(), xi, cy, d, num[i], inv);
          add_unit(scratch_c.data() + y * d, xi, cy, d, num[i], -inv);
          // denominator terms, entering with -N/D^2
          for (std::size_t j = 0; j < n; ++j) {
            if (j == y) continue;
            const double* cj = c + j * d;
            if (variant == ContrastiveVariant::SampleToCenter) {
              const double dist = distance(xi, cj, d);
              add_unit(scratch_x.data(), xi, cj, d, dist, -ratio);
              add_unit(scratch_c.data() + j * d, xi, cj, d, dist, ratio);
            } else {
              const double dist = distance(cy, cj, d);
              add_unit(scratch_c.data() + y * d, cy, cj, d, dist, -ratio);
              add_unit(scratch_c.data() + j * d, cy, cj, d, dist, ratio);
            }
          }
          if (gx) {
            for (std::size_t q = 0; q < d; ++q) gx[i * d + q] += scratch_x[q];
          }
          if (gc) {
            for (std::size_t q = 0; q < n * d; ++q) gc[q] += scratch_c[q];
          }
        }
      });
}

Var marginal_contrastive(Var features, Var logits, Labels labels, Var centers, const LossConfig& config) {
  return ops::add(marginal_softmax(logits, labels, config.margin),
                  contrastive(features, labels, centers, config.variant, config.normalizer));
}

Var objective(const LossConfig& config, Var features, Var logits, Labels labels, Var centers) {
  switch (config.kind) {
    case LossKind::CrossEntropy: return cross_entropy(logits, labels);
    case LossKind::Center:
      return ops::add(cross_entropy(logits, labels),
                      ops::scale(center(features, labels, centers), config.center_weight));
    case LossKind::MarginalCE: return marginal_softmax(logits, labels, config.margin);
    case LossKind::MarginalContrastive: return marginal_contrastive(features, logits, labels, centers, config);
  }
  throw ContractViolation("unknown loss kind");
}

}  // namespace losses

}  // namespace robust1d
