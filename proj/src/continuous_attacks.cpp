#include "robust1d/continuous_attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>

#include "robust1d/errors.hpp"
#include "robust1d/format.hpp"

namespace robust1d {

void ContinuousAttackSpec::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ContractViolation("epsilon must be finite and >= 0");
  if (steps < 1) throw ContractViolation("attack needs at least one step");
  if (!(lower < upper)) throw ContractViolation("box bounds must satisfy lower < upper");
  if (step_size < 0.0 || (epsilon > 0.0 && alpha() > epsilon)) {
    throw ContractViolation("step size must lie in (0, epsilon]");
  }
}

std::string ContinuousAttackSpec::describe() const {
  if (kind == ContinuousAttackKind::Fgsm) return "fgsm:eps=" + format_double(epsilon);
  std::string s = "pgd:eps=" + format_double(epsilon) + ",steps=" + std::to_string(steps) +
                  ",alpha=" + format_double(alpha());
  if (random_start) s += ",random_start=1";
  return s;
}

std::size_t BatchAttackResult::successes() const { return static_cast<std::size_t>(std::count(success.begin(), success.end(), true)); }
std::size_t BatchAttackResult::failures() const { return static_cast<std::size_t>(std::count(failed.begin(), failed.end(), true)); }

namespace {

std::size_t row_size(const Tensor& x) { return x.size() / x.dim(0); }

void check_inputs(const Tensor& x, losses::Labels labels, double lower, double upper) {
  if (x.rank() < 2) throw ShapeError("attack input must be batched, got " + shape_string(x.shape()));
  if (labels.size() != x.dim(0)) throw ShapeError("attack needs one label per row");
  for (double v : x.data()) {
    if (!(v >= lower && v <= upper)) throw ContractViolation("attack input lies outside the box");
  }
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  Shape shape = x.shape();
  shape[0] = end - begin;
  const std::size_t rs = row_size(x);
  return Tensor(shape, std::vector<double>(x.data().begin() + static_cast<std::ptrdiff_t>(begin * rs),
                                           x.data().begin() + static_cast<std::ptrdiff_t>(end * rs)));
}

double sign(double g) { return g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0); }

}  // namespace

Tensor input_gradient(const Classifier& model, const AttackLoss& loss, const Tensor& x, losses::Labels labels,
                      std::vector<bool>& finite_rows) {
  Tape tape;
  const Var input = tape.leaf(x);
  const ForwardResult r = model.forward(tape, input);
  const Var value = loss(tape, r, labels);
  tape.backward(value);
  const auto g = tape.grad(input);
  Tensor out(x.shape(), std::vector<double>(g.begin(), g.end()));

  const std::size_t rs = row_size(x);
  finite_rows.assign(x.dim(0), true);
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    bool ok = true;
    for (std::size_t j = 0; ok && j < rs; ++j) ok = std::isfinite(out[i * rs + j]);
    finite_rows[i] = ok;
  }
  return out;
}

ContinuousAttackResult fgsm(const Classifier& model, const AttackLoss& loss, const Tensor& x, losses::Labels labels,
                            double epsilon, double lower, double upper) {
  ContinuousAttackSpec spec;
  spec.kind = ContinuousAttackKind::Fgsm;
  spec.epsilon = epsilon;
  spec.steps = 1;
  spec.step_size = epsilon;
  spec.lower = lower;
  spec.upper = upper;
  return pgd(model, loss, x, labels, spec);
}

ContinuousAttackResult pgd(const Classifier& model, const AttackLoss& loss, const Tensor& x, losses::Labels labels,
                           const ContinuousAttackSpec& spec, std::size_t first_index) {
  spec.validate();
  check_inputs(x, labels, spec.lower, spec.upper);
  const std::size_t rows = x.dim(0), rs = row_size(x);
  ContinuousAttackResult result{x, std::vector<bool>(rows, false)};
  if (spec.epsilon == 0.0) return result;

  Tensor& adv = result.adversarial;
  const double eps = spec.epsilon, alpha = spec.alpha();
  if (spec.random_start) {
    for (std::size_t i = 0; i < rows; ++i) {
      Rng rng(derive_seed(spec.seed, first_index + i));
      for (std::size_t j = i * rs; j < (i + 1) * rs; ++j) {
        adv[j] = std::clamp(x[j] + rng.uniform(-eps, eps), spec.lower, spec.upper);
      }
    }
  }

  std::vector<bool> finite;
  for (std::size_t step = 0; step < spec.steps; ++step) {
    const Tensor g = input_gradient(model, loss, adv, labels, finite);
    for (std::size_t i = 0; i < rows; ++i) {
      if (result.failed[i]) continue;
      if (!finite[i]) {
        result.failed[i] = true;
        std::copy(x.data().begin() + static_cast<std::ptrdiff_t>(i * rs),
                  x.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * rs),
                  adv.data().begin() + static_cast<std::ptrdiff_t>(i * rs));
        continue;
      }
      for (std::size_t j = i * rs; j < (i + 1) * rs; ++j) {
        const double stepped = std::clamp(adv[j] + alpha * sign(g[j]), spec.lower, spec.upper);
        adv[j] = std::clamp(stepped, x[j] - eps, x[j] + eps);
      }
    }
  }
  return result;
}

ContinuousAttackResult run_attack(const Classifier& model, const AttackLoss& loss, const Tensor& x,
                                  losses::Labels labels, const ContinuousAttackSpec& spec, std::size_t first_index) {
  if (spec.kind == ContinuousAttackKind::Fgsm) {
    spec.validate();
    return fgsm(model, loss, x, labels, spec.epsilon, spec.lower, spec.upper);
  }
  return pgd(model, loss, x, labels, spec, first_index);
}

BatchAttackResult batch_attack(const Classifier& model, const AttackLoss& loss, const Tensor& x,
                               losses::Labels labels, const ContinuousAttackSpec& spec) {
  spec.validate();
  check_inputs(x, labels, spec.lower, spec.upper);
  const std::size_t rows = x.dim(0), rs = row_size(x);
  BatchAttackResult out{x, std::vector<bool>(rows, false), std::vector<bool>(rows, false)};
  const std::size_t chunks = (rows + kAttackChunk - 1) / kAttackChunk;
  std::vector<ContinuousAttackResult> parts(chunks);
  std::vector<std::exception_ptr> errors(chunks);

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t cc = 0; cc < static_cast<std::int64_t>(chunks); ++cc) {
    const auto c = static_cast<std::size_t>(cc);
    const std::size_t begin = c * kAttackChunk, end = std::min(rows, begin + kAttackChunk);
    try {
      parts[c] = run_attack(model, loss, slice_rows(x, begin, end), labels.subspan(begin, end - begin), spec, begin);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = c * kAttackChunk;
    const Tensor& adv = parts[c].adversarial;
    std::copy(adv.data().begin(), adv.data().end(), out.adversarial.data().begin() + static_cast<std::ptrdiff_t>(begin * rs));
    for (std::size_t i = 0; i < adv.dim(0); ++i) out.failed[begin + i] = parts[c].failed[i];
  }
  const auto predicted = predict_classes(model, out.adversarial);
  for (std::size_t i = 0; i < rows; ++i) out.success[i] = predicted[i] != labels[i];
  return out;
}

}  // namespace robust1d
