#include "robust1d/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "robust1d/errors.hpp"
#include "robust1d/rng.hpp"

namespace robust1d {

namespace {

double evaluate(const TapeFunction& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.constant(p));
  const Var loss = f(tape, vars);
  if (loss.value().size() != 1) throw ContractViolation("grad_check: function must return a scalar");
  return loss.value()[0];
}

}  // namespace

GradCheckResult grad_check(const TapeFunction& f, std::vector<Tensor> params, double h,
                           GradCheckSampling sampling) {
  if (!(h > 0.0)) throw ContractViolation("grad_check: step h must be positive");
  GradCheckResult result;

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& p : params) vars.push_back(tape.leaf(p));
    const Var loss = f(tape, vars);
    tape.backward(loss);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      auto g = tape.grad(vars[pi]);
      std::vector<double> dense(params[pi].size(), 0.0);
      std::copy(g.begin(), g.end(), dense.begin());
      if (!std::all_of(dense.begin(), dense.end(), [](double v) { return std::isfinite(v); })) {
        result.finite = false;
        result.worst_param = pi;
        result.failure = "non-finite analytic gradient for parameter " + std::to_string(pi);
        return result;
      }
      analytic.push_back(std::move(dense));
    }
  }

  Rng rng(sampling.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    std::vector<std::size_t> entries = rng.permutation(params[pi].size());
    if (sampling.max_entries_per_param && entries.size() > sampling.max_entries_per_param) {
      entries.resize(sampling.max_entries_per_param);
    }
    std::sort(entries.begin(), entries.end());
    for (std::size_t i : entries) {
      const double original = params[pi][i];
      params[pi][i] = original + h;
      const double up = evaluate(f, params);
      params[pi][i] = original - h;
      const double down = evaluate(f, params);
      params[pi][i] = original;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        result.finite = false;
        result.worst_param = pi;
        result.worst_index = i;
        result.failure = "non-finite loss while probing parameter " + std::to_string(pi) + " entry " +
                         std::to_string(i);
        return result;
      }
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[pi][i] - numeric) / std::max(1.0, std::abs(numeric));
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = pi;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace robust1d
