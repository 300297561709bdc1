#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "robust1d/rng.hpp"
#include "robust1d/tape.hpp"

namespace robust1d::testing_util {

// Central-difference gradient of a scalar function of tensors. Independent of
// the library's grad_check so that each can be used to validate the other.
inline std::vector<std::vector<double>> numeric_gradient(
    const std::function<double(const std::vector<Tensor>&)>& f, std::vector<Tensor> params, double h = 1e-5) {
  std::vector<std::vector<double>> out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    std::vector<double> g(params[p].size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double orig = params[p][i];
      params[p][i] = orig + h;
      const double up = f(params);
      params[p][i] = orig - h;
      const double down = f(params);
      params[p][i] = orig;
      g[i] = (up - down) / (2 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

/// Max relative error between reverse-mode and central differences for a
/// tape-building function.
inline double tape_vs_numeric(const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                              const std::vector<Tensor>& params, double h = 1e-5) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& p : params) vars.push_back(tape.leaf(p));
  const Var loss = build(tape, vars);
  tape.backward(loss);
  auto eval = [&](const std::vector<Tensor>& ps) {
    Tape t;
    std::vector<Var> vs;
    for (const Tensor& p : ps) vs.push_back(t.constant(p));
    return build(t, vs).value()[0];
  };
  const auto numeric = numeric_gradient(eval, params, h);
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto g = tape.grad(vars[p]);
    for (std::size_t i = 0; i < numeric[p].size(); ++i) {
      const double a = g.empty() ? 0.0 : g[i];
      worst = std::max(worst, std::abs(a - numeric[p][i]) / std::max(1.0, std::abs(numeric[p][i])));
    }
  }
  return worst;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

/// Values bounded away from zero by `gap`, for probing piecewise ops.
inline Tensor random_away_from_zero(Shape shape, Rng& rng, double gap) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) {
    const double mag = rng.uniform(gap, 1.0);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

}  // namespace robust1d::testing_util
