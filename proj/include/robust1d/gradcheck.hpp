#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "robust1d/tape.hpp"

namespace robust1d {

/// Builds a scalar loss on the given tape from leaf variables for `params`.
/// Must be deterministic.
using TapeFunction = std::function<Var(Tape&, std::span<const Var> params)>;

struct GradCheckResult {
  /// max |analytic - central| / max(1, |central|) over every parameter entry.
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  bool finite = true;
  /// Set when a probe produced a non-finite loss or gradient.
  std::string failure;

  bool passed(double tolerance) const { return finite && max_rel_error <= tolerance; }
};

/// Limits probing to a seeded sample of entries per parameter tensor, for
/// models too large to probe exhaustively. 0 probes every entry.
struct GradCheckSampling {
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 0;
};

/// Compares reverse-mode gradients of f with central finite differences of
/// step h, probing one entry of one parameter at a time.
GradCheckResult grad_check(const TapeFunction& f, std::vector<Tensor> params, double h = 1e-5,
                           GradCheckSampling sampling = {});

}  // namespace robust1d
