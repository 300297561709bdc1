#pragma once

#include <cstddef>

#include "robust1d/rng.hpp"
#include "robust1d/tape.hpp"

// Differentiable primitives. Binary elementwise ops require identical shapes.
// Signals for conv1d/maxpool1d are [channels, length] or
// [batch, channels, length].

namespace robust1d::ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// max(x, 0); the subgradient at 0 is 0.
Var relu(Var a);
/// -1, 0 or 1; zero gradient everywhere.
Var sign(Var a);
/// Gradient passes inside [lo, hi] and is zero outside.
Var clip(Var a, double lo, double hi);

/// Sum of all elements, as a shape-[1] scalar.
Var sum(Var a);
Var mean(Var a);

/// [m x k] * [k x n]
Var matmul(Var a, Var b);
/// [m x k] * [n x k]^T, used for linear layers storing weights as [out x in].
Var matmul_nt(Var a, Var b);
/// Adds bias[n] to every row of a [rows x n] matrix.
Var add_row_bias(Var a, Var bias);
/// Adds bias[C] along the channel axis of a [C x L] or [B x C x L] signal.
Var add_channel_bias(Var a, Var bias);

/// Swaps the last two axes of a rank-2 or rank-3 tensor.
Var transpose(Var a);
Var reshape(Var a, Shape shape);

/// Valid cross-correlation with kernel [Cout x Cin x K].
Var conv1d(Var x, Var kernel, std::size_t stride = 1);
/// Ties route the gradient to the lowest index of the window.
Var maxpool1d(Var x, std::size_t size, std::size_t stride);

/// Inverted dropout; identity when rate is 0.
Var dropout(Var a, double rate, Rng& rng);

}  // namespace robust1d::ops
