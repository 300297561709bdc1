#include "robust1d/ops.hpp"

#include <algorithm>
#include <cmath>

#include "robust1d/errors.hpp"
#include "robust1d/kernels.hpp"

namespace robust1d::ops {

namespace {

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw ContractViolation("operands live on different tapes");
}

template <typename Fn>
Tensor map(const Tensor& a, Fn fn) {
  Tensor out(a.shape());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = fn(src[i]);
  return out;
}

struct Signal {
  std::size_t batch, channels, length;
};

Signal as_signal(const char* op, const Shape& s) {
  if (s.size() == 2) return {1, s[0], s[1]};
  if (s.size() == 3) return {s[0], s[1], s[2]};
  throw ShapeError(std::string(op) + ": expected [C x L] or [B x C x L], got " + shape_string(s));
}

Shape signal_shape(std::size_t rank, std::size_t b, std::size_t c, std::size_t l) {
  return rank == 2 ? Shape{c, l} : Shape{b, c, l};
}

}  // namespace

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("add", a, b);
  Tensor out(a.shape());
  auto x = a.value().data(), y = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    if (t.requires_grad(a)) {
      auto ga = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(b)) {
      auto gb = t.grad_buffer(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("sub", a, b);
  Tensor out(a.shape());
  auto x = a.value().data(), y = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    if (t.requires_grad(a)) {
      auto ga = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(b)) {
      auto gb = t.grad_buffer(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("mul", a, b);
  Tensor out(a.shape());
  auto x = a.value().data(), y = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    auto x = t.value(a).data(), y = t.value(b).data();
    if (t.requires_grad(a)) {
      auto ga = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    }
    if (t.requires_grad(b)) {
      auto gb = t.grad_buffer(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = map(a.value(), [factor](double v) { return v * factor; });
  return a.tape->record(std::move(out), {a}, [a, factor](Tape& t, std::span<const double> g) {
    auto ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var relu(Var a) {
  Tensor out = map(a.value(), [](double v) { return v > 0.0 ? v : 0.0; });
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::span<const double> g) {
    auto x = t.value(a).data();
    auto ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) ga[i] += g[i];
    }
  });
}

Var sign(Var a) {
  Tensor out = map(a.value(), [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); });
  return a.tape->record(std::move(out), {a}, [](Tape&, std::span<const double>) {});
}

Var clip(Var a, double lo, double hi) {
  if (lo > hi) throw ContractViolation("clip: lo must not exceed hi");
  Tensor out = map(a.value(), [lo, hi](double v) { return std::clamp(v, lo, hi); });
  return a.tape->record(std::move(out), {a}, [a, lo, hi](Tape& t, std::span<const double> g) {
    auto x = t.value(a).data();
    auto ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] >= lo && x[i] <= hi) ga[i] += g[i];
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape->record(Tensor::scalar(s), {a}, [a](Tape& t, std::span<const double> g) {
    auto ga = t.grad_buffer(a.id);
    for (double& v : ga) v += g[0];
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw ShapeError("matmul: cannot multiply " + shape_string(sa) + " by " + shape_string(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor out(Shape{m, n});
  kernels::mm_nn(a.value().data(), b.value().data(), out.data(), m, k, n);
  return a.tape->record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, std::span<const double> g) {
    if (t.requires_grad(a)) kernels::mm_nt(g, t.value(b).data(), t.grad_buffer(a.id), m, n, k);
    if (t.requires_grad(b)) kernels::mm_tn(t.value(a).data(), g, t.grad_buffer(b.id), k, m, n);
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[1]) {
    throw ShapeError("matmul_nt: cannot multiply " + shape_string(sa) + " by transpose of " + shape_string(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[0];
  Tensor out(Shape{m, n});
  kernels::mm_nt(a.value().data(), b.value().data(), out.data(), m, k, n);
  return a.tape->record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, std::span<const double> g) {
    if (t.requires_grad(a)) kernels::mm_nn(g, t.value(b).data(), t.grad_buffer(a.id), m, n, k);
    if (t.requires_grad(b)) kernels::mm_tn(g, t.value(a).data(), t.grad_buffer(b.id), n, m, k);
  });
}

Var add_row_bias(Var a, Var bias) {
  require_same_tape(a, bias);
  const Shape& s = a.shape();
  if (s.size() != 2 || bias.shape() != Shape{s[1]}) {
    throw ShapeError("add_row_bias: " + shape_string(s) + " with bias " + shape_string(bias.shape()));
  }
  const std::size_t rows = s[0], n = s[1];
  Tensor out = a.value();
  auto o = out.data();
  auto bv = bias.value().data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) o[r * n + j] += bv[j];
  return a.tape->record(std::move(out), {a, bias}, [a, bias, rows, n](Tape& t, std::span<const double> g) {
    if (t.requires_grad(a)) {
      auto ga = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(bias)) {
      auto gb = t.grad_buffer(bias.id);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
    }
  });
}

Var add_channel_bias(Var a, Var bias) {
  require_same_tape(a, bias);
  const Signal sig = as_signal("add_channel_bias", a.shape());
  if (bias.shape() != Shape{sig.channels}) {
    throw ShapeError("add_channel_bias: " + shape_string(a.shape()) + " with bias " + shape_string(bias.shape()));
  }
  Tensor out = a.value();
  auto o = out.data();
  auto bv = bias.value().data();
  for (std::size_t b = 0; b < sig.batch; ++b)
    for (std::size_t c = 0; c < sig.channels; ++c) {
      double* row = o.data() + (b * sig.channels + c) * sig.length;
      for (std::size_t l = 0; l < sig.length; ++l) row[l] += bv[c];
    }
  return a.tape->record(std::move(out), {a, bias}, [a, bias, sig](Tape& t, std::span<const double> g) {
    if (t.requires_grad(a)) {
      auto ga = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(bias)) {
      auto gb = t.grad_buffer(bias.id);
      for (std::size_t b = 0; b < sig.batch; ++b)
        for (std::size_t c = 0; c < sig.channels; ++c) {
          const double* row = g.data() + (b * sig.channels + c) * sig.length;
          double s = 0.0;
          for (std::size_t l = 0; l < sig.length; ++l) s += row[l];
          gb[c] += s;
        }
    }
  });
}

Var transpose(Var a) {
  const Shape& s = a.shape();
  if (s.size() != 2 && s.size() != 3) throw ShapeError("transpose: expected rank 2 or 3, got " + shape_string(s));
  const std::size_t batch = s.size() == 3 ? s[0] : 1;
  const std::size_t r = s[s.size() - 2], c = s[s.size() - 1];
  Shape out_shape = s;
  std::swap(out_shape[s.size() - 2], out_shape[s.size() - 1]);
  Tensor out(out_shape);
  auto x = a.value().data();
  auto o = out.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) o[b * r * c + j * r + i] = x[b * r * c + i * c + j];
  return a.tape->record(std::move(out), {a}, [a, batch, r, c](Tape& t, std::span<const double> g) {
    auto ga = t.grad_buffer(a.id);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[b * r * c + i * c + j] += g[b * r * c + j * r + i];
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::span<const double> g) {
    auto ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var conv1d(Var x, Var kernel, std::size_t stride) {
  require_same_tape(x, kernel);
  const Signal sig = as_signal("conv1d", x.shape());
  const Shape& ks = kernel.shape();
  if (ks.size() != 3 || ks[1] != sig.channels) {
    throw ShapeError("conv1d: input " + shape_string(x.shape()) + " incompatible with kernel " + shape_string(ks));
  }
  if (stride == 0) throw ContractViolation("conv1d: stride must be >= 1");
  if (sig.length < ks[2]) {
    throw ShapeError("conv1d: input length " + std::to_string(sig.length) + " shorter than kernel " +
                     std::to_string(ks[2]));
  }
  const kernels::ConvDims d{sig.batch, sig.channels, sig.length, ks[0], ks[2], stride};
  Tensor out(signal_shape(x.shape().size(), d.batch, d.out_channels, d.out_length()));
  kernels::conv1d_forward(x.value().data(), kernel.value().data(), out.data(), d);
  return x.tape->record(std::move(out), {x, kernel}, [x, kernel, d](Tape& t, std::span<const double> g) {
    if (t.requires_grad(x)) kernels::conv1d_backward_input(g, t.value(kernel).data(), t.grad_buffer(x.id), d);
    if (t.requires_grad(kernel)) kernels::conv1d_backward_kernel(g, t.value(x).data(), t.grad_buffer(kernel.id), d);
  });
}

Var maxpool1d(Var x, std::size_t size, std::size_t stride) {
  const Signal sig = as_signal("maxpool1d", x.shape());
  if (size == 0 || stride == 0) throw ContractViolation("maxpool1d: size and stride must be >= 1");
  if (size > sig.length) {
    throw ShapeError("maxpool1d: window " + std::to_string(size) + " exceeds length " + std::to_string(sig.length));
  }
  const kernels::PoolDims d{sig.batch * sig.channels, sig.length, size, stride};
  Tensor out(signal_shape(x.shape().size(), sig.batch, sig.channels, d.out_length()));
  std::vector<std::size_t> argmax(out.size());
  kernels::maxpool1d_forward(x.value().data(), out.data(), argmax, d);
  return x.tape->record(std::move(out), {x},
                        [x, d, argmax = std::move(argmax)](Tape& t, std::span<const double> g) {
                          kernels::maxpool1d_backward(g, argmax, t.grad_buffer(x.id), d);
                        });
}

Var dropout(Var a, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractViolation("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return a;
  const double keep = 1.0 - rate;
  std::vector<double> mask(a.value().size());
  for (double& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  Tensor out(a.shape());
  auto x = a.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * mask[i];
  return a.tape->record(std::move(out), {a}, [a, mask = std::move(mask)](Tape& t, std::span<const double> g) {
    auto ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
  });
}

}  // namespace robust1d::ops
