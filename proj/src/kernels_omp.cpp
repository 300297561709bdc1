#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <vector>

#include "kernels_common.hpp"
#include "robust1d/kernels.hpp"

// Same loop nests as kernels_serial.cpp with the outermost independent index
// distributed across threads. Inner loops keep the serial summation order.

namespace robust1d::kernels::parallel {

void mm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
           std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void mm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
           std::size_t k, std::size_t n) {
  // Transposing b turns each dot product into row updates that vectorize.
  // Every c(i,j) still sums its k products in ascending order, starting from
  // zero, before being added to c.
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel
  {
    std::vector<double> acc(n);
#pragma omp for schedule(static)
    for (std::int64_t ii = 0; ii < rows; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t p = 0; p < k; ++p) {
        const double av = a[i * k + p];
        if (av == 0.0) continue;
        const double* brow = bt.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
      }
      double* crow = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += acc[j];
    }
  }
}

void mm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
           std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* crow = c.data() + i * n;
    for (std::size_t r = 0; r < k; ++r) {
      const double av = a[r * m + i];
      if (av == 0.0) continue;
      const double* brow = b.data() + r * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void conv1d_forward(std::span<const double> x, std::span<const double> w, std::span<double> out,
                    const ConvDims& d) {
  const std::size_t lout = d.out_length();
  const detail::SparseRows sparse(x, d.batch * d.in_channels, d.length);
  const auto planes = static_cast<std::int64_t>(d.batch * d.out_channels);
#pragma omp parallel for schedule(static)
  for (std::int64_t plane = 0; plane < planes; ++plane) {
    const auto b = static_cast<std::size_t>(plane) / d.out_channels;
    const auto o = static_cast<std::size_t>(plane) % d.out_channels;
    double* orow = out.data() + static_cast<std::size_t>(plane) * lout;
    std::fill(orow, orow + lout, 0.0);
    for (std::size_t c = 0; c < d.in_channels; ++c) {
      const std::size_t r = b * d.in_channels + c;
      const double* xrow = x.data() + r * d.length;
      const double* wk = w.data() + (o * d.in_channels + c) * d.kernel;
      if (sparse.dense[r]) {
        for (std::size_t t = 0; t < d.kernel; ++t) {
          const double wv = wk[t];
          if (d.stride == 1) {
            const double* xs = xrow + t;
            for (std::size_t l = 0; l < lout; ++l) orow[l] += wv * xs[l];
          } else {
            for (std::size_t l = 0; l < lout; ++l) orow[l] += wv * xrow[l * d.stride + t];
          }
        }
      } else {
        for (std::uint32_t p : sparse.row(r)) {
          const double xv = xrow[p];
          for (std::size_t t = 0; t < d.kernel && t <= p; ++t) {
            const std::size_t q = p - t;
            if (d.stride != 1 && q % d.stride) continue;
            const std::size_t l = q / d.stride;
            if (l < lout) orow[l] += wk[t] * xv;
          }
        }
      }
    }
  }
}

void conv1d_backward_input(std::span<const double> g, std::span<const double> w, std::span<double> dx,
                           const ConvDims& d) {
  const std::size_t lout = d.out_length();
  const auto planes = static_cast<std::int64_t>(d.batch * d.in_channels);
#pragma omp parallel for schedule(static)
  for (std::int64_t plane = 0; plane < planes; ++plane) {
    const auto b = static_cast<std::size_t>(plane) / d.in_channels;
    const auto c = static_cast<std::size_t>(plane) % d.in_channels;
    double* dxrow = dx.data() + static_cast<std::size_t>(plane) * d.length;
    for (std::size_t o = 0; o < d.out_channels; ++o) {
      const double* grow = g.data() + (b * d.out_channels + o) * lout;
      const double* wk = w.data() + (o * d.in_channels + c) * d.kernel;
      for (std::size_t t = 0; t < d.kernel; ++t) {
        const double wv = wk[t];
        if (d.stride == 1) {
          double* dxs = dxrow + t;
          for (std::size_t l = 0; l < lout; ++l) dxs[l] += grow[l] * wv;
        } else {
          for (std::size_t l = 0; l < lout; ++l) dxrow[l * d.stride + t] += grow[l] * wv;
        }
      }
    }
  }
}

void conv1d_backward_kernel(std::span<const double> g, std::span<const double> x, std::span<double> dw,
                            const ConvDims& d) {
  const std::size_t lout = d.out_length();
  const std::size_t taps = d.in_channels * d.kernel;
  const detail::SparseRows sparse(x, d.batch * d.in_channels, d.length);
  const auto outs = static_cast<std::int64_t>(d.out_channels);
  const bool all_sparse = std::none_of(sparse.dense.begin(), sparse.dense.end(), [](bool v) { return v; });

  if (all_sparse) {
#pragma omp parallel for schedule(static)
    for (std::int64_t oo = 0; oo < outs; ++oo) {
      const auto o = static_cast<std::size_t>(oo);
      for (std::size_t b = 0; b < d.batch; ++b) {
        const double* grow = g.data() + (b * d.out_channels + o) * lout;
        for (std::size_t c = 0; c < d.in_channels; ++c) {
          const std::size_t r = b * d.in_channels + c;
          const double* xrow = x.data() + r * d.length;
          double* dwk = dw.data() + (o * d.in_channels + c) * d.kernel;
          for (std::size_t t = 0; t < d.kernel; ++t) {
            double s = dwk[t];
            for (std::uint32_t p : sparse.row(r)) {
              if (p < t || (d.stride != 1 && (p - t) % d.stride)) continue;
              const std::size_t l = (p - t) / d.stride;
              if (l < lout) s += grow[l] * xrow[p];
            }
            dwk[t] = s;
          }
        }
      }
    }
    return;
  }

  // Unrolled input windows, [batch * lout x in_channels * kernel]. Each
  // dw(o,c,t) receives its products in (b, l) order as in the serial loops.
  std::vector<double> cols(d.batch * lout * taps);
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t l = 0; l < lout; ++l) {
      double* col = cols.data() + (b * lout + l) * taps;
      for (std::size_t c = 0; c < d.in_channels; ++c) {
        const double* xs = x.data() + (b * d.in_channels + c) * d.length + l * d.stride;
        std::copy(xs, xs + d.kernel, col + c * d.kernel);
      }
    }
#pragma omp parallel for schedule(static)
  for (std::int64_t oo = 0; oo < outs; ++oo) {
    const auto o = static_cast<std::size_t>(oo);
    double* dwo = dw.data() + o * taps;
    for (std::size_t b = 0; b < d.batch; ++b) {
      const double* grow = g.data() + (b * d.out_channels + o) * lout;
      for (std::size_t l = 0; l < lout; ++l) {
        const double gv = grow[l];
        if (gv == 0.0) continue;
        const double* col = cols.data() + (b * lout + l) * taps;
        for (std::size_t j = 0; j < taps; ++j) dwo[j] += gv * col[j];
      }
    }
  }
}

void maxpool1d_forward(std::span<const double> x, std::span<double> out, std::span<std::size_t> argmax,
                       const PoolDims& d) {
  const std::size_t lout = d.out_length();
  const auto rows = static_cast<std::int64_t>(d.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t rr = 0; rr < rows; ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    const double* xrow = x.data() + r * d.length;
    for (std::size_t l = 0; l < lout; ++l) {
      const std::size_t start = l * d.stride;
      std::size_t best = start;
      for (std::size_t p = start + 1; p < start + d.size; ++p) {
        if (xrow[p] > xrow[best]) best = p;
      }
      out[r * lout + l] = xrow[best];
      argmax[r * lout + l] = best;
    }
  }
}

void maxpool1d_backward(std::span<const double> g, std::span<const std::size_t> argmax, std::span<double> dx,
                        const PoolDims& d) {
  const std::size_t lout = d.out_length();
  const auto rows = static_cast<std::int64_t>(d.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t rr = 0; rr < rows; ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    for (std::size_t l = 0; l < lout; ++l) dx[r * d.length + argmax[r * lout + l]] += g[r * lout + l];
  }
}

}  // namespace robust1d::kernels::parallel
