#include <algorithm>

#include "kernels_common.hpp"
#include "robust1d/kernels.hpp"

namespace robust1d::kernels::serial {

void mm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
           std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
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
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] += s;
    }
  }
}

void mm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
           std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
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
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t o = 0; o < d.out_channels; ++o) {
      double* orow = out.data() + (b * d.out_channels + o) * lout;
      std::fill(orow, orow + lout, 0.0);
      for (std::size_t c = 0; c < d.in_channels; ++c) {
        const std::size_t r = b * d.in_channels + c;
        const double* xrow = x.data() + r * d.length;
        const double* wk = w.data() + (o * d.in_channels + c) * d.kernel;
        if (sparse.dense[r]) {
          for (std::size_t l = 0; l < lout; ++l) {
            double s = orow[l];
            for (std::size_t t = 0; t < d.kernel; ++t) s += wk[t] * xrow[l * d.stride + t];
            orow[l] = s;
          }
        } else {
          for (std::uint32_t p : sparse.row(r)) {
            for (std::size_t t = 0; t < d.kernel && t <= p; ++t) {
              const std::size_t q = p - t;
              if (q % d.stride) continue;
              const std::size_t l = q / d.stride;
              if (l < lout) orow[l] += wk[t] * xrow[p];
            }
          }
        }
      }
    }
  }
}

void conv1d_backward_input(std::span<const double> g, std::span<const double> w, std::span<double> dx,
                           const ConvDims& d) {
  const std::size_t lout = d.out_length();
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t c = 0; c < d.in_channels; ++c) {
      double* dxrow = dx.data() + (b * d.in_channels + c) * d.length;
      for (std::size_t o = 0; o < d.out_channels; ++o) {
        const double* grow = g.data() + (b * d.out_channels + o) * lout;
        const double* wk = w.data() + (o * d.in_channels + c) * d.kernel;
        for (std::size_t t = 0; t < d.kernel; ++t) {
          const double wv = wk[t];
          for (std::size_t l = 0; l < lout; ++l) dxrow[l * d.stride + t] += grow[l] * wv;
        }
      }
    }
  }
}

void conv1d_backward_kernel(std::span<const double> g, std::span<const double> x, std::span<double> dw,
                            const ConvDims& d) {
  const std::size_t lout = d.out_length();
  const detail::SparseRows sparse(x, d.batch * d.in_channels, d.length);
  for (std::size_t o = 0; o < d.out_channels; ++o) {
    for (std::size_t b = 0; b < d.batch; ++b) {
      const double* grow = g.data() + (b * d.out_channels + o) * lout;
      for (std::size_t c = 0; c < d.in_channels; ++c) {
        const std::size_t r = b * d.in_channels + c;
        const double* xrow = x.data() + r * d.length;
        double* dwk = dw.data() + (o * d.in_channels + c) * d.kernel;
        if (sparse.dense[r]) {
          for (std::size_t t = 0; t < d.kernel; ++t) {
            double s = dwk[t];
            for (std::size_t l = 0; l < lout; ++l) s += grow[l] * xrow[l * d.stride + t];
            dwk[t] = s;
          }
        } else {
          for (std::size_t t = 0; t < d.kernel; ++t) {
            double s = dwk[t];
            for (std::uint32_t p : sparse.row(r)) {
              if (p < t || (p - t) % d.stride) continue;
              const std::size_t l = (p - t) / d.stride;
              if (l < lout) s += grow[l] * xrow[p];
            }
            dwk[t] = s;
          }
        }
      }
    }
  }
}

void maxpool1d_forward(std::span<const double> x, std::span<double> out, std::span<std::size_t> argmax,
                       const PoolDims& d) {
  const std::size_t lout = d.out_length();
  for (std::size_t r = 0; r < d.rows; ++r) {
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
  for (std::size_t r = 0; r < d.rows; ++r) {
    for (std::size_t l = 0; l < lout; ++l) dx[r * d.length + argmax[r * lout + l]] += g[r * lout + l];
  }
}

}  // namespace robust1d::kernels::serial
