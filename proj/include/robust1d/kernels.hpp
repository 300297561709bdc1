#pragma once

#include <cstddef>
#include <span>

// Raw numeric kernels behind the tape primitives. Every kernel exists twice:
// a serial reference and an OpenMP version. Both compute each output element
// with the same summation order, so their results are bit-identical and the
// serial one doubles as the test oracle for the parallel one.
//
// Layouts are row-major. Batched 1-D signals are [batch, channels, length].

namespace robust1d::kernels {

enum class Backend { Serial, OpenMP };

void set_backend(Backend backend);
Backend backend();

struct ConvDims {
  std::size_t batch;
  std::size_t in_channels;
  std::size_t length;
  std::size_t out_channels;
  std::size_t kernel;
  std::size_t stride;
  std::size_t out_length() const { return (length - kernel) / stride + 1; }
};

struct PoolDims {
  std::size_t rows;  // batch * channels
  std::size_t length;
  std::size_t size;
  std::size_t stride;
  std::size_t out_length() const { return (length - size) / stride + 1; }
};

#define ROBUST1D_KERNEL_DECLS                                                                     \
  /* c[m x n] += a[m x k] * b[k x n] */                                                          \
  void mm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,          \
             std::size_t m, std::size_t k, std::size_t n);                                       \
  /* c[m x n] += a[m x k] * b[n x k]^T */                                                        \
  void mm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,          \
             std::size_t m, std::size_t k, std::size_t n);                                       \
  /* c[m x n] += a[k x m]^T * b[k x n] */                                                        \
  void mm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,          \
             std::size_t m, std::size_t k, std::size_t n);                                       \
  /* out = cross-correlation of x with w, valid padding; zeros in x are skipped */               \
  void conv1d_forward(std::span<const double> x, std::span<const double> w, std::span<double> out, \
                      const ConvDims& d);                                                         \
  /* dx += correlation transpose of g with w */                                                   \
  void conv1d_backward_input(std::span<const double> g, std::span<const double> w,                \
                             std::span<double> dx, const ConvDims& d);                            \
  /* dw += sum over batch of g (x) x */                                                           \
  void conv1d_backward_kernel(std::span<const double> g, std::span<const double> x,               \
                              std::span<double> dw, const ConvDims& d);                           \
  /* windowed max; argmax records the first maximal index of each window */                      \
  void maxpool1d_forward(std::span<const double> x, std::span<double> out,                        \
                         std::span<std::size_t> argmax, const PoolDims& d);                       \
  void maxpool1d_backward(std::span<const double> g, std::span<const std::size_t> argmax,         \
                          std::span<double> dx, const PoolDims& d);

namespace serial {
ROBUST1D_KERNEL_DECLS
}  // namespace serial

namespace parallel {
ROBUST1D_KERNEL_DECLS
}  // namespace parallel

#undef ROBUST1D_KERNEL_DECLS

// Dispatch on the active backend.
void mm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
           std::size_t k, std::size_t n);
void mm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
           std::size_t k, std::size_t n);
void mm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
           std::size_t k, std::size_t n);
void conv1d_forward(std::span<const double> x, std::span<const double> w, std::span<double> out,
                    const ConvDims& d);
void conv1d_backward_input(std::span<const double> g, std::span<const double> w, std::span<double> dx,
                           const ConvDims& d);
void conv1d_backward_kernel(std::span<const double> g, std::span<const double> x, std::span<double> dw,
                            const ConvDims& d);
void maxpool1d_forward(std::span<const double> x, std::span<double> out, std::span<std::size_t> argmax,
                       const PoolDims& d);
void maxpool1d_backward(std::span<const double> g, std::span<const std::size_t> argmax,
                        std::span<double> dx, const PoolDims& d);

}  // namespace robust1d::kernels
