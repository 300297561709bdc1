#include "robust1d/kernels.hpp"

#include <atomic>

namespace robust1d::kernels {

namespace {
std::atomic<Backend> active_backend{Backend::OpenMP};
}  // namespace

void set_backend(Backend b) { active_backend.store(b, std::memory_order_relaxed); }
Backend backend() { return active_backend.load(std::memory_order_relaxed); }

#define ROBUST1D_DISPATCH(name, ...)                                          \
  if (backend() == Backend::Serial) return serial::name(__VA_ARGS__);         \
  return parallel::name(__VA_ARGS__);

void mm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
           std::size_t k, std::size_t n) {
  ROBUST1D_DISPATCH(mm_nn, a, b, c, m, k, n)
}

void mm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
           std::size_t k, std::size_t n) {
  ROBUST1D_DISPATCH(mm_nt, a, b, c, m, k, n)
}

void mm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
           std::size_t k, std::size_t n) {
  ROBUST1D_DISPATCH(mm_tn, a, b, c, m, k, n)
}

void conv1d_forward(std::span<const double> x, std::span<const double> w, std::span<double> out,
                    const ConvDims& d) {
  ROBUST1D_DISPATCH(conv1d_forward, x, w, out, d)
}

void conv1d_backward_input(std::span<const double> g, std::span<const double> w, std::span<double> dx,
                           const ConvDims& d) {
  ROBUST1D_DISPATCH(conv1d_backward_input, g, w, dx, d)
}

void conv1d_backward_kernel(std::span<const double> g, std::span<const double> x, std::span<double> dw,
                            const ConvDims& d) {
  ROBUST1D_DISPATCH(conv1d_backward_kernel, g, x, dw, d)
}

void maxpool1d_forward(std::span<const double> x, std::span<double> out, std::span<std::size_t> argmax,
                       const PoolDims& d) {
  ROBUST1D_DISPATCH(maxpool1d_forward, x, out, argmax, d)
}

void maxpool1d_backward(std::span<const double> g, std::span<const std::size_t> argmax, std::span<double> dx,
                        const PoolDims& d) {
  ROBUST1D_DISPATCH(maxpool1d_backward, g, argmax, dx, d)
}

#undef ROBUST1D_DISPATCH

}  // namespace robust1d::kernels
