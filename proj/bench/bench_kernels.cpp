// Serial reference vs OpenMP kernels at the shapes the tiny profile trains on.
#include <benchmark/benchmark.h>

#include <vector>

#include "robust1d/kernels.hpp"
#include "robust1d/model.hpp"
#include "robust1d/ops.hpp"
#include "robust1d/rng.hpp"
#include "robust1d/tape.hpp"

namespace {

using namespace robust1d;
namespace k = robust1d::kernels;

std::vector<double> values(std::size_t n, std::uint64_t seed, double zero_fraction = 0.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform() < zero_fraction ? 0.0 : rng.uniform(-1, 1);
  return v;
}

// First tiny conv: 32 one-hot texts, 70 channels, 128 characters, 64 filters of 5.
const k::ConvDims kOneHot{32, 70, 128, 64, 5, 1};
// Second tiny conv on pooled, dense activations.
const k::ConvDims kDense{32, 64, 62, 64, 3, 1};

using ConvFn = void (*)(std::span<const double>, std::span<const double>, std::span<double>, const k::ConvDims&);
using MatmulFn = void (*)(std::span<const double>, std::span<const double>, std::span<double>, std::size_t,
                          std::size_t, std::size_t);
using PoolFn = void (*)(std::span<const double>, std::span<double>, std::span<std::size_t>, const k::PoolDims&);

void conv_forward(benchmark::State& state, ConvFn fn, const k::ConvDims& d, double zeros) {
  const auto x = values(d.batch * d.in_channels * d.length, 1, zeros);
  const auto w = values(d.out_channels * d.in_channels * d.kernel, 2);
  std::vector<double> out(d.batch * d.out_channels * d.out_length());
  for (auto _ : state) {
    fn(x, w, out, d);
    benchmark::DoNotOptimize(out.data());
  }
}

void conv_kernel_grad(benchmark::State& state, ConvFn fn, const k::ConvDims& d, double zeros) {
  const auto x = values(d.batch * d.in_channels * d.length, 1, zeros);
  const auto g = values(d.batch * d.out_channels * d.out_length(), 3, 0.5);
  std::vector<double> dw(d.out_channels * d.in_channels * d.kernel);
  for (auto _ : state) {
    fn(g, x, dw, d);
    benchmark::DoNotOptimize(dw.data());
  }
}

void conv_input_grad(benchmark::State& state, ConvFn fn, const k::ConvDims& d) {
  const auto w = values(d.out_channels * d.in_channels * d.kernel, 2);
  const auto g = values(d.batch * d.out_channels * d.out_length(), 3, 0.5);
  std::vector<double> dx(d.batch * d.in_channels * d.length);
  for (auto _ : state) {
    fn(g, w, dx, d);
    benchmark::DoNotOptimize(dx.data());
  }
}

void matmul_nt(benchmark::State& state, MatmulFn fn) {
  const auto m = static_cast<std::size_t>(state.range(0)), kk = static_cast<std::size_t>(state.range(1)),
             n = static_cast<std::size_t>(state.range(2));
  const auto a = values(m * kk, 4), b = values(n * kk, 5);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    fn(a, b, c, m, kk, n);
    benchmark::DoNotOptimize(c.data());
  }
}

void maxpool(benchmark::State& state, PoolFn fn) {
  const k::PoolDims d{32 * 64, 124, 2, 2};
  const auto x = values(d.rows * d.length, 6);
  std::vector<double> out(d.rows * d.out_length());
  std::vector<std::size_t> arg(out.size());
  for (auto _ : state) {
    fn(x, out, arg, d);
    benchmark::DoNotOptimize(out.data());
  }
}

void tiny_train_step(benchmark::State& state, k::Backend backend) {
  k::set_backend(backend);
  const CharCnnModel model(CharCnnConfig::tiny(3), 1);
  Tensor x({32, 128, 70});
  Rng rng(7);
  for (std::size_t b = 0; b < 32; ++b)
    for (std::size_t l = 0; l < 80; ++l) x[(b * 128 + l) * 70 + rng.index(70)] = 1.0;
  for (auto _ : state) {
    Tape tape;
    ForwardOptions opts;
    opts.training = true;
    opts.parameter_grads = true;
    const ForwardResult r = model.forward(tape, tape.constant_ref(x), opts);
    tape.backward(ops::sum(r.logits));
    benchmark::DoNotOptimize(tape.grad(r.logits).data());
  }
  k::set_backend(k::Backend::OpenMP);
}

BENCHMARK_CAPTURE(conv_forward, onehot_serial, k::serial::conv1d_forward, kOneHot, 0.985);
BENCHMARK_CAPTURE(conv_forward, onehot_openmp, k::parallel::conv1d_forward, kOneHot, 0.985);
BENCHMARK_CAPTURE(conv_forward, dense_serial, k::serial::conv1d_forward, kDense, 0.5);
BENCHMARK_CAPTURE(conv_forward, dense_openmp, k::parallel::conv1d_forward, kDense, 0.5);
BENCHMARK_CAPTURE(conv_kernel_grad, onehot_serial, k::serial::conv1d_backward_kernel, kOneHot, 0.985);
BENCHMARK_CAPTURE(conv_kernel_grad, onehot_openmp, k::parallel::conv1d_backward_kernel, kOneHot, 0.985);
BENCHMARK_CAPTURE(conv_kernel_grad, dense_serial, k::serial::conv1d_backward_kernel, kDense, 0.5);
BENCHMARK_CAPTURE(conv_kernel_grad, dense_openmp, k::parallel::conv1d_backward_kernel, kDense, 0.5);
BENCHMARK_CAPTURE(conv_input_grad, dense_serial, k::serial::conv1d_backward_input, kDense);
BENCHMARK_CAPTURE(conv_input_grad, dense_openmp, k::parallel::conv1d_backward_input, kDense);
BENCHMARK_CAPTURE(matmul_nt, serial, k::serial::mm_nt)->Args({32, 1920, 128})->Args({128, 128, 128});
BENCHMARK_CAPTURE(matmul_nt, openmp, k::parallel::mm_nt)->Args({32, 1920, 128})->Args({128, 128, 128});
BENCHMARK_CAPTURE(maxpool, serial, k::serial::maxpool1d_forward);
BENCHMARK_CAPTURE(maxpool, openmp, k::parallel::maxpool1d_forward);
BENCHMARK_CAPTURE(tiny_train_step, serial, k::Backend::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(tiny_train_step, openmp, k::Backend::OpenMP)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
