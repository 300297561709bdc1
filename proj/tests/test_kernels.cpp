#include <gtest/gtest.h>
#include <omp.h>

#include "robust1d/kernels.hpp"
#include "test_util.hpp"

namespace robust1d {
namespace {

namespace k = kernels;

class ForceThreads : public ::testing::Test {
 protected:
  void SetUp() override {
    saved_ = omp_get_max_threads();
    omp_set_num_threads(4);
  }
  void TearDown() override { omp_set_num_threads(saved_); }
  int saved_ = 1;
};

std::vector<double> random_values(std::size_t n, Rng& rng, double zero_fraction) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform() < zero_fraction ? 0.0 : rng.uniform(-1, 1);
  return v;
}

// Direct evaluation of the conv definition.
std::vector<double> conv_oracle(const std::vector<double>& x, const std::vector<double>& w, const k::ConvDims& d) {
  const std::size_t lout = d.out_length();
  std::vector<double> out(d.batch * d.out_channels * lout, 0.0);
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t o = 0; o < d.out_channels; ++o)
      for (std::size_t l = 0; l < lout; ++l) {
        double s = 0.0;
        for (std::size_t c = 0; c < d.in_channels; ++c)
          for (std::size_t t = 0; t < d.kernel; ++t)
            s += w[(o * d.in_channels + c) * d.kernel + t] * x[(b * d.in_channels + c) * d.length + l * d.stride + t];
        out[(b * d.out_channels + o) * lout + l] = s;
      }
  return out;
}

TEST_F(ForceThreads, ConvMatchesDefinitionAndBackendsAgreeBitwise) {
  Rng rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    const k::ConvDims d{1 + rng.index(3), 1 + rng.index(6), 8 + rng.index(40), 1 + rng.index(5), 1 + rng.index(5),
                        1 + rng.index(3)};
    // Dense, one-hot-like sparse, and mixed inputs cover every path.
    const double zeros = trial % 3 == 0 ? 0.0 : (trial % 3 == 1 ? 0.95 : 0.5);
    const auto x = random_values(d.batch * d.in_channels * d.length, rng, zeros);
    const auto w = random_values(d.out_channels * d.in_channels * d.kernel, rng, 0.0);
    const std::size_t nout = d.batch * d.out_channels * d.out_length();
    std::vector<double> s(nout), p(nout);
    k::serial::conv1d_forward(x, w, s, d);
    k::parallel::conv1d_forward(x, w, p, d);
    EXPECT_EQ(s, p);
    const auto oracle = conv_oracle(x, w, d);
    for (std::size_t i = 0; i < nout; ++i) EXPECT_NEAR(s[i], oracle[i], 1e-12);

    // Gradients with zeros (as after relu/pooling) and non-empty accumulators.
    const auto g = random_values(nout, rng, 0.4);
    auto dxs = random_values(x.size(), rng, 0.5), dws = random_values(w.size(), rng, 0.5);
    auto dxp = dxs, dwp = dws;
    k::serial::conv1d_backward_input(g, w, dxs, d);
    k::parallel::conv1d_backward_input(g, w, dxp, d);
    k::serial::conv1d_backward_kernel(g, x, dws, d);
    k::parallel::conv1d_backward_kernel(g, x, dwp, d);
    EXPECT_EQ(dxs, dxp);
    EXPECT_EQ(dws, dwp);
  }
}

TEST_F(ForceThreads, SparseAndDensePathsSumIdentically) {
  // The same row evaluated with and without a few zeros forced to take the
  // other path must agree exactly on the shared entries.
  Rng rng(3);
  const k::ConvDims d{1, 1, 20, 2, 3, 1};
  std::vector<double> x(20, 0.0);
  x[4] = 1.0;
  x[11] = -0.5;
  const auto w = random_values(6, rng, 0.0);
  std::vector<double> out(2 * d.out_length());
  k::serial::conv1d_forward(x, w, out, d);
  EXPECT_EQ(out, conv_oracle(x, w, d));
}

TEST_F(ForceThreads, MatmulBackendsAgreeBitwise) {
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t cap = trial % 4 == 0 ? 200 : 20;
    const std::size_t m = 1 + rng.index(cap), kk = 1 + rng.index(cap), n = 1 + rng.index(cap);
    const auto a = random_values(m * kk, rng, 0.3);
    const auto b = random_values(kk * n, rng, 0.0);
    std::vector<double> s(m * n, 0.0), p(m * n, 0.0);
    k::serial::mm_nn(a, b, s, m, kk, n);
    k::parallel::mm_nn(a, b, p, m, kk, n);
    EXPECT_EQ(s, p);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double ref = 0.0;
        for (std::size_t q = 0; q < kk; ++q) ref += a[i * kk + q] * b[q * n + j];
        EXPECT_NEAR(s[i * n + j], ref, 1e-12);
      }
    const auto bt = random_values(n * kk, rng, 0.0);
    auto s2 = random_values(m * n, rng, 0.2);
    auto p2 = s2;
    k::serial::mm_nt(a, bt, s2, m, kk, n);
    k::parallel::mm_nt(a, bt, p2, m, kk, n);
    EXPECT_EQ(s2, p2);
    const auto at = random_values(kk * m, rng, 0.0);
    auto s3 = random_values(m * n, rng, 0.2);
    auto p3 = s3;
    k::serial::mm_tn(at, b, s3, m, kk, n);
    k::parallel::mm_tn(at, b, p3, m, kk, n);
    EXPECT_EQ(s3, p3);
  }
}

TEST_F(ForceThreads, MaxpoolBackendsAgree) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t len = 4 + rng.index(30), size = 1 + rng.index(4);
    const k::PoolDims d{1 + rng.index(6), len, size, 1 + rng.index(size)};
    const auto x = random_values(d.rows * len, rng, 0.2);
    const std::size_t nout = d.rows * d.out_length();
    std::vector<double> os(nout), op(nout);
    std::vector<std::size_t> as(nout), ap(nout);
    k::serial::maxpool1d_forward(x, os, as, d);
    k::parallel::maxpool1d_forward(x, op, ap, d);
    EXPECT_EQ(os, op);
    EXPECT_EQ(as, ap);
    const auto g = random_values(nout, rng, 0.0);
    std::vector<double> ds(x.size()), dp(x.size());
    k::serial::maxpool1d_backward(g, as, ds, d);
    k::parallel::maxpool1d_backward(g, ap, dp, d);
    EXPECT_EQ(ds, dp);
  }
}

TEST(Backend, Switch) {
  k::set_backend(k::Backend::Serial);
  EXPECT_EQ(k::backend(), k::Backend::Serial);
  k::set_backend(k::Backend::OpenMP);
  EXPECT_EQ(k::backend(), k::Backend::OpenMP);
}

}  // namespace
}  // namespace robust1d
