#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "robust1d/errors.hpp"
#include "robust1d/gradcheck.hpp"
#include "robust1d/losses.hpp"
#include "robust1d/ops.hpp"
#include "test_util.hpp"

namespace robust1d {
namespace {

using testing_util::random_tensor;
using testing_util::tape_vs_numeric;

// Straightforward evaluations of each objective, written from the formulas
// without sharing code with the library.
namespace naive {

double marginal(const Tensor& z, const std::vector<std::size_t>& y, double m) {
  const std::size_t b = z.dim(0), n = z.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double top = std::exp(z.at(i, y[i]) - m);
    double rest = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != y[i]) rest += std::exp(z.at(i, j));
    total += -std::log(top / (top + rest));
  }
  return total / static_cast<double>(b);
}

double dist(const Tensor& a, std::size_t i, const Tensor& c, std::size_t j) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.dim(1); ++k) s += (a.at(i, k) - c.at(j, k)) * (a.at(i, k) - c.at(j, k));
  return std::sqrt(s);
}

double center(const Tensor& f, const std::vector<std::size_t>& y, const Tensor& c) {
  double total = 0.0;
  for (std::size_t i = 0; i < f.dim(0); ++i) total += std::pow(dist(f, i, c, y[i]), 2);
  return total / static_cast<double>(f.dim(0));
}

double contrastive(const Tensor& x, const std::vector<std::size_t>& y, const Tensor& c, bool eq6) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    double den = eq6 ? 0.0 : 1.0;
    for (std::size_t j = 0; j < c.dim(0); ++j)
      if (j != y[i]) den += eq6 ? dist(c, y[i], c, j) : dist(x, i, c, j);
    total += dist(x, i, c, y[i]) / den;
  }
  return total / static_cast<double>(x.dim(0));
}

}  // namespace naive

double eval(const std::function<Var(Tape&)>& f) {
  Tape t;
  return f(t).value()[0];
}

std::vector<std::size_t> random_labels(std::size_t b, std::size_t n, Rng& rng) {
  std::vector<std::size_t> y(b);
  for (auto& v : y) v = rng.index(n);
  return y;
}

TEST(CrossEntropy, Examples) {
  const std::vector<std::size_t> y0{0};
  EXPECT_NEAR(eval([&](Tape& t) { return losses::cross_entropy(t.constant(Tensor({1, 4}, {0.3, 0.3, 0.3, 0.3})), y0); }),
              std::log(4.0), 1e-15);
  EXPECT_NEAR(eval([&](Tape& t) { return losses::cross_entropy(t.constant(Tensor({1, 2}, {2, 0})), y0); }),
              0.12692801104297263, 1e-15);
  EXPECT_NEAR(eval([&](Tape& t) { return losses::cross_entropy(t.constant(Tensor({1, 2}, {30, -30})), y0); }), 0.0,
              1e-20);
  const std::vector<std::size_t> bad{2};
  Tape t;
  EXPECT_THROW(losses::cross_entropy(t.constant(Tensor({1, 2}, {0, 0})), bad), ContractViolation);
}

TEST(CrossEntropy, ShiftInvariant) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor z = random_tensor({4, 3}, rng, -5, 5);
    Tensor shifted = z;
    const double c = rng.uniform(-50, 50);
    for (double& v : shifted.data()) v += c;
    const auto y = random_labels(4, 3, rng);
    EXPECT_NEAR(eval([&](Tape& t) { return losses::cross_entropy(t.constant(z), y); }),
                eval([&](Tape& t) { return losses::cross_entropy(t.constant(shifted), y); }), 1e-12);
  }
}

TEST(CenterLoss, Examples) {
  const Tensor centers({2, 2}, {0, 0, 3, 4});
  const std::vector<std::size_t> y{0, 1};
  EXPECT_EQ(eval([&](Tape& t) { return losses::center(t.constant(centers), y, t.constant(centers)); }), 0.0);
  const std::vector<std::size_t> y00{0, 0};
  EXPECT_DOUBLE_EQ(eval([&](Tape& t) {
                     return losses::center(t.constant(Tensor({2, 2}, {1, 0, 0, 0})), y00,
                                           t.constant(Tensor({2, 2}, {0, 0, 5, 5})));
                   }),
                   0.5);
  Rng rng(2);
  const Tensor f = random_tensor({3, 4}, rng), c = random_tensor({2, 4}, rng);
  Tensor f2 = f, c2 = c;
  for (double& v : f2.data()) v *= 2;
  for (double& v : c2.data()) v *= 2;
  const std::vector<std::size_t> y3{0, 1, 1};
  EXPECT_NEAR(eval([&](Tape& t) { return losses::center(t.constant(f2), y3, t.constant(c2)); }),
              4 * eval([&](Tape& t) { return losses::center(t.constant(f), y3, t.constant(c)); }), 1e-12);
  Tape t;
  EXPECT_THROW(losses::center(t.constant(f), y3, t.constant(Tensor({2, 3}))), ShapeError);
}

TEST(CenterLoss, SymmetricUnderClassPermutation) {
  Rng rng(40);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.index(4), d = 1 + rng.index(6), b = 1 + rng.index(8);
    const Tensor f = random_tensor({b, d}, rng), c = random_tensor({n, d}, rng);
    const auto y = random_labels(b, n, rng);
    const auto perm = rng.permutation(n);
    Tensor cp({n, d});
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < d; ++k) cp.at(perm[j], k) = c.at(j, k);
    std::vector<std::size_t> yp(b);
    for (std::size_t i = 0; i < b; ++i) yp[i] = perm[y[i]];
    EXPECT_NEAR(eval([&](Tape& t) { return losses::center(t.constant(f), y, t.constant(c)); }),
                eval([&](Tape& t) { return losses::center(t.constant(f), yp, t.constant(cp)); }), 1e-12);
  }
}

TEST(MarginalSoftmax, Examples) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor z = random_tensor({3, 4}, rng, -3, 3);
    const auto y = random_labels(3, 4, rng);
    EXPECT_EQ(eval([&](Tape& t) { return losses::marginal_softmax(t.constant(z), y, 0.0); }),
              eval([&](Tape& t) { return losses::cross_entropy(t.constant(z), y); }));
  }
  const std::vector<std::size_t> y0{0};
  for (double z : {-4.0, 0.0, 2.5}) {
    EXPECT_NEAR(eval([&](Tape& t) { return losses::marginal_softmax(t.constant(Tensor({1, 2}, {z, z})), y0, 1.0); }),
                1.3132616875182228, 1e-14);
  }
}

TEST(MarginalSoftmax, MatchesNaiveAndIsMonotoneInMargin) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 1 + rng.index(8), n = 2 + rng.index(4);
    const Tensor z = random_tensor({b, n}, rng, -4, 4);
    const auto y = random_labels(b, n, rng);
    double prev = -1.0;
    for (int step = 0; step <= 10; ++step) {
      const double m = 0.1 * step;
      const double v = eval([&](Tape& t) { return losses::marginal_softmax(t.constant(z), y, m); });
      EXPECT_NEAR(v, naive::marginal(z, y, m), 1e-12);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Contrastive, Examples) {
  const Tensor centers({3, 2}, {0, 0, 1, 1, -2, 5});
  const Tensor at_centers({2, 2}, {1, 1, -2, 5});
  const std::vector<std::size_t> y{1, 2};
  for (auto v : {ContrastiveVariant::SampleToCenter, ContrastiveVariant::CenterToCenter}) {
    EXPECT_EQ(eval([&](Tape& t) { return losses::contrastive(t.constant(at_centers), y, t.constant(centers), v); }),
              0.0);
  }
  const std::vector<std::size_t> y0{0};
  EXPECT_DOUBLE_EQ(eval([&](Tape& t) {
                     return losses::contrastive(t.constant(Tensor({1, 2}, {1, 0})), y0,
                                                t.constant(Tensor({2, 2}, {0, 0, 1, 1})),
                                                ContrastiveVariant::SampleToCenter);
                   }),
                   0.5);
  double prev = 1e9;
  for (double far : {1.0, 2.0, 4.0, 8.0}) {
    const double v = eval([&](Tape& t) {
      return losses::contrastive(t.constant(Tensor({1, 2}, {1, 0})), y0, t.constant(Tensor({2, 2}, {0, 0, far, far})),
                                 ContrastiveVariant::SampleToCenter);
    });
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Contrastive, Errors) {
  Tape t;
  const std::vector<std::size_t> y0{0};
  EXPECT_THROW(losses::contrastive(t.constant(Tensor({1, 2}, {1, 0})), y0, t.constant(Tensor({1, 2})),
                                   ContrastiveVariant::SampleToCenter),
               ContractViolation);
  EXPECT_THROW(losses::contrastive(t.constant(Tensor({1, 2}, {1, 0})), y0, t.constant(Tensor({2, 2}, {3, 3, 3, 3})),
                                   ContrastiveVariant::CenterToCenter),
               NumericError);
}

TEST(Contrastive, NonNegativeZeroOnlyAtCentersAndMatchesNaive) {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 1 + rng.index(8), d = 1 + rng.index(16), n = 2 + rng.index(4);
    const Tensor x = random_tensor({b, d}, rng), c = random_tensor({n, d}, rng);
    const auto y = random_labels(b, n, rng);
    for (bool eq6 : {false, true}) {
      const auto variant = eq6 ? ContrastiveVariant::CenterToCenter : ContrastiveVariant::SampleToCenter;
      const double v = eval([&](Tape& t) { return losses::contrastive(t.constant(x), y, t.constant(c), variant); });
      EXPECT_GT(v, 0.0);
      EXPECT_NEAR(v, naive::contrastive(x, y, c, eq6), 1e-12);
    }
    Tensor at({b, d});
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t k = 0; k < d; ++k) at.at(i, k) = c.at(y[i], k);
    EXPECT_EQ(eval([&](Tape& t) {
                return losses::contrastive(t.constant(at), y, t.constant(c), ContrastiveVariant::SampleToCenter);
              }),
              0.0);
  }
}

TEST(MarginalContrastive, Identities) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = 1 + rng.index(8), d = 1 + rng.index(8), n = 2 + rng.index(4);
    const Tensor c = random_tensor({n, d}, rng), z = random_tensor({b, n}, rng, -3, 3);
    const auto y = random_labels(b, n, rng);
    Tensor at({b, d});
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t k = 0; k < d; ++k) at.at(i, k) = c.at(y[i], k);
    LossConfig cfg;
    cfg.margin = 0.0;
    EXPECT_NEAR(eval([&](Tape& t) {
                  return losses::marginal_contrastive(t.constant(at), t.constant(z), y, t.constant(c), cfg);
                }),
                eval([&](Tape& t) { return losses::cross_entropy(t.constant(z), y); }), 1e-15);

    const Tensor x = random_tensor({b, d}, rng);
    cfg.margin = rng.uniform(0, 1);
    const double joint =
        eval([&](Tape& t) { return losses::marginal_contrastive(t.constant(x), t.constant(z), y, t.constant(c), cfg); });
    const double parts = eval([&](Tape& t) { return losses::marginal_softmax(t.constant(z), y, cfg.margin); }) +
                         eval([&](Tape& t) {
                           return losses::contrastive(t.constant(x), y, t.constant(c), cfg.variant);
                         });
    EXPECT_NEAR(joint, parts, 1e-12);
  }
}

TEST(LossGradients, MatchFiniteDifferences) {
  Rng rng(13);
  constexpr double kTol = 1e-4;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t b = 1 + rng.index(8), d = 1 + rng.index(16), n = 2 + rng.index(4);
    const Tensor x = random_tensor({b, d}, rng), c = random_tensor({n, d}, rng);
    const Tensor w = random_tensor({n, d}, rng);
    const auto y = random_labels(b, n, rng);
    const double m = rng.uniform(0, 1);

    EXPECT_LE(tape_vs_numeric([&](Tape&, const std::vector<Var>& p) { return losses::cross_entropy(p[0], y); },
                              {random_tensor({b, n}, rng, -3, 3)}),
              kTol);
    EXPECT_LE(tape_vs_numeric([&](Tape&, const std::vector<Var>& p) { return losses::marginal_softmax(p[0], y, m); },
                              {random_tensor({b, n}, rng, -3, 3)}),
              kTol);
    EXPECT_LE(tape_vs_numeric([&](Tape&, const std::vector<Var>& p) { return losses::center(p[0], y, p[1]); }, {x, c}),
              kTol);
    for (auto v : {ContrastiveVariant::SampleToCenter, ContrastiveVariant::CenterToCenter}) {
      EXPECT_LE(tape_vs_numeric(
                    [&](Tape&, const std::vector<Var>& p) { return losses::contrastive(p[0], y, p[1], v); }, {x, c}),
                kTol);
    }
    // Joint loss through the final linear layer: gradients reach W, x and centers.
    LossConfig cfg;
    cfg.margin = m;
    EXPECT_LE(tape_vs_numeric(
                  [&](Tape&, const std::vector<Var>& p) {
                    return losses::marginal_contrastive(p[0], ops::matmul_nt(p[0], p[1]), y, p[2], cfg);
                  },
                  {x, w, c}),
              kTol);
  }
}

TEST(LossGradients, GradCheckOnMarginalContrastive) {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t b = 4, d = 6, n = 3;
    const auto y = random_labels(b, n, rng);
    LossConfig cfg;
    const auto r = grad_check(
        [&](Tape&, std::span<const Var> p) {
          return losses::marginal_contrastive(p[0], ops::matmul_nt(p[0], p[1]), y, p[2], cfg);
        },
        {random_tensor({b, d}, rng), random_tensor({n, d}, rng), random_tensor({n, d}, rng)});
    EXPECT_TRUE(r.passed(1e-4)) << r.max_rel_error;
  }
}

TEST(LossConfigParsing, RoundTrip) {
  for (auto k : {LossKind::CrossEntropy, LossKind::Center, LossKind::MarginalCE, LossKind::MarginalContrastive}) {
    EXPECT_EQ(parse_loss_kind(to_string(k)), k);
  }
  EXPECT_EQ(parse_variant("eq6"), ContrastiveVariant::CenterToCenter);
  EXPECT_THROW(parse_loss_kind("hinge"), ContractViolation);
  LossConfig bad;
  bad.margin = -0.1;
  EXPECT_THROW(bad.validate(), ContractViolation);
}

}  // namespace
}  // namespace robust1d
