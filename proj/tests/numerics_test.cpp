#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nlr/numerics.hpp"
#include "support/oracles.hpp"

using namespace nlr;

namespace {
Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}
}  // namespace

TEST(Softmax, UniformOnEqualLogits) {
  const auto p = softmax(vec({0, 0, 0}));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(p[k], 1.0 / 3.0, 1e-12);
  const auto q = softmax(vec({1, 1}), 7.5);
  EXPECT_NEAR(q[0], 0.5, 1e-12);
}

TEST(Softmax, TemperatureScaling) {
  const auto p = softmax(vec({2, 0}), 0.5);
  const double e4 = std::exp(4.0);
  EXPECT_NEAR(p[0], e4 / (e4 + 1.0), 1e-12);
  EXPECT_NEAR(p[0], 0.98201, 1e-5);
  EXPECT_NEAR(p[1], 0.01799, 1e-5);
}

TEST(Softmax, RejectsBadInput) {
  EXPECT_THROW(softmax(vec({1, 2}), 0.0), InvalidArgument);
  EXPECT_THROW(softmax(vec({1, 2}), -1.0), InvalidArgument);
  EXPECT_THROW(softmax(vec({1, NAN})), InvalidArgument);
  EXPECT_THROW(softmax(vec({1, INFINITY})), InvalidArgument);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> t(0.05, 5.0);
  for (int s = 0; s < 200; ++s) {
    const Vec x = oracle::gaussian(6, 1, rng, 50.0).col(0);
    const double tau = t(rng);
    const auto p = softmax(x, tau);
    EXPECT_NEAR(p.probs().sum(), 1.0, 1e-6);
    EXPECT_EQ(p.argmax(), softmax(Vec(x.array() + 123.4), tau).argmax());
  }
}

TEST(L2Normalize, Examples) {
  const Vec a = l2_normalize(vec({3, 4}));
  EXPECT_NEAR(a[0], 0.6, 1e-15);
  EXPECT_NEAR(a[1], 0.8, 1e-15);
  const Vec b = l2_normalize(vec({1, 1, 1, 1}));
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(b[i], 0.5, 1e-15);
  const Vec e = vec({0, 1, 0});
  EXPECT_EQ(l2_normalize(e), e);
}

TEST(L2Normalize, Idempotent) {
  std::mt19937_64 rng(5);
  for (int s = 0; s < 100; ++s) {
    const Vec x = oracle::gaussian(7, 1, rng, 10.0).col(0);
    const Vec y = l2_normalize(x);
    EXPECT_NEAR(y.norm(), 1.0, 1e-9);
    EXPECT_LE((l2_normalize(y) - y).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(L2Normalize, DegenerateNorm) {
  EXPECT_THROW(l2_normalize(Vec::Zero(3)), DegenerateInput);
  EXPECT_THROW(l2_normalize(Vec::Constant(2, 1e-14)), DegenerateInput);
}

TEST(L2Normalize, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (int s = 0; s < 50; ++s) {
    const Mat x = oracle::gaussian(5, 1, rng);
    const Vec g = oracle::gaussian(5, 1, rng).col(0);
    const Mat analytic = l2_normalize_backward(x.col(0), g);
    const Mat numeric = finite_diff_grad([&](const Mat& m) { return g.dot(l2_normalize(m.col(0))); }, x);
    EXPECT_LT(max_relative_error(analytic, numeric), 1e-6);
  }
}

TEST(ProbDist, Validation) {
  EXPECT_NO_THROW(ProbDist(vec({0.25, 0.75})));
  EXPECT_THROW(ProbDist(vec({0.5, 0.6})), InvalidArgument);
  EXPECT_THROW(ProbDist(vec({-0.1, 1.1})), InvalidArgument);
  EXPECT_THROW(ProbDist{Vec()}, InvalidArgument);
  EXPECT_EQ(ProbDist::one_hot(4, 2).argmax(), 2u);
  EXPECT_NEAR(ProbDist::uniform(5)[3], 0.2, 1e-15);
  const auto r = ProbDist::renormalized(vec({2, 6}));
  EXPECT_NEAR(r[1], 0.75, 1e-15);
  EXPECT_THROW(ProbDist::renormalized(Vec::Zero(3)), DegenerateInput);
}

TEST(FiniteDiff, ScalarExamples) {
  const Mat w = Mat::Constant(1, 1, 3.0);
  EXPECT_NEAR(finite_diff_grad([](const Mat& m) { return m(0, 0) * m(0, 0); }, w, 1e-4)(0, 0), 6.0, 1e-6);
  EXPECT_EQ(finite_diff_grad([](const Mat&) { return 4.2; }, w)(0, 0), 0.0);
}

TEST(FiniteDiff, StepBounds) {
  const Mat w = Mat::Ones(2, 2);
  auto f = [](const Mat& m) { return m.sum(); };
  EXPECT_THROW(finite_diff_grad(f, w, 1e-7), InvalidArgument);
  EXPECT_THROW(finite_diff_grad(f, w, 1e-2), InvalidArgument);
  ParamTensor p(w);
  EXPECT_NEAR(finite_diff_grad(f, p, 1e-4)(1, 1), 1.0, 1e-9);
}

TEST(FiniteDiff, RelativeErrorDenominator) {
  Mat a(1, 2), b(1, 2);
  a << 0.5, 100.0;
  b << 0.5001, 100.01;
  EXPECT_NEAR(max_relative_error(a, b), 1e-4, 1e-9);
}

TEST(ParamTensor, ZeroGradKeepsShape) {
  ParamTensor p(Mat::Ones(3, 2));
  p.grad.setConstant(4.0);
  p.zero_grad();
  EXPECT_EQ(p.grad.rows(), 3);
  EXPECT_EQ(p.grad.cols(), 2);
  EXPECT_EQ(p.grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LogSumExp, Stable) {
  EXPECT_NEAR(log_sum_exp(vec({1000, 1000})), 1000.0 + std::log(2.0), 1e-9);
  EXPECT_NEAR(log_sum_exp(vec({0, std::log(3.0)})), std::log(4.0), 1e-12);
}
