#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "nlr/losses.hpp"
#include "support/oracles.hpp"

using namespace nlr;

namespace {

Mat rows(std::initializer_list<std::initializer_list<double>> r) {
  Mat m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double x : row) m(i, j++) = x;
    ++i;
  }
  return m;
}

}  // namespace

TEST(Pairing, Involution) {
  for (std::size_t n : {4u, 6u, 32u})
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NE(pair_partner(i, n), i);
      EXPECT_EQ(pair_partner(pair_partner(i, n), n), i);
    }
  EXPECT_EQ(pair_partner(0, 8), 4u);
}

TEST(Contrastive, IdenticalEmbeddings) {
  const Mat v = Mat::Ones(4, 3) / std::sqrt(3.0);
  EXPECT_NEAR(contrastive_loss(v, 0.3).value, 4.0 * std::log(3.0), 1e-12);
  EXPECT_NEAR(contrastive_loss(v, 0.3).value, 4.394, 1e-3);
}

TEST(Contrastive, AlignedPositivesOrthogonalNegatives) {
  const Mat v = rows({{1, 0}, {0, 1}, {1, 0}, {0, 1}});
  const double pos = std::exp(1.0 / 0.3);
  const double term = -std::log(pos / (pos + 2.0));
  EXPECT_NEAR(contrastive_loss(v, 0.3).value, 4.0 * term, 1e-12);
}

TEST(Contrastive, SinglePairBatchIsRejected) {
  EXPECT_THROW(contrastive_loss(Mat::Ones(2, 3), 0.3), InvalidArgument);
  EXPECT_THROW(contrastive_loss(Mat::Ones(5, 3), 0.3), InvalidArgument);
  EXPECT_THROW(contrastive_loss(Mat::Ones(4, 3), 0.0), InvalidArgument);
}

TEST(Contrastive, TwoPairGradient) {
  std::mt19937_64 rng(4);
  const Mat v = oracle::unit_rows(4, 3, rng);
  const Mat numeric = finite_diff_grad([](const Mat& x) { return contrastive_loss(x, 0.3).value; }, v);
  EXPECT_LT(max_relative_error(contrastive_loss(v, 0.3).grad, numeric), 1e-4);
}

TEST(Contrastive, PairPermutationInvariance) {
  std::mt19937_64 rng(12);
  const Mat v = oracle::unit_rows(8, 5, rng);
  const std::vector<int> perm = {2, 0, 3, 1};
  Mat w(8, 5);
  for (int p = 0; p < 4; ++p) {
    w.row(p) = v.row(perm[p]);
    w.row(p + 4) = v.row(perm[p] + 4);
  }
  EXPECT_NEAR(contrastive_loss(v, 0.3).value, contrastive_loss(w, 0.3).value, 1e-10);
}

TEST(Recon, Examples) {
  EXPECT_EQ(recon_loss(Mat::Ones(3, 2), Mat::Ones(3, 2)).value, 0.0);
  EXPECT_EQ(recon_loss(rows({{1, 0}}), rows({{0, 0}})).value, 1.0);
  EXPECT_THROW(recon_loss(Mat::Ones(2, 2), Mat::Ones(2, 3)), InvalidArgument);
}

TEST(MemoryBankTest, RowsStayUnitAndUpdateMatchesFormula) {
  std::mt19937_64 rng(1);
  MemoryBank bank(oracle::gaussian(5, 3, rng, 4.0), 0.5);
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(bank.rows().row(i).norm(), 1.0, 1e-12);
  const Vec old = bank.rows().row(2).transpose();
  const Vec v = oracle::unit_rows(1, 3, rng).row(0).transpose();
  bank.update(2, v);
  const Vec expect = (0.5 * old + 0.5 * v).normalized();
  EXPECT_LT((bank.rows().row(2).transpose() - expect).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(bank.update(5, v), InvalidState);
  EXPECT_THROW(MemoryBank(Mat::Ones(2, 2), 1.0), InvalidArgument);
}

TEST(InstanceDiscrimination, OrthogonalPair) {
  const Mat v = rows({{1, 0}, {0, 1}});
  MemoryBank bank(v, 0.5);
  const std::vector<std::uint32_t> ids = {0, 1};
  const double term = -std::log(std::exp(2.0) / (std::exp(2.0) + 1.0));
  EXPECT_NEAR(instance_discrimination_loss(v, ids, bank, 0.5).value, 2.0 * term, 1e-12);
}

TEST(InstanceDiscrimination, SharperTemperatureLowersLoss) {
  MemoryBank bank(rows({{1, 0}, {-1, 0}, {-1, 0}, {-1, 0}}), 0.5);
  const Mat v = rows({{1, 0}});
  const std::vector<std::uint32_t> ids = {0};
  double prev = instance_discrimination_loss(v, ids, bank, 2.0).value;
  for (double tau : {1.0, 0.5, 0.25, 0.1, 0.05}) {
    const double cur = instance_discrimination_loss(v, ids, bank, tau).value;
    EXPECT_LT(cur, prev);
    prev = cur;
  }
  EXPECT_LT(prev, 1e-15);
}

TEST(InstanceDiscrimination, MissingRow) {
  MemoryBank bank(Mat::Identity(2, 2), 0.5);
  const std::vector<std::uint32_t> ids = {0, 2};
  EXPECT_THROW(instance_discrimination_loss(Mat::Identity(2, 2), ids, bank, 0.5), InvalidState);
}

TEST(FeatureDecorrelation, OrthogonalFeatures) {
  const Mat v = rows({{1, 0}, {0, 1}, {1, 0}, {0, 1}});
  const double term = -std::log(std::exp(0.5) / (std::exp(0.5) + 1.0));
  EXPECT_NEAR(term, 0.474, 1e-3);
  EXPECT_NEAR(feature_decorrelation_loss(v, 2.0).value, 2.0 * term, 1e-12);
}

TEST(FeatureDecorrelation, SingleFeatureIsZero) {
  EXPECT_NEAR(feature_decorrelation_loss(rows({{1}, {-1}, {1}, {1}}), 2.0).value, 0.0, 1e-15);
}

TEST(FeatureDecorrelation, DecorrelationLowersLoss) {
  const Mat orthogonal = rows({{1, 0}, {0, 1}, {1, 0}, {0, 1}});
  const Mat identical = rows({{1, 1}, {0, 0}, {1, 1}, {1, 1}});
  EXPECT_LT(feature_decorrelation_loss(orthogonal, 2.0).value, feature_decorrelation_loss(identical, 2.0).value);
}

TEST(FeatureDecorrelation, ZeroColumn) {
  EXPECT_THROW(feature_decorrelation_loss(rows({{1, 0}, {1, 0}}), 2.0), DegenerateInput);
}

TEST(SoftLabels, CleanCrossEntropyOnConfidentPrediction) {
  const Mat logits = rows({{60, 0, 0}, {0, 0, 60}});
  const std::vector<std::uint16_t> y = {0, 2};
  EXPECT_NEAR(clean_ce_loss(logits, y).value, 0.0, 1e-20);
}

TEST(SoftLabels, PseudoL2) {
  const Mat logits = rows({{std::log(0.5), std::log(0.25), std::log(0.25)}});
  EXPECT_NEAR(pseudo_l2_loss(logits, rows({{0.7, 0.3, 0.0}})).value, 0.105, 1e-12);
  EXPECT_NEAR(pseudo_l2_loss(logits, rows({{0.5, 0.25, 0.25}})).value, 0.0, 1e-15);
}

TEST(Mixup, UnitLambdaIsPlainCrossEntropy) {
  std::mt19937_64 rng(3);
  std::vector<Mat> clips = {oracle::gaussian(4, 2, rng), oracle::gaussian(4, 2, rng), oracle::gaussian(4, 2, rng)};
  const std::vector<std::uint16_t> y = {0, 1, 1};
  const Mat t = one_hot_rows(y, 2);
  const std::vector<std::size_t> partner = {2, 0, 1};
  const auto m = mixup_with(clips, t, 1.0, partner);
  for (std::size_t i = 0; i < clips.size(); ++i) EXPECT_EQ(m.clips[i], clips[i]);
  EXPECT_EQ(m.targets, t);
  const Mat logits = oracle::gaussian(3, 2, rng);
  EXPECT_NEAR(soft_ce_loss(logits, m.targets).value, clean_ce_loss(logits, y).value, 1e-12);
}

TEST(Mixup, SharedLabelKeepsOneHot) {
  std::mt19937_64 rng(3);
  std::vector<Mat> clips = {oracle::gaussian(4, 2, rng), oracle::gaussian(4, 2, rng)};
  const std::vector<std::uint16_t> y = {1, 1};
  const std::vector<std::size_t> partner = {1, 0};
  const auto m = mixup_with(clips, one_hot_rows(y, 3), 0.5, partner);
  EXPECT_EQ(m.targets, one_hot_rows(y, 3));
  EXPECT_LT((m.clips[0] - 0.5 * (clips[0] + clips[1])).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Mixup, BetaEightConcentratesAtHalf) {
  std::mt19937_64 rng(2024);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double l = sample_beta(8.0, 8.0, rng);
    ASSERT_GT(l, 0.0);
    ASSERT_LT(l, 1.0);
    sum += l;
  }
  EXPECT_GE(sum / 10000.0, 0.45);
  EXPECT_LE(sum / 10000.0, 0.55);
}

TEST(Mixup, PartnerIsPermutation) {
  std::mt19937_64 rng(5);
  std::vector<Mat> clips(7, Mat::Zero(2, 2));
  const auto m = mixup(clips, Mat::Zero(7, 3), 8.0, rng);
  std::vector<std::size_t> sorted = m.partner;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_THROW(mixup(clips, Mat::Zero(7, 3), 0.0, rng), InvalidArgument);
}

TEST(Gradients, EveryLossMatchesFiniteDifferences) {
  for (const auto& c : oracle::loss_gradient_checks(50)) {
    EXPECT_GE(c.instances, 50) << c.name;
    EXPECT_LT(c.worst, 1e-4) << c.name;
  }
}

TEST(Losses, NonNegativeAndFinite) {
  std::mt19937_64 rng(77);
  for (int s = 0; s < 50; ++s) {
    const Mat v = oracle::unit_rows(6, 4, rng);
    const Mat logits = oracle::gaussian(6, 3, rng, 5.0);
    const Mat q = one_hot_rows(std::vector<std::uint16_t>{0, 1, 2, 0, 1, 2}, 3);
    for (double x : {contrastive_loss(v, 0.3).value, feature_decorrelation_loss(v, 2.0).value,
                     soft_ce_loss(logits, q).value, pseudo_l2_loss(logits, q).value}) {
      EXPECT_TRUE(std::isfinite(x));
      EXPECT_GE(x, 0.0);
    }
  }
}
