#include "nlr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nlr {

namespace {

Vec row_softmax(const Eigen::Ref<const Vec>& x) {
  Vec e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

std::size_t pair_partner(std::size_t row, std::size_t batch_rows) {
  const std::size_t half = batch_rows / 2;
  return (row + half) % batch_rows;
}

LossGrad contrastive_loss(const Mat& v, double tau) {
  const Eigen::Index rows = v.rows();
  if (rows < 4 || rows % 2 != 0) throw InvalidArgument("contrastive_loss: need an even batch of at least 4 rows");
  if (!(tau > 0.0)) throw InvalidArgument("contrastive_loss: tau must be positive");

  const Mat sim = v * v.transpose() / tau;
  Mat g = Mat::Zero(rows, rows);  // dL/dsim
  double total = 0.0;
  Vec others(rows - 1);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto j = static_cast<Eigen::Index>(pair_partner(static_cast<std::size_t>(i), static_cast<std::size_t>(rows)));
    for (Eigen::Index k = 0, o = 0; k < rows; ++k)
      if (k != i) others[o++] = sim(i, k);
    const double lse = log_sum_exp(others);
    total += lse - sim(i, j);
    for (Eigen::Index k = 0; k < rows; ++k)
      if (k != i) g(i, k) = std::exp(sim(i, k) - lse);
    g(i, j) -= 1.0;
  }
  return {total, (g + g.transpose()) * v / tau};
}

ReconGrad recon_loss(const Mat& u, const Mat& u_hat) {
  if (u.rows() != u_hat.rows() || u.cols() != u_hat.cols()) throw InvalidArgument("recon_loss: shape mismatch");
  const Mat r = u - u_hat;
  return {r.squaredNorm(), 2.0 * r, -2.0 * r};
}

MemoryBank::MemoryBank(const Mat& initial, double momentum) : rows_(initial), momentum_(momentum) {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("MemoryBank: momentum must lie in [0, 1)");
  for (Eigen::Index i = 0; i < rows_.rows(); ++i) rows_.row(i) = l2_normalize(rows_.row(i).transpose()).transpose();
}

void MemoryBank::update(std::uint32_t id, const Vec& v) {
  if (id >= size()) throw InvalidState("MemoryBank::update: no row for id " + std::to_string(id));
  const Vec mixed = momentum_ * rows_.row(id).transpose() + (1.0 - momentum_) * v;
  rows_.row(id) = l2_normalize(mixed).transpose();
}

LossGrad instance_discrimination_loss(const Mat& v, std::span<const std::uint32_t> ids, const MemoryBank& bank,
                                      double tau) {
  if (static_cast<std::size_t>(v.rows()) != ids.size())
    throw InvalidArgument("instance_discrimination_loss: one id per row required");
  if (!(tau > 0.0)) throw InvalidArgument("instance_discrimination_loss: tau must be positive");
  if (static_cast<std::size_t>(v.cols()) != bank.dim())
    throw InvalidArgument("instance_discrimination_loss: embedding width differs from bank");
  for (auto id : ids)
    if (id >= bank.size()) throw InvalidState("instance_discrimination_loss: no bank row for id " + std::to_string(id));

  const Mat& table = bank.rows();
  const Mat sim = v * table.transpose() / tau;  // rows x n
  Mat g(sim.rows(), sim.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    const double lse = log_sum_exp(sim.row(i).transpose());
    const auto own = static_cast<Eigen::Index>(ids[static_cast<std::size_t>(i)]);
    total += lse - sim(i, own);
    g.row(i) = (sim.row(i).array() - lse).exp();
    g(i, own) -= 1.0;
  }
  return {total, g * table / tau};
}

LossGrad feature_decorrelation_loss(const Mat& v, double tau) {
  if (v.rows() < 2) throw InvalidArgument("feature_decorrelation_loss: need at least two rows");
  if (!(tau > 0.0)) throw InvalidArgument("feature_decorrelation_loss: tau must be positive");
  const Eigen::Index d = v.cols();

  Mat f(v.rows(), d);
  Vec norms(d);
  for (Eigen::Index l = 0; l < d; ++l) {
    norms[l] = v.col(l).norm();
    if (!(norms[l] > 1e-12)) throw DegenerateInput("feature_decorrelation_loss: feature vector with zero norm");
    f.col(l) = v.col(l) / norms[l];
  }
  const Mat corr = f.transpose() * f / tau;  // corr(m, l) = f_m . f_l / tau
  Mat s(d, d);                               // dL/dcorr
  double total = 0.0;
  for (Eigen::Index l = 0; l < d; ++l) {
    const double lse = log_sum_exp(corr.col(l));
    total += lse - corr(l, l);
    s.col(l) = (corr.col(l).array() - lse).exp();
    s(l, l) -= 1.0;
  }
  const Mat df = f * (s + s.transpose()) / tau;
  Mat dv(v.rows(), d);
  for (Eigen::Index l = 0; l < d; ++l) dv.col(l) = (df.col(l) - f.col(l) * f.col(l).dot(df.col(l))) / norms[l];
  return {total, dv};
}

LossGrad soft_ce_loss(const Mat& logits, const Mat& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw InvalidArgument("soft_ce_loss: logits and targets differ in shape");
  Mat grad(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Vec row = logits.row(i).transpose();
    const double lse = log_sum_exp(row);
    const Vec t = targets.row(i).transpose();
    total += t.dot((Vec::Constant(row.size(), lse) - row));
    grad.row(i) = (row_softmax(row) * t.sum() - t).transpose();
  }
  return {total, grad};
}

Mat one_hot_rows(std::span<const std::uint16_t> labels, std::size_t n_classes) {
  Mat t = Mat::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes) throw InvalidArgument("one_hot_rows: label out of range");
    t(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return t;
}

LossGrad clean_ce_loss(const Mat& logits, std::span<const std::uint16_t> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size())
    throw InvalidArgument("clean_ce_loss: one label per row required");
  return soft_ce_loss(logits, one_hot_rows(labels, static_cast<std::size_t>(logits.cols())));
}

LossGrad pseudo_l2_loss(const Mat& logits, const Mat& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw InvalidArgument("pseudo_l2_loss: logits and targets differ in shape");
  Mat grad(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Vec p = row_softmax(logits.row(i).transpose());
    const Vec diff = p - targets.row(i).transpose();
    total += diff.squaredNorm();
    const Vec dp = 2.0 * diff;
    grad.row(i) = (p.array() * (dp.array() - p.dot(dp))).matrix().transpose();
  }
  return {total, grad};
}

double sample_beta(double a, double b, std::mt19937_64& rng) {
  if (!(a > 0.0 && b > 0.0)) throw InvalidArgument("sample_beta: shape parameters must be positive");
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

MixupBatch mixup_with(std::span<const Mat> clips, const Mat& targets, double lambda,
                      std::span<const std::size_t> partner) {
  if (clips.size() != static_cast<std::size_t>(targets.rows()) || partner.size() != clips.size())
    throw InvalidArgument("mixup: clips, targets and partner map must agree in length");
  MixupBatch out;
  out.lambda = lambda;
  out.partner.assign(partner.begin(), partner.end());
  out.targets.resize(targets.rows(), targets.cols());
  out.clips.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const std::size_t m = partner[i];
    out.clips.push_back(lambda * clips[i] + (1.0 - lambda) * clips[m]);
    out.targets.row(static_cast<Eigen::Index>(i)) =
        lambda * targets.row(static_cast<Eigen::Index>(i)) + (1.0 - lambda) * targets.row(static_cast<Eigen::Index>(m));
  }
  return out;
}

MixupBatch mixup(std::span<const Mat> clips, const Mat& targets, double alpha, std::mt19937_64& rng) {
  if (!(alpha > 0.0)) throw InvalidArgument("mixup: alpha must be positive");
  const double lambda = sample_beta(alpha, alpha, rng);
  std::vector<std::size_t> partner(clips.size());
  std::iota(partner.begin(), partner.end(), std::size_t{0});
  std::shuffle(partner.begin(), partner.end(), rng);
  return mixup_with(clips, targets, lambda, partner);
}

}  // namespace nlr
