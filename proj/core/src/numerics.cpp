#include "nlr/numerics.hpp"

#include <cmath>
#include <string>

namespace nlr {

bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

ProbDist::ProbDist(Vec probs) : probs_(std::move(probs)) {
  if (probs_.size() == 0) throw InvalidArgument("ProbDist: empty distribution");
  if (!probs_.allFinite()) throw InvalidArgument("ProbDist: non-finite entry");
  if ((probs_.array() < 0.0).any()) throw InvalidArgument("ProbDist: negative entry");
  const double mass = probs_.sum();
  if (std::abs(mass - 1.0) > 1e-6)
    throw InvalidArgument("ProbDist: mass " + std::to_string(mass) + " differs from 1");
}

ProbDist ProbDist::uniform(std::size_t k) {
  if (k == 0) throw InvalidArgument("ProbDist::uniform: k must be positive");
  return ProbDist(Vec::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k)));
}

ProbDist ProbDist::one_hot(std::size_t k, std::size_t cls) {
  if (cls >= k) throw InvalidArgument("ProbDist::one_hot: class out of range");
  Vec v = Vec::Zero(static_cast<Eigen::Index>(k));
  v[static_cast<Eigen::Index>(cls)] = 1.0;
  return ProbDist(std::move(v));
}

ProbDist ProbDist::renormalized(Vec weights) {
  weights = weights.cwiseMax(0.0);
  const double mass = weights.sum();
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw DegenerateInput("ProbDist::renormalized: no positive mass");
  return ProbDist(weights / mass);
}

std::size_t ProbDist::argmax() const {
  Eigen::Index idx = 0;
  probs_.maxCoeff(&idx);
  return static_cast<std::size_t>(idx);
}

ProbDist softmax(const Vec& logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InvalidArgument("softmax: temperature must be positive and finite");
  if (logits.size() == 0 || !logits.allFinite())
    throw InvalidArgument("softmax: logits must be non-empty and finite");
  const Vec scaled = logits / temperature;
  Vec e = (scaled.array() - scaled.maxCoeff()).exp();
  e /= e.sum();
  return ProbDist(std::move(e));
}

double log_sum_exp(const Eigen::Ref<const Vec>& x) {
  const double m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

Vec l2_normalize(const Vec& x) {
  const double n = x.norm();
  if (!(n > 1e-12)) throw DegenerateInput("l2_normalize: norm below 1e-12");
  return x / n;
}

Vec l2_normalize_backward(const Vec& x, const Vec& grad_out) {
  const double n = x.norm();
  if (!(n > 1e-12)) throw DegenerateInput("l2_normalize_backward: norm below 1e-12");
  const Vec y = x / n;
  return (grad_out - y * y.dot(grad_out)) / n;
}

Mat finite_diff_grad(const ScalarFn& loss_fn, const Mat& at, double h) {
  if (!(h >= 1e-6 && h <= 1e-3)) throw InvalidArgument("finite_diff_grad: h outside [1e-6, 1e-3]");
  Mat probe = at;
  Mat grad(at.rows(), at.cols());
  for (Eigen::Index c = 0; c < at.cols(); ++c) {
    for (Eigen::Index r = 0; r < at.rows(); ++r) {
      const double orig = probe(r, c);
      probe(r, c) = orig + h;
      const double up = loss_fn(probe);
      probe(r, c) = orig - h;
      const double down = loss_fn(probe);
      probe(r, c) = orig;
      grad(r, c) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

Mat finite_diff_grad(const ScalarFn& loss_fn, const ParamTensor& params, double h) {
  return finite_diff_grad(loss_fn, params.value, h);
}

double max_relative_error(const Mat& analytic, const Mat& numeric) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols())
    throw InvalidArgument("max_relative_error: shape mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double b = numeric.data()[i];
    worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
  }
  return worst;
}

}  // namespace nlr
