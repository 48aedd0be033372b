#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include <Eigen/Dense>

#include "nlr/errors.hpp"

namespace nlr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

bool all_finite(const Eigen::Ref<const Mat>& m);

/// A point on the probability simplex. Construction validates non-negativity
/// and unit mass (1e-6); the stored vector is exactly what was passed in.
class ProbDist {
 public:
  ProbDist() = default;
  explicit ProbDist(Vec probs);

  static ProbDist uniform(std::size_t k);
  static ProbDist one_hot(std::size_t k, std::size_t cls);
  /// Clamps tiny negatives to zero and rescales to unit mass before validating.
  static ProbDist renormalized(Vec weights);

  const Vec& probs() const { return probs_; }
  double operator[](std::size_t k) const { return probs_[static_cast<Eigen::Index>(k)]; }
  std::size_t size() const { return static_cast<std::size_t>(probs_.size()); }
  std::size_t argmax() const;

 private:
  Vec probs_;
};

/// Temperature softmax with max-subtraction.
ProbDist softmax(const Vec& logits, double temperature = 1.0);

/// log(sum(exp(x))) computed stably.
double log_sum_exp(const Eigen::Ref<const Vec>& x);

/// Throws DegenerateInput when the norm is at most 1e-12.
Vec l2_normalize(const Vec& x);

/// Gradient of x / ||x|| pulled back: (g - y (y.g)) / ||x|| with y = x / ||x||.
Vec l2_normalize_backward(const Vec& x, const Vec& grad_out);

/// Trainable matrix plus its accumulated gradient.
struct ParamTensor {
  Mat value;
  Mat grad;

  ParamTensor() = default;
  explicit ParamTensor(Mat v) : value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

using ScalarFn = std::function<double(const Mat&)>;

/// Central-difference gradient of `loss_fn` at `at`, one entry at a time.
/// `h` must lie in [1e-6, 1e-3].
Mat finite_diff_grad(const ScalarFn& loss_fn, const Mat& at, double h = 1e-5);
Mat finite_diff_grad(const ScalarFn& loss_fn, const ParamTensor& params, double h = 1e-5);

/// max_ij |a - b| / max(1, |a|) with `a` the analytic gradient.
double max_relative_error(const Mat& analytic, const Mat& numeric);

}  // namespace nlr
