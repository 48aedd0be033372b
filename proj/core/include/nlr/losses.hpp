#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "nlr/numerics.hpp"

namespace nlr {

/// Scalar loss with its gradient with respect to the primary input matrix.
struct LossGrad {
  double value = 0.0;
  Mat grad;
};

// Batch layout used throughout: a batch of N_b clip pairs is stored as 2*N_b
// rows, rows [0, N_b) hold the first clips and rows [N_b, 2*N_b) the second,
// so the positive partner of row i is (i + N_b) mod 2*N_b.
std::size_t pair_partner(std::size_t row, std::size_t batch_rows);

/// Symmetrized NT-Xent over all 2*N_b anchors. V is 2*N_b x d of unit rows.
LossGrad contrastive_loss(const Mat& v, double tau);

struct ReconGrad {
  double value = 0.0;
  Mat du;      // rows match u
  Mat du_hat;  // rows match u_hat
};

/// sum_i ||u_i - u_hat_i||^2 where u_hat_i = W_d v_i.
ReconGrad recon_loss(const Mat& u, const Mat& u_hat);

/// Unit-norm embedding table standing in for the dataset-wide denominator of
/// instance discrimination. Rows are updated with momentum after each step.
class MemoryBank {
 public:
  MemoryBank() = default;
  /// Rows of `initial` are normalized on the way in.
  MemoryBank(const Mat& initial, double momentum);

  std::size_t size() const { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(rows_.cols()); }
  double momentum() const { return momentum_; }
  const Mat& rows() const { return rows_; }

  /// bank[id] <- normalize(m * bank[id] + (1 - m) * v)
  void update(std::uint32_t id, const Vec& v);

 private:
  Mat rows_;
  double momentum_ = 0.5;
};

/// -sum_i log softmax_j(v_i . bank_j / tau)[id_i]; the bank is a constant.
LossGrad instance_discrimination_loss(const Mat& v, std::span<const std::uint32_t> ids, const MemoryBank& bank,
                                      double tau);

/// Softmax decorrelation of the column-normalized transposed batch.
LossGrad feature_decorrelation_loss(const Mat& v, double tau);

/// Cross-entropy of row-wise softmax(logits) against soft targets (rows of
/// `targets` need not be one-hot). Gradient is with respect to the logits.
LossGrad soft_ce_loss(const Mat& logits, const Mat& targets);

/// L_X: -sum log p(y_i | x_i) on the clean subset.
LossGrad clean_ce_loss(const Mat& logits, std::span<const std::uint16_t> labels);

/// L_U: sum ||q_i - p_i||^2 with p = softmax(logits); gradient on logits.
LossGrad pseudo_l2_loss(const Mat& logits, const Mat& targets);

/// Beta(a, b) via two gamma draws.
double sample_beta(double a, double b, std::mt19937_64& rng);

struct MixupBatch {
  std::vector<Mat> clips;
  Mat targets;  // rows are mixed soft labels
  double lambda = 1.0;
  std::vector<std::size_t> partner;
};

/// x_i^m = l x_i + (1 - l) x_m(i), y likewise, with l ~ Beta(alpha, alpha)
/// and m a uniformly random permutation of the batch.
MixupBatch mixup(std::span<const Mat> clips, const Mat& targets, double alpha, std::mt19937_64& rng);

/// Same interpolation with fixed lambda and partner map.
MixupBatch mixup_with(std::span<const Mat> clips, const Mat& targets, double lambda,
                      std::span<const std::size_t> partner);

Mat one_hot_rows(std::span<const std::uint16_t> labels, std::size_t n_classes);

}  // namespace nlr
