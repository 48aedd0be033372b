#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlr/clustering.hpp"
#include "nlr/numerics.hpp"

namespace nlr {

/// Soft labels q^ carried from one epoch to the next.
struct SoftLabelStore {
  std::vector<ProbDist> q;
  bool initialized = false;

  /// First denoising epoch: q^ <- the classifier's own predictions.
  void initialize(std::span<const ProbDist> predictions);
};

/// p^_i = (1 - beta) p_i + beta * sum_{j in C_i, j != i} w_ij q^_j.
/// Singleton clusters keep p^_i = p_i.
std::vector<ProbDist> corefine(std::span<const ProbDist> p, const SoftLabelStore& store,
                               const ClusterAssignment& clusters, const Mat& embeddings, double beta);

struct ClassWeights {
  Vec raw;         // omega_c = -|X(c)| / |D(c)|
  Vec normalized;  // min-max scaled into [eps, 1 + eps]
};

ClassWeights class_weights(std::span<const std::size_t> prev_clean_counts, std::span<const std::size_t> class_counts,
                           double epsilon);

/// Stand-in for the previous clean subset before any selection has run:
/// |D(c)| * (1 - expected_noise_ratio), rounded.
std::vector<std::size_t> initial_clean_counts(std::span<const std::size_t> class_counts, double expected_noise_ratio);

/// Jensen-Shannon divergence in bits, so the result lies in [0, 1].
double jsd(const ProbDist& a, const ProbDist& b);

struct Gmm2 {
  std::array<double, 2> weight{0.5, 0.5};
  std::array<double, 2> mean{0.0, 0.0};   // mean[0] < mean[1]
  std::array<double, 2> sigma{1.0, 1.0};
  std::size_t iterations = 0;
  std::vector<double> log_likelihood;      // one entry per accepted state, starting with the initialization

  double log_density(std::size_t component, double x) const;
  /// Unweighted density comparison N(x; mu1, s1) > N(x; mu2, s2).
  bool prefers_low(double x) const;
  double posterior_low(double x) const;
};

inline constexpr double kGmmSigmaFloor = 1e-4;

/// Two-component 1-D EM. Initialized at the 10th/90th percentiles with the
/// overall standard deviation; stops when an update gains less than `tol`
/// (that update is discarded) or after `max_iter` accepted updates.
/// Throws DegenerateInput when all values coincide.
Gmm2 fit_gmm_2(std::span<const double> values, double tol = 1e-8, std::size_t max_iter = 200);

/// Clean-subset construction: score criterion A (weighted score at or above
/// its cluster's mean weighted score) united with the JSD criterion B.
struct Selection {
  std::vector<bool> clean;
  std::vector<bool> by_score;
  std::vector<bool> by_jsd;
  std::vector<double> cluster_threshold;
};

Selection select_clean(std::span<const ProbDist> p_hat, std::span<const std::uint16_t> labels,
                       const ClusterAssignment& clusters, const Vec& class_weight, const Gmm2* gmm,
                       std::span<const double> divergences);

/// Truncates p^_i to {observed label, argmax} and renormalizes.
ProbDist pseudo_label(const ProbDist& p_hat, std::uint16_t label);

struct Partition {
  std::vector<std::size_t> clean;     // X^t
  std::vector<std::size_t> noisy;     // ids of U^t
  std::vector<ProbDist> pseudo;       // q~ aligned with `noisy`
};

Partition make_pseudo_labels(std::span<const ProbDist> p_hat, std::span<const std::uint16_t> labels,
                             const std::vector<bool>& clean);

struct DenoiseConfig {
  double beta = 0.5;
  double epsilon = 0.05;
  bool use_class_weights = true;
  double gmm_tol = 1e-8;
  std::size_t gmm_max_iter = 200;
};

/// Everything the epoch-boundary pass produces.
struct SelectionState {
  std::vector<ProbDist> p_hat;
  ClassWeights weights;
  std::vector<double> divergences;
  std::optional<Gmm2> gmm;
  std::string gmm_warning;
  Selection selection;
  Partition partition;
  std::vector<std::size_t> clean_counts;  // |X^t(c)| by observed label
};

/// Co-refinement, class weights, JSD, GMM, selection and pseudo-labels for
/// one epoch. Initializes `store` on first use; does not update it.
SelectionState denoise_pass(std::span<const ProbDist> predictions, const Mat& embeddings,
                            std::span<const std::uint16_t> labels, std::size_t n_classes,
                            const ClusterAssignment& clusters, SoftLabelStore& store,
                            std::span<const std::size_t> prev_clean_counts, const DenoiseConfig& config);

/// Epoch-end swap: clean ids get one-hot observed labels, noisy ids their q~.
void update_store(SoftLabelStore& store, const Partition& partition, std::span<const std::uint16_t> labels,
                  std::size_t n_classes);

}  // namespace nlr
