#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nlr/clustering.hpp"
#include "nlr/dataset.hpp"
#include "nlr/numerics.hpp"

namespace nlr::oracle {

Mat gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sigma = 1.0);
Mat unit_rows(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

struct GradientCheck {
  std::string name;
  int instances = 0;
  double worst = 0.0;  // largest relative error seen
};

/// Each loss against central differences on `instances` random inputs.
std::vector<GradientCheck> loss_gradient_checks(int instances, std::uint64_t seed = 1);

/// Composite objective through the encoder, checked per parameter tensor.
GradientCheck model_gradient_check(int instances, std::uint64_t seed = 1);

/// O(n^3) Ward: recomputes every pairwise centroid distance each step.
std::vector<Merge> naive_ward(const Mat& points, std::size_t stop_at = 1);

bool same_merges(const std::vector<Merge>& a, const std::vector<Merge>& b, double rel_tol = 1e-9);

/// Two Gaussian blobs of `per_blob` points, blob 0 first.
Mat two_blobs(std::size_t per_blob, double distance, double sigma, std::mt19937_64& rng);

/// Nearest class prototype by frame mean.
double nearest_prototype_accuracy(const CorpusSpec& spec, const std::vector<Sample>& samples);

}  // namespace nlr::oracle
