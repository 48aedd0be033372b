#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nlr/numerics.hpp"

namespace nlr {

/// One agglomeration step. Clusters are named by their smallest member index;
/// `first < second` always holds and the merged cluster keeps `first`.
struct Merge {
  std::size_t first = 0;
  std::size_t second = 0;
  double distance = 0.0;  // Ward/Lance-Williams dissimilarity at merge time
  std::size_t size = 0;   // size of the merged cluster
};

struct ClusterAssignment {
  std::vector<std::size_t> assignment;           // sample -> cluster in [0, K)
  std::vector<std::vector<std::size_t>> members; // cluster -> ascending sample ids

  std::size_t n_clusters() const { return members.size(); }
};

/// Ward linkage on squared Euclidean distances between rows of `points`,
/// stopping once `stop_at` clusters remain. Ties go to the lexicographically
/// smallest (first, second) pair.
std::vector<Merge> ward_linkage(const Mat& points, std::size_t stop_at = 1);

/// Replays the first n - k merges. Cluster labels are ordered by smallest member.
ClusterAssignment cut_tree(std::span<const Merge> merges, std::size_t n, std::size_t k);

/// Rows of `embeddings` grouped into exactly k clusters (n >= k required).
ClusterAssignment agglomerative(const Mat& embeddings, std::size_t k);

/// Neighbour weights for co-refinement: softmax of -||v_anchor - v_j|| over
/// cluster members j != anchor. Empty when the anchor is alone.
struct RefineWeights {
  std::vector<std::size_t> neighbours;
  Vec weights;
};

RefineWeights refine_weights(const Mat& embeddings, std::span<const std::size_t> cluster, std::size_t anchor);

}  // namespace nlr
