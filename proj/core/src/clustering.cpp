#include "nlr/clustering.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace nlr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Upper-triangular dissimilarities with a cached nearest neighbour per row
// (over active columns greater than the row).
class WardState {
 public:
  explicit WardState(const Mat& points)
      : n_(static_cast<std::size_t>(points.rows())),
        dist_(points.rows(), points.rows()),
        size_(n_, 1),
        active_(n_, true),
        nn_(n_, 0),
        nn_dist_(n_, kInf) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) {
        at(i, j) = (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).squaredNorm();
      }
    for (std::size_t i = 0; i < n_; ++i) rescan(i);
  }

  Merge step() {
    std::size_t a = n_;
    double best = kInf;
    for (std::size_t i = 0; i < n_; ++i)
      if (active_[i] && nn_dist_[i] < best) {
        best = nn_dist_[i];
        a = i;
      }
    const std::size_t b = nn_[a];
    const double dab = at(a, b);
    const auto na = static_cast<double>(size_[a]);
    const auto nb = static_cast<double>(size_[b]);

    for (std::size_t k = 0; k < n_; ++k) {
      if (!active_[k] || k == a || k == b) continue;
      const auto nk = static_cast<double>(size_[k]);
      const double updated = ((na + nk) * get(k, a) + (nb + nk) * get(k, b) - nk * dab) / (na + nb + nk);
      set(k, a, updated);
    }
    active_[b] = false;
    size_[a] += size_[b];

    for (std::size_t k = 0; k < a; ++k) {
      if (!active_[k]) continue;
      if (nn_[k] == a || nn_[k] == b) {
        rescan(k);
      } else {
        const double d = at(k, a);
        if (d < nn_dist_[k] || (d == nn_dist_[k] && a < nn_[k])) {
          nn_[k] = a;
          nn_dist_[k] = d;
        }
      }
    }
    for (std::size_t k = a + 1; k < b; ++k)
      if (active_[k] && nn_[k] == b) rescan(k);
    rescan(a);
    return {a, b, dab, size_[a]};
  }

 private:
  double& at(std::size_t i, std::size_t j) { return dist_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }
  double get(std::size_t i, std::size_t j) { return i < j ? at(i, j) : at(j, i); }
  void set(std::size_t i, std::size_t j, double d) { (i < j ? at(i, j) : at(j, i)) = d; }

  void rescan(std::size_t i) {
    nn_dist_[i] = kInf;
    nn_[i] = n_;
    for (std::size_t j = i + 1; j < n_; ++j)
      if (active_[j] && at(i, j) < nn_dist_[i]) {
        nn_dist_[i] = at(i, j);
        nn_[i] = j;
      }
  }

  std::size_t n_;
  Mat dist_;
  std::vector<std::size_t> size_;
  std::vector<bool> active_;
  std::vector<std::size_t> nn_;
  std::vector<double> nn_dist_;
};

}  // namespace

std::vector<Merge> ward_linkage(const Mat& points, std::size_t stop_at) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (stop_at < 1) throw InvalidArgument("ward_linkage: stop_at must be at least 1");
  if (n < stop_at) throw InvalidArgument("ward_linkage: fewer points than requested clusters");
  if (!points.allFinite()) throw InvalidArgument("ward_linkage: non-finite coordinates");
  std::vector<Merge> merges;
  if (n <= stop_at) return merges;
  merges.reserve(n - stop_at);
  WardState state(points);
  for (std::size_t s = 0; s + stop_at < n; ++s) merges.push_back(state.step());
  return merges;
}

ClusterAssignment cut_tree(std::span<const Merge> merges, std::size_t n, std::size_t k) {
  if (k < 1 || k > n) throw InvalidArgument("cut_tree: k must lie in [1, n]");
  if (merges.size() < n - k) throw InvalidArgument("cut_tree: not enough merges for the requested cut");
  std::vector<std::size_t> root(n);
  std::iota(root.begin(), root.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (root[x] != x) x = root[x] = root[root[x]];
    return x;
  };
  for (std::size_t s = 0; s < n - k; ++s) {
    const auto ra = find(merges[s].first);
    const auto rb = find(merges[s].second);
    root[std::max(ra, rb)] = std::min(ra, rb);
  }
  ClusterAssignment out;
  out.assignment.assign(n, 0);
  std::vector<std::size_t> label(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = find(i);
    if (label[r] == n) {
      label[r] = out.members.size();
      out.members.emplace_back();
    }
    out.assignment[i] = label[r];
    out.members[label[r]].push_back(i);
  }
  return out;
}

ClusterAssignment agglomerative(const Mat& embeddings, std::size_t k) {
  const auto n = static_cast<std::size_t>(embeddings.rows());
  if (k < 1 || n < k) throw InvalidArgument("agglomerative: need n >= K >= 1");
  const auto merges = ward_linkage(embeddings, k);
  return cut_tree(merges, n, k);
}

RefineWeights refine_weights(const Mat& embeddings, std::span<const std::size_t> cluster, std::size_t anchor) {
  if (std::find(cluster.begin(), cluster.end(), anchor) == cluster.end())
    throw InvalidArgument("refine_weights: anchor is not a member of the cluster");
  RefineWeights out;
  out.neighbours.reserve(cluster.size());
  for (auto j : cluster)
    if (j != anchor) out.neighbours.push_back(j);
  if (out.neighbours.empty()) return out;

  const auto vi = embeddings.row(static_cast<Eigen::Index>(anchor));
  Vec logits(static_cast<Eigen::Index>(out.neighbours.size()));
  for (std::size_t t = 0; t < out.neighbours.size(); ++t)
    logits[static_cast<Eigen::Index>(t)] = -(vi - embeddings.row(static_cast<Eigen::Index>(out.neighbours[t]))).norm();
  out.weights = softmax(logits, 1.0).probs();
  return out;
}

}  // namespace nlr
