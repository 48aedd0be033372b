#include "nlr/denoise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nlr {

void SoftLabelStore::initialize(std::span<const ProbDist> predictions) {
  q.assign(predictions.begin(), predictions.end());
  initialized = true;
}

std::vector<ProbDist> corefine(std::span<const ProbDist> p, const SoftLabelStore& store,
                               const ClusterAssignment& clusters, const Mat& embeddings, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidArgument("corefine: beta must lie in [0, 1]");
  if (!store.initialized || store.q.size() != p.size())
    throw InvalidState("corefine: soft-label store not initialized for these samples");
  if (clusters.assignment.size() != p.size() || static_cast<std::size_t>(embeddings.rows()) != p.size())
    throw InvalidArgument("corefine: predictions, clusters and embeddings must cover the same samples");

  std::vector<ProbDist> out;
  out.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& cluster = clusters.members[clusters.assignment[i]];
    const auto w = refine_weights(embeddings, cluster, i);
    if (w.neighbours.empty() || beta == 0.0) {
      out.push_back(p[i]);
      continue;
    }
    Vec neighbour_mass = Vec::Zero(p[i].probs().size());
    for (std::size_t t = 0; t < w.neighbours.size(); ++t)
      neighbour_mass += w.weights[static_cast<Eigen::Index>(t)] * store.q[w.neighbours[t]].probs();
    out.push_back(ProbDist::renormalized((1.0 - beta) * p[i].probs() + beta * neighbour_mass));
  }
  return out;
}

ClassWeights class_weights(std::span<const std::size_t> prev_clean_counts, std::span<const std::size_t> class_counts,
                           double epsilon) {
  if (prev_clean_counts.size() != class_counts.size() || class_counts.empty())
    throw InvalidArgument("class_weights: one count per class required");
  if (!(epsilon > 0.0)) throw InvalidArgument("class_weights: epsilon must be positive");
  const auto k = static_cast<Eigen::Index>(class_counts.size());
  ClassWeights w;
  w.raw.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto total = class_counts[static_cast<std::size_t>(c)];
    if (total < 1) throw InvalidArgument("class_weights: every class needs at least one sample");
    w.raw[c] = -static_cast<double>(prev_clean_counts[static_cast<std::size_t>(c)]) / static_cast<double>(total);
  }
  const double lo = w.raw.minCoeff();
  const double hi = w.raw.maxCoeff();
  if (hi == lo) {
    w.normalized = Vec::Constant(k, epsilon);
  } else {
    w.normalized = (w.raw.array() - lo) / (hi - lo) + epsilon;
  }
  return w;
}

std::vector<std::size_t> initial_clean_counts(std::span<const std::size_t> class_counts, double expected_noise_ratio) {
  if (!(expected_noise_ratio >= 0.0 && expected_noise_ratio <= 1.0))
    throw InvalidArgument("initial_clean_counts: expected_noise_ratio must lie in [0, 1]");
  std::vector<std::size_t> out;
  out.reserve(class_counts.size());
  for (auto c : class_counts)
    out.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(c) * (1.0 - expected_noise_ratio))));
  return out;
}

double jsd(const ProbDist& a, const ProbDist& b) {
  if (a.size() != b.size()) throw InvalidArgument("jsd: distributions differ in support size");
  double total = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double m = 0.5 * (a[k] + b[k]);
    if (a[k] > 0.0) total += 0.5 * a[k] * std::log2(a[k] / m);
    if (b[k] > 0.0) total += 0.5 * b[k] * std::log2(b[k] / m);
  }
  return std::clamp(total, 0.0, 1.0);
}

// --- two-component mixture --------------------------------------------------

double Gmm2::log_density(std::size_t component, double x) const {
  const double s = sigma[component];
  const double z = (x - mean[component]) / s;
  return -0.5 * z * z - std::log(s) - 0.5 * std::log(2.0 * std::numbers::pi);
}

bool Gmm2::prefers_low(double x) const { return log_density(0, x) > log_density(1, x); }

double Gmm2::posterior_low(double x) const {
  const double l0 = std::log(weight[0]) + log_density(0, x);
  const double l1 = std::log(weight[1]) + log_density(1, x);
  const double m = std::max(l0, l1);
  return std::exp(l0 - m) / (std::exp(l0 - m) + std::exp(l1 - m));
}

namespace {

double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double mixture_log_likelihood(const Gmm2& g, const std::vector<double>& x) {
  double ll = 0.0;
  for (double xi : x) {
    const double l0 = std::log(g.weight[0]) + g.log_density(0, xi);
    const double l1 = std::log(g.weight[1]) + g.log_density(1, xi);
    const double m = std::max(l0, l1);
    ll += m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
  }
  return ll;
}

// One E-step plus M-step. Returns false when a component loses all mass.
bool em_update(const Gmm2& cur, const std::vector<double>& x, Gmm2& next) {
  const auto n = static_cast<double>(x.size());
  std::array<double, 2> mass{0.0, 0.0}, first{0.0, 0.0};
  std::vector<double> r0(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    r0[i] = cur.posterior_low(x[i]);
    mass[0] += r0[i];
    mass[1] += 1.0 - r0[i];
    first[0] += r0[i] * x[i];
    first[1] += (1.0 - r0[i]) * x[i];
  }
  if (mass[0] < 1e-12 || mass[1] < 1e-12) return false;
  next = cur;
  for (int j = 0; j < 2; ++j) {
    next.weight[j] = mass[j] / n;
    next.mean[j] = first[j] / mass[j];
  }
  std::array<double, 2> second{0.0, 0.0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    second[0] += r0[i] * (x[i] - next.mean[0]) * (x[i] - next.mean[0]);
    second[1] += (1.0 - r0[i]) * (x[i] - next.mean[1]) * (x[i] - next.mean[1]);
  }
  for (int j = 0; j < 2; ++j) next.sigma[j] = std::max(kGmmSigmaFloor, std::sqrt(second[j] / mass[j]));
  return true;
}

}  // namespace

Gmm2 fit_gmm_2(std::span<const double> values, double tol, std::size_t max_iter) {
  if (values.size() < 4) throw InvalidArgument("fit_gmm_2: need at least four values");
  // Fit on a sorted copy.
  std::vector<double> x(values.begin(), values.end());
  for (double v : x)
    if (!std::isfinite(v)) throw InvalidArgument("fit_gmm_2: non-finite value");
  std::sort(x.begin(), x.end());

  const auto n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 1e-12)) throw DegenerateInput("fit_gmm_2: all values identical");

  Gmm2 g;
  g.mean = {percentile(x, 0.10), percentile(x, 0.90)};
  g.sigma = {std::max(sd, kGmmSigmaFloor), std::max(sd, kGmmSigmaFloor)};
  g.weight = {0.5, 0.5};
  double ll = mixture_log_likelihood(g, x);
  g.log_likelihood.push_back(ll);

  while (g.iterations < max_iter) {
    Gmm2 next;
    if (!em_update(g, x, next)) break;
    const double ll_next = mixture_log_likelihood(next, x);
    if (!(ll_next - ll >= tol)) break;
    next.iterations = g.iterations + 1;
    next.log_likelihood = std::move(g.log_likelihood);
    next.log_likelihood.push_back(ll_next);
    g = std::move(next);
    ll = ll_next;
  }
  if (g.mean[0] > g.mean[1]) {
    std::swap(g.mean[0], g.mean[1]);
    std::swap(g.sigma[0], g.sigma[1]);
    std::swap(g.weight[0], g.weight[1]);
  }
  return g;
}

Selection select_clean(std::span<const ProbDist> p_hat, std::span<const std::uint16_t> labels,
                       const ClusterAssignment& clusters, const Vec& class_weight, const Gmm2* gmm,
                       std::span<const double> divergences) {
  const std::size_t n = p_hat.size();
  if (labels.size() != n || clusters.assignment.size() != n || (gmm && divergences.size() != n))
    throw InvalidArgument("select_clean: inputs must cover the same samples");

  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= class_weight.size()) throw InvalidArgument("select_clean: label without a class weight");
    score[i] = class_weight[labels[i]] * p_hat[i][labels[i]];
  }

  Selection s;
  s.cluster_threshold.assign(clusters.n_clusters(), 0.0);
  for (std::size_t k = 0; k < clusters.n_clusters(); ++k) {
    const auto& members = clusters.members[k];
    double sum = 0.0;
    for (auto j : members) sum += score[j];
    s.cluster_threshold[k] = members.empty() ? 0.0 : sum / static_cast<double>(members.size());
  }

  s.clean.assign(n, false);
  s.by_score.assign(n, false);
  s.by_jsd.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    s.by_score[i] = score[i] >= s.cluster_threshold[clusters.assignment[i]];
    s.by_jsd[i] = gmm != nullptr && gmm->prefers_low(divergences[i]);
    s.clean[i] = s.by_score[i] || s.by_jsd[i];
  }
  return s;
}

ProbDist pseudo_label(const ProbDist& p_hat, std::uint16_t label) {
  if (label >= p_hat.size()) throw InvalidArgument("pseudo_label: label out of range");
  const std::size_t guess = p_hat.argmax();
  Vec q = Vec::Zero(static_cast<Eigen::Index>(p_hat.size()));
  q[label] = p_hat[label];
  q[static_cast<Eigen::Index>(guess)] = p_hat[guess];
  if (!(q.sum() > 0.0)) q[static_cast<Eigen::Index>(guess)] = 1.0;
  return ProbDist::renormalized(std::move(q));
}

Partition make_pseudo_labels(std::span<const ProbDist> p_hat, std::span<const std::uint16_t> labels,
                             const std::vector<bool>& clean) {
  if (labels.size() != p_hat.size() || clean.size() != p_hat.size())
    throw InvalidArgument("make_pseudo_labels: inputs must cover the same samples");
  Partition part;
  for (std::size_t i = 0; i < p_hat.size(); ++i) {
    if (clean[i]) {
      part.clean.push_back(i);
    } else {
      part.noisy.push_back(i);
      part.pseudo.push_back(pseudo_label(p_hat[i], labels[i]));
    }
  }
  return part;
}

SelectionState denoise_pass(std::span<const ProbDist> predictions, const Mat& embeddings,
                            std::span<const std::uint16_t> labels, std::size_t n_classes,
                            const ClusterAssignment& clusters, SoftLabelStore& store,
                            std::span<const std::size_t> prev_clean_counts, const DenoiseConfig& config) {
  const std::size_t n = predictions.size();
  if (labels.size() != n) throw InvalidArgument("denoise_pass: one label per prediction required");
  if (!store.initialized) store.initialize(predictions);

  SelectionState st;
  st.p_hat = corefine(predictions, store, clusters, embeddings, config.beta);

  std::vector<std::size_t> class_counts(n_classes, 0);
  for (auto y : labels) ++class_counts.at(y);
  // Classes absent from the observed labels count as size 1.
  for (auto& c : class_counts) c = std::max<std::size_t>(c, 1);
  st.weights = class_weights(prev_clean_counts, class_counts, config.epsilon);
  const Vec applied = config.use_class_weights ? st.weights.normalized : Vec::Ones(static_cast<Eigen::Index>(n_classes));

  st.divergences.resize(n);
  for (std::size_t i = 0; i < n; ++i) st.divergences[i] = jsd(st.p_hat[i], ProbDist::one_hot(n_classes, labels[i]));

  try {
    st.gmm = fit_gmm_2(st.divergences, config.gmm_tol, config.gmm_max_iter);
  } catch (const DegenerateInput& e) {
    st.gmm_warning = e.what();
  }

  st.selection = select_clean(st.p_hat, labels, clusters, applied, st.gmm ? &*st.gmm : nullptr, st.divergences);
  st.partition = make_pseudo_labels(st.p_hat, labels, st.selection.clean);
  st.clean_counts.assign(n_classes, 0);
  for (auto i : st.partition.clean) ++st.clean_counts[labels[i]];
  return st;
}

void update_store(SoftLabelStore& store, const Partition& partition, std::span<const std::uint16_t> labels,
                  std::size_t n_classes) {
  if (!store.initialized) throw InvalidState("update_store: store not initialized");
  for (auto i : partition.clean) store.q.at(i) = ProbDist::one_hot(n_classes, labels[i]);
  for (std::size_t t = 0; t < partition.noisy.size(); ++t) store.q.at(partition.noisy[t]) = partition.pseudo[t];
}

}  // namespace nlr
