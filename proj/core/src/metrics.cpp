#include "nlr/metrics.hpp"

namespace nlr {

SelectionMetrics compute_metrics(const Partition& partition, const std::vector<bool>& flipped,
                                 std::span<const std::uint16_t> observed, std::span<const std::uint16_t> truth,
                                 std::size_t n_classes) {
  const std::size_t n = flipped.size();
  if (observed.size() != n || truth.size() != n)
    throw InvalidArgument("compute_metrics: labels and flip mask must cover the same samples");

  SelectionMetrics m;
  std::vector<std::size_t> clean_total(n_classes, 0), clean_hit(n_classes, 0);
  std::vector<std::size_t> selected(n_classes, 0), selected_true(n_classes, 0);
  std::size_t total_clean = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (!flipped[i]) {
      ++total_clean;
      ++clean_total.at(truth[i]);
    }

  std::size_t hits = 0;
  for (auto i : partition.clean) {
    ++selected.at(observed[i]);
    if (!flipped.at(i)) {
      ++hits;
      ++selected_true[observed[i]];
      ++clean_hit[truth[i]];
    }
  }
  m.precision_defined = !partition.clean.empty();
  m.precision = m.precision_defined ? static_cast<double>(hits) / static_cast<double>(partition.clean.size()) : 0.0;
  m.recall = total_clean ? static_cast<double>(hits) / static_cast<double>(total_clean) : 0.0;

  std::size_t n_flipped = 0;
  for (bool f : flipped) n_flipped += f ? 1 : 0;
  std::size_t corrected = 0;
  for (std::size_t t = 0; t < partition.noisy.size(); ++t) {
    const auto i = partition.noisy[t];
    if (flipped.at(i) && partition.pseudo[t].argmax() == truth[i]) ++corrected;
  }
  m.correction = n_flipped ? static_cast<double>(corrected) / static_cast<double>(n_flipped) : 0.0;

  m.per_class_precision.resize(n_classes);
  m.per_class_recall.resize(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    m.per_class_precision[c] = selected[c] ? static_cast<double>(selected_true[c]) / static_cast<double>(selected[c]) : 0.0;
    m.per_class_recall[c] = clean_total[c] ? static_cast<double>(clean_hit[c]) / static_cast<double>(clean_total[c]) : 0.0;
  }
  return m;
}

double top1_accuracy(const EncoderModel& model, std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    const auto out = infer(model, full_sequence(s));
    if (out.p.argmax() == s.true_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace nlr
