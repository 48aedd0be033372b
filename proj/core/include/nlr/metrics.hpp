#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nlr/dataset.hpp"
#include "nlr/denoise.hpp"
#include "nlr/encoder.hpp"

namespace nlr {

struct SelectionMetrics {
  double precision = 0.0;  // |X & clean| / |X|, 0 when X is empty
  bool precision_defined = false;
  double recall = 0.0;      // |X & clean| / |clean|
  double correction = 0.0;  // flipped samples whose pseudo-label argmax is the true label
  std::vector<double> per_class_precision;  // by observed label
  std::vector<double> per_class_recall;     // over truly clean samples of each class
};

/// `flipped[i]` marks samples whose observed label differs from the truth.
SelectionMetrics compute_metrics(const Partition& partition, const std::vector<bool>& flipped,
                                 std::span<const std::uint16_t> observed, std::span<const std::uint16_t> truth,
                                 std::size_t n_classes);

/// Fraction of samples whose argmax prediction on the full sequence equals
/// the true label. Empty input yields 0.
double top1_accuracy(const EncoderModel& model, std::span<const Sample> samples);

}  // namespace nlr
