#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "nlr/config.hpp"
#include "nlr/dataset.hpp"
#include "nlr/denoise.hpp"
#include "nlr/encoder.hpp"
#include "nlr/losses.hpp"
#include "nlr/metrics.hpp"
#include "nlr/optimizer.hpp"

namespace nlr {

namespace stage {
inline constexpr std::string_view kUcrl = "ucrl";
inline constexpr std::string_view kUcrlSkipped = "ucrl_skipped";
inline constexpr std::string_view kWarmup = "warmup";
inline constexpr std::string_view kSemisup = "semisup";
inline constexpr std::string_view kBaseline = "baseline";
}  // namespace stage

/// Per-batch means of each objective term over one epoch.
struct LossBreakdown {
  double cont = 0.0;
  double recon = 0.0;
  double id = 0.0;
  double fd = 0.0;
  double ce_mix = 0.0;
  double clean_ce = 0.0;
  double pseudo_l2 = 0.0;
  double total = 0.0;
  std::size_t batches = 0;
};

struct SelectionSummary {
  std::size_t n_clean = 0;
  std::size_t n_noisy = 0;
  SelectionMetrics metrics;
  std::vector<double> class_weights;
  std::optional<Gmm2> gmm;
  std::string gmm_warning;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::string stage;
  double lr = 0.0;
  double gamma_u = 0.0;
  LossBreakdown losses;
  std::optional<SelectionSummary> selection;
  double train_top1 = 0.0;  // against true labels
  double val_top1 = 0.0;
  double test_top1 = 0.0;
  double wall_clock_s = 0.0;  // 0 under determinism
};

std::string epoch_record_to_json(const EpochRecord& record);

struct FinalMetrics {
  double val_top1 = 0.0;
  double test_top1 = 0.0;
  bool selection_ran = false;
  SelectionMetrics selection;
};

std::string final_metrics_to_json(const FinalMetrics& metrics, const RunConfig& config);

/// Runs the three training stages (or the noisy-label baseline) over one
/// corpus. Stages must be run in order; each advances the epoch counter
/// to its end boundary.
class Trainer {
 public:
  using EpochCallback = std::function<void(const EpochRecord&)>;

  Trainer(RunConfig config, Corpus corpus);

  void on_epoch(EpochCallback cb) { on_epoch_ = std::move(cb); }

  void run_stage1();   // epochs [0, T1)
  void run_warmup();   // epochs [T1, T2)
  void run_semisup();  // epochs [T2, T_max)
  void run_baseline(); // epochs [0, T_max) of plain cross-entropy on observed labels
  void run();          // whichever of the above the config asks for

  double gamma_u(std::size_t epoch) const;
  double learning_rate(std::size_t epoch) const;

  const RunConfig& config() const { return config_; }
  const EncoderModel& model() const { return model_; }
  EncoderModel& model() { return model_; }
  const std::vector<Sample>& train_samples() const { return train_; }
  const std::vector<Sample>& val_samples() const { return val_; }
  const std::vector<Sample>& test_samples() const { return test_; }
  const std::vector<EpochRecord>& records() const { return records_; }
  const std::optional<SelectionState>& last_selection() const { return last_selection_; }
  const MemoryBank& memory_bank() const { return bank_; }
  std::size_t next_epoch() const { return epoch_; }
  FinalMetrics final_metrics() const;

  /// Normalized embeddings and predictions for every training sample.
  void embed_all(Mat& embeddings, std::vector<ProbDist>& predictions) const;

 private:
  struct ClipBatch {
    std::vector<std::size_t> samples;  // indices into train_
    std::vector<Mat> clips;            // 2 * samples.size(), pair layout
    std::vector<ForwardCache> caches;
  };

  std::vector<std::vector<std::size_t>> make_batches();
  ClipBatch forward_batch(const std::vector<std::size_t>& samples);
  /// Contrastive + reconstruction terms; accumulates into `dv` and backprop
  /// of the reconstruction gradients.
  void unsupervised_terms(ClipBatch& batch, Mat& dv, LossBreakdown& acc, double& total);
  void optimizer_step(std::size_t epoch);
  void finish_epoch(std::string_view stage_tag, LossBreakdown losses, std::optional<SelectionSummary> selection,
                    double start_seconds);
  void check_finite(double loss, std::string_view stage_tag) const;

  RunConfig config_;
  CorpusSpec spec_;
  double noise_ratio_ = 0.0;
  std::vector<Sample> train_, val_, test_;
  std::vector<std::uint16_t> observed_, truth_;
  std::vector<bool> flipped_;
  std::size_t n_classes_ = 0;

  EncoderModel model_;
  AdamW optimizer_;
  std::mt19937_64 rng_;
  MemoryBank bank_;
  SoftLabelStore store_;
  std::vector<std::size_t> prev_clean_counts_;
  std::optional<SelectionState> last_selection_;
  std::optional<SelectionMetrics> last_metrics_;

  std::size_t epoch_ = 0;
  std::vector<EpochRecord> records_;
  EpochCallback on_epoch_;
};

}  // namespace nlr
