#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "nlr/dataset.hpp"
#include "nlr/denoise.hpp"

namespace nlr {

/// Raised for malformed or out-of-range configuration; `field()` names the
/// offending key.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string field, const std::string& message)
      : InvalidArgument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RunConfig {
  // Objective temperatures and weights.
  double tau1 = 0.3;
  double tau2 = 0.5;
  double tau3 = 2.0;
  double alpha = 8.0;
  double beta = 0.5;
  double epsilon = 0.05;
  double gamma_u0 = 50.0;

  // Stage boundaries: [0, T1) representation learning, [T1, T2) warm-up,
  // [T2, T_max) selection and semi-supervised training.
  std::size_t T1 = 10;
  std::size_t T2 = 15;
  std::size_t T_max = 40;

  std::size_t batch_size = 16;  // N_b clip pairs per step
  double lr0 = 1e-3;
  double weight_decay = 1e-4;
  std::size_t clip_len = 16;
  std::optional<double> expected_noise_ratio;  // defaults to the corpus' injected ratio
  double memory_momentum = 0.5;

  std::uint64_t model_seed = 1;
  std::uint64_t shuffle_seed = 2;
  bool deterministic = true;

  std::size_t hidden = 64;
  std::size_t embedding = 64;
  std::size_t projection = 16;

  std::size_t holdout_per_class = 50;
  bool baseline = false;
  bool use_ucrl = true;
  bool use_class_weights = true;

  AugmentConfig augment{};
  double gmm_tol = 1e-8;
  std::size_t gmm_max_iter = 200;

  std::string corpus;  // optional path, CLI --corpus takes precedence

  void validate() const;
  DenoiseConfig denoise_config() const;
  bool operator==(const RunConfig&) const = default;
};

/// Defaults overlaid with the keys present in `json_text`. Unknown keys and
/// wrong types raise ConfigError.
RunConfig run_config_from_json(std::string_view json_text, const RunConfig& defaults = {});
std::string run_config_to_json(const RunConfig& config);

/// Accepts `samples_per_class` as a list or a single count replicated over
/// `n_classes`.
CorpusSpec corpus_spec_from_json(std::string_view json_text);
std::string corpus_spec_to_json(const CorpusSpec& spec);

}  // namespace nlr
