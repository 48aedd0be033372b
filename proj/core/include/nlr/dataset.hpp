#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "nlr/numerics.hpp"

namespace nlr {

using Frames = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Sample {
  std::uint32_t id = 0;
  Frames frames;  // F x D
  std::uint16_t observed_label = 0;
  std::uint16_t true_label = 0;  // evaluation only
  bool flipped = false;

  bool operator==(const Sample& other) const;
};

struct CorpusSpec {
  std::size_t n_classes = 2;
  std::vector<std::size_t> samples_per_class{1, 1};
  std::size_t frames = 32;
  std::size_t features = 8;
  double class_separation = 6.0;
  double frame_noise_sigma = 0.5;
  std::uint64_t seed = 7;

  std::size_t total() const;
  /// Throws InvalidArgument naming the offending field.
  void validate() const;
  bool operator==(const CorpusSpec&) const = default;
};

/// Per-class generative parameters drawn once from the corpus seed.
struct ClassPattern {
  Vec prototype;  // mu_c
  Vec amplitude;  // A_c
  double frequency = 1.0;
};

std::vector<ClassPattern> class_patterns(const CorpusSpec& spec);

/// Training corpus: ids 0..n-1 in class-major order, labels clean.
std::vector<Sample> generate(const CorpusSpec& spec);

/// Held-out split sharing the class patterns of `spec` but drawing fresh
/// phases and noise from `salt`.
std::vector<Sample> generate_holdout(const CorpusSpec& spec, std::size_t per_class, std::uint64_t salt);

/// Flips exactly round(ratio * n) labels, each to a uniformly chosen other
/// class. Returns the flip mask indexed like `samples`.
std::vector<bool> inject_noise(std::vector<Sample>& samples, std::size_t n_classes, double noise_ratio,
                               std::uint64_t seed);

struct AugmentConfig {
  double jitter_sigma = 0.05;
  double scale_lo = 0.8;
  double scale_hi = 1.2;
  double dropout = 0.1;

  static AugmentConfig none() { return {0.0, 1.0, 1.0, 0.0}; }
  bool operator==(const AugmentConfig&) const = default;
};

struct ClipPair {
  Mat clip_a;  // T x D
  Mat clip_b;
  std::uint32_t source_id = 0;
};

/// Single random crop of `clip_len` frames with augmentation applied.
Mat sample_clip(const Sample& sample, std::size_t clip_len, std::mt19937_64& rng, const AugmentConfig& aug = {});

ClipPair make_clip_pair(const Sample& sample, std::size_t clip_len, std::mt19937_64& rng,
                        const AugmentConfig& aug = {});

/// Whole sequence as double precision, no augmentation.
Mat full_sequence(const Sample& sample);

// --- corpus file -----------------------------------------------------------

class CorpusFileError : public std::runtime_error {
 public:
  enum class Code { Io, BadMagic, BadHeader, Truncated };
  CorpusFileError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

struct Corpus {
  CorpusSpec spec;
  double noise_ratio = 0.0;
  std::vector<Sample> samples;
};

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

/// Splitmix-style mix used to derive independent per-sample seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace nlr
