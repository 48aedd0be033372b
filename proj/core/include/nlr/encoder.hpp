#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>

#include "nlr/numerics.hpp"

namespace nlr {

struct ModelDims {
  std::size_t input = 8;       // D, features per frame
  std::size_t hidden = 64;     // H
  std::size_t embedding = 64;  // E, high-dimensional embedding u
  std::size_t projection = 16; // d, low-dimensional embedding v
  std::size_t classes = 8;     // K

  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

/// Per-frame two-layer tanh MLP with temporal mean pooling, followed by a
/// linear projection (to v), a linear decoder (v back to u) and an affine
/// softmax classifier reading u.
struct EncoderModel {
  ModelDims dims;
  ParamTensor w1, b1;  // H x D, H x 1
  ParamTensor w2, b2;  // E x H, E x 1
  ParamTensor wv;      // d x E
  ParamTensor wd;      // E x d
  ParamTensor wc, bc;  // K x E, K x 1

  static constexpr std::size_t kNumParams = 8;
  static constexpr std::array<std::string_view, kNumParams> kParamNames = {"w1", "b1", "w2", "b2",
                                                                           "wv", "wd", "wc", "bc"};

  std::array<ParamTensor*, kNumParams> params();
  std::array<const ParamTensor*, kNumParams> params() const;
  void zero_grad();
  bool finite() const;
};

EncoderModel init_model(const ModelDims& dims, std::uint64_t seed);

struct ForwardOutputs {
  Vec u;       // E
  Vec v;       // d, unit norm
  Vec u_hat;   // E, decoder reconstruction of u from v
  Vec logits;  // K
  ProbDist p;
};

/// Forward outputs plus the activations backward() needs.
struct ForwardCache : ForwardOutputs {
  Mat x;   // T x D
  Mat h1;  // T x H
  Mat h2;  // T x E
  Vec z;   // unnormalized projection
};

ForwardCache forward(const EncoderModel& model, const Mat& clip);

/// Cheaper pass producing only v and p (no decoder, no cache).
ForwardOutputs infer(const EncoderModel& model, const Mat& clip);

/// Upstream gradients with respect to the forward outputs. Empty vectors are
/// treated as zero.
struct OutputGrads {
  Vec du;
  Vec dv;
  Vec du_hat;
  Vec dlogits;
};

/// Accumulates parameter gradients into model.*.grad.
void backward(EncoderModel& model, const ForwardCache& cache, const OutputGrads& grads);

void save_checkpoint(const EncoderModel& model, const std::filesystem::path& path);
EncoderModel load_checkpoint(const std::filesystem::path& path);

}  // namespace nlr
