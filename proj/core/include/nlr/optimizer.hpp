#pragma once

#include <span>
#include <vector>

#include "nlr/numerics.hpp"

namespace nlr {

/// Adam with decoupled weight decay. Moment buffers are created lazily on the
/// first step and keyed by position in the parameter list.
class AdamW {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  AdamW() = default;
  explicit AdamW(Options options) : opt_(options) {}

  void step(std::span<ParamTensor* const> params, double lr);
  std::size_t steps() const { return t_; }
  const Options& options() const { return opt_; }

 private:
  Options opt_{};
  std::size_t t_ = 0;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
};

/// lr0 * (1 + cos(pi * epoch / total_epochs)) / 2; lr0 when total_epochs is 0.
double cosine_lr(double lr0, std::size_t epoch, std::size_t total_epochs);

}  // namespace nlr
