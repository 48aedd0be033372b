#include "nlr/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace nlr {

void AdamW::step(std::span<ParamTensor* const> params, double lr) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw InvalidArgument("AdamW::step: parameter list changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ParamTensor& p = *params[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      throw InvalidArgument("AdamW::step: gradient shape differs from parameter shape");
    m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * p.grad;
    v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * p.grad.cwiseProduct(p.grad);
    if (opt_.weight_decay != 0.0) p.value *= 1.0 - lr * opt_.weight_decay;
    p.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + opt_.eps);
  }
}

double cosine_lr(double lr0, std::size_t epoch, std::size_t total_epochs) {
  if (total_epochs == 0) return lr0;
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(total_epochs)));
}

}  // namespace nlr
