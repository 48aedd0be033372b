#include "nlr/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "json.hpp"

namespace nlr {

namespace {

constexpr char kModelMagic[8] = {'N', 'L', 'P', 'M', '0', '0', '0', '1'};

ParamTensor xavier(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  return ParamTensor(std::move(m));
}

ParamTensor zeros(std::size_t rows) { return ParamTensor(Mat::Zero(static_cast<Eigen::Index>(rows), 1)); }

}  // namespace

void ModelDims::validate() const {
  if (input < 1 || hidden < 1 || embedding < 1 || projection < 1 || classes < 1)
    throw InvalidArgument("ModelDims: all dimensions must be at least 1");
}

std::array<ParamTensor*, EncoderModel::kNumParams> EncoderModel::params() {
  return {&w1, &b1, &w2, &b2, &wv, &wd, &wc, &bc};
}

std::array<const ParamTensor*, EncoderModel::kNumParams> EncoderModel::params() const {
  return {&w1, &b1, &w2, &b2, &wv, &wd, &wc, &bc};
}

void EncoderModel::zero_grad() {
  for (auto* p : params()) p->zero_grad();
}

bool EncoderModel::finite() const {
  for (const auto* p : params())
    if (!p->value.allFinite()) return false;
  return true;
}

EncoderModel init_model(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  std::mt19937_64 rng(seed);
  EncoderModel m;
  m.dims = dims;
  m.w1 = xavier(dims.hidden, dims.input, rng);
  m.b1 = zeros(dims.hidden);
  m.w2 = xavier(dims.embedding, dims.hidden, rng);
  m.b2 = zeros(dims.embedding);
  m.wv = xavier(dims.projection, dims.embedding, rng);
  m.wd = xavier(dims.embedding, dims.projection, rng);
  m.wc = xavier(dims.classes, dims.embedding, rng);
  m.bc = zeros(dims.classes);
  return m;
}

namespace {

void check_clip(const EncoderModel& model, const Mat& clip) {
  if (clip.rows() < 1 || static_cast<std::size_t>(clip.cols()) != model.dims.input)
    throw InvalidArgument("forward: clip must be T x D with D = " + std::to_string(model.dims.input));
}

Vec backbone(const EncoderModel& model, const Mat& clip, Mat* h1_out, Mat* h2_out) {
  Mat h1 = ((clip * model.w1.value.transpose()).rowwise() + model.b1.value.col(0).transpose()).array().tanh();
  Mat h2 = ((h1 * model.w2.value.transpose()).rowwise() + model.b2.value.col(0).transpose()).array().tanh();
  Vec u = h2.colwise().mean().transpose();
  if (h1_out) *h1_out = std::move(h1);
  if (h2_out) *h2_out = std::move(h2);
  return u;
}

}  // namespace

ForwardCache forward(const EncoderModel& model, const Mat& clip) {
  check_clip(model, clip);
  ForwardCache c;
  c.x = clip;
  c.u = backbone(model, clip, &c.h1, &c.h2);
  c.z = model.wv.value * c.u;
  c.v = l2_normalize(c.z);
  c.u_hat = model.wd.value * c.v;
  c.logits = model.wc.value * c.u + model.bc.value.col(0);
  c.p = softmax(c.logits, 1.0);
  return c;
}

ForwardOutputs infer(const EncoderModel& model, const Mat& clip) {
  check_clip(model, clip);
  ForwardOutputs out;
  out.u = backbone(model, clip, nullptr, nullptr);
  out.v = l2_normalize(model.wv.value * out.u);
  out.logits = model.wc.value * out.u + model.bc.value.col(0);
  out.p = softmax(out.logits, 1.0);
  return out;
}

void backward(EncoderModel& model, const ForwardCache& cache, const OutputGrads& grads) {
  const auto E = static_cast<Eigen::Index>(model.dims.embedding);
  const auto d = static_cast<Eigen::Index>(model.dims.projection);
  Vec du = grads.du.size() ? grads.du : Vec::Zero(E);
  Vec dv = grads.dv.size() ? grads.dv : Vec::Zero(d);

  if (grads.du_hat.size()) {
    model.wd.grad.noalias() += grads.du_hat * cache.v.transpose();
    dv.noalias() += model.wd.value.transpose() * grads.du_hat;
  }
  if (grads.dlogits.size()) {
    model.wc.grad.noalias() += grads.dlogits * cache.u.transpose();
    model.bc.grad.col(0) += grads.dlogits;
    du.noalias() += model.wc.value.transpose() * grads.dlogits;
  }
  if (!dv.isZero(0.0)) {
    const Vec dz = l2_normalize_backward(cache.z, dv);
    model.wv.grad.noalias() += dz * cache.u.transpose();
    du.noalias() += model.wv.value.transpose() * dz;
  }
  if (du.isZero(0.0)) return;

  const double inv_t = 1.0 / static_cast<double>(cache.x.rows());
  // dL/dA2 for every frame: broadcast du/T through tanh'.
  Mat da2 = (1.0 - cache.h2.array().square()).matrix();
  da2.array().rowwise() *= (du * inv_t).transpose().array();
  model.w2.grad.noalias() += da2.transpose() * cache.h1;
  model.b2.grad.col(0) += da2.colwise().sum().transpose();
  Mat da1 = da2 * model.w2.value;
  da1.array() *= 1.0 - cache.h1.array().square();
  model.w1.grad.noalias() += da1.transpose() * cache.x;
  model.b1.grad.col(0) += da1.colwise().sum().transpose();
}

void save_checkpoint(const EncoderModel& model, const std::filesystem::path& path) {
  const auto& dm = model.dims;
  nlohmann::json header = {{"D", dm.input},      {"H", dm.hidden},  {"E", dm.embedding},
                           {"d", dm.projection}, {"K", dm.classes}, {"order", EncoderModel::kParamNames}};
  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint " + path.string() + " for writing");
  os.write(kModelMagic, sizeof(kModelMagic));
  const auto len = static_cast<std::uint32_t>(text.size());
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(text.data(), len);
  for (const auto* p : model.params()) {
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        const auto f = static_cast<float>(p->value(r, c));
        os.write(reinterpret_cast<const char*>(&f), sizeof(f));
      }
  }
  if (!os) throw std::runtime_error("write failed for checkpoint " + path.string());
}

EncoderModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8] = {};
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a model checkpoint (magic mismatch): " + path.string());
  std::uint32_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  is.read(text.data(), len);
  if (!is) throw std::runtime_error("checkpoint truncated in header: " + path.string());

  const auto header = nlohmann::json::parse(text);
  ModelDims dims;
  dims.input = header.at("D").get<std::size_t>();
  dims.hidden = header.at("H").get<std::size_t>();
  dims.embedding = header.at("E").get<std::size_t>();
  dims.projection = header.at("d").get<std::size_t>();
  dims.classes = header.at("K").get<std::size_t>();
  EncoderModel model = init_model(dims, 0);
  for (auto* p : model.params()) {
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        float f = 0.0f;
        is.read(reinterpret_cast<char*>(&f), sizeof(f));
        p->value(r, c) = f;
      }
    p->zero_grad();
  }
  if (!is) throw std::runtime_error("checkpoint truncated in parameters: " + path.string());
  return model;
}

}  // namespace nlr
