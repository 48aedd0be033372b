#include "nlr/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "nlr/config.hpp"

namespace nlr {

static_assert(std::endian::native == std::endian::little, "corpus format assumes a little-endian host");

namespace {

constexpr char kCorpusMagic[8] = {'N', 'L', 'P', 'C', '0', '0', '0', '1'};
constexpr std::uint64_t kPatternStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kTrainSalt = 0;

Sample draw_sample(const CorpusSpec& spec, const ClassPattern& pattern, std::uint32_t id, std::uint16_t cls,
                   std::uint64_t salt) {
  std::mt19937_64 rng(derive_seed(spec.seed, id, salt + 1));
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double phase = phase_dist(rng);
  const auto F = static_cast<Eigen::Index>(spec.frames);
  const auto D = static_cast<Eigen::Index>(spec.features);

  Sample s;
  s.id = id;
  s.observed_label = cls;
  s.true_label = cls;
  s.frames.resize(F, D);
  for (Eigen::Index t = 0; t < F; ++t) {
    const double wave =
        std::sin(2.0 * std::numbers::pi * pattern.frequency * static_cast<double>(t) / static_cast<double>(F) + phase);
    for (Eigen::Index k = 0; k < D; ++k) {
      double x = pattern.prototype[k] + pattern.amplitude[k] * wave;
      if (spec.frame_noise_sigma > 0.0) x += spec.frame_noise_sigma * noise(rng);
      s.frames(t, k) = static_cast<float>(x);
    }
  }
  return s;
}

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw CorpusFileError(CorpusFileError::Code::Truncated, "corpus file truncated");
  return value;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed ^ (a * 0xbf58476d1ce4e5b9ULL) ^ (b * 0x94d049bb133111ebULL);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool Sample::operator==(const Sample& other) const {
  return id == other.id && observed_label == other.observed_label && true_label == other.true_label &&
         flipped == other.flipped && frames.rows() == other.frames.rows() && frames.cols() == other.frames.cols() &&
         std::memcmp(frames.data(), other.frames.data(), sizeof(float) * static_cast<std::size_t>(frames.size())) == 0;
}

std::size_t CorpusSpec::total() const {
  std::size_t n = 0;
  for (auto c : samples_per_class) n += c;
  return n;
}

void CorpusSpec::validate() const {
  if (n_classes < 2) throw InvalidArgument("n_classes: must be at least 2");
  if (n_classes > 65535) throw InvalidArgument("n_classes: must fit in 16 bits");
  if (samples_per_class.size() != n_classes)
    throw InvalidArgument("samples_per_class: expected one count per class");
  for (auto c : samples_per_class)
    if (c < 1) throw InvalidArgument("samples_per_class: every count must be at least 1");
  if (frames < 1) throw InvalidArgument("frames: must be positive");
  if (features < 1) throw InvalidArgument("features: must be positive");
  if (!(class_separation > 0.0)) throw InvalidArgument("class_separation: must be positive");
  if (!(frame_noise_sigma >= 0.0)) throw InvalidArgument("frame_noise_sigma: must be non-negative");
}

std::vector<ClassPattern> class_patterns(const CorpusSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.seed, kPatternStream));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> amp(0.5, 1.5);
  std::uniform_real_distribution<double> freq(1.0, 3.0);
  const auto D = static_cast<Eigen::Index>(spec.features);

  // Prototypes live on a sphere whose radius grows until the minimum
  // pairwise distance reaches the requested separation.
  double radius = spec.class_separation;
  std::vector<ClassPattern> patterns;
  patterns.reserve(spec.n_classes);
  while (patterns.size() < spec.n_classes) {
    bool placed = false;
    for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
      Vec dir(D);
      for (Eigen::Index k = 0; k < D; ++k) dir[k] = gauss(rng);
      if (dir.norm() < 1e-9) continue;
      Vec mu = radius * dir.normalized();
      placed = std::all_of(patterns.begin(), patterns.end(),
                           [&](const ClassPattern& p) { return (p.prototype - mu).norm() >= spec.class_separation; });
      if (placed) {
        ClassPattern p;
        p.prototype = std::move(mu);
        patterns.push_back(std::move(p));
      }
    }
    if (!placed) radius *= 1.05;
  }
  for (auto& p : patterns) {
    p.amplitude.resize(D);
    for (Eigen::Index k = 0; k < D; ++k) p.amplitude[k] = (gauss(rng) < 0.0 ? -1.0 : 1.0) * amp(rng);
    p.frequency = freq(rng);
  }
  return patterns;
}

std::vector<Sample> generate(const CorpusSpec& spec) {
  const auto patterns = class_patterns(spec);
  std::vector<Sample> out;
  out.reserve(spec.total());
  std::uint32_t id = 0;
  for (std::size_t c = 0; c < spec.n_classes; ++c)
    for (std::size_t i = 0; i < spec.samples_per_class[c]; ++i, ++id)
      out.push_back(draw_sample(spec, patterns[c], id, static_cast<std::uint16_t>(c), kTrainSalt));
  return out;
}

std::vector<Sample> generate_holdout(const CorpusSpec& spec, std::size_t per_class, std::uint64_t salt) {
  if (salt == kTrainSalt) throw InvalidArgument("generate_holdout: salt 0 is reserved for the training split");
  const auto patterns = class_patterns(spec);
  std::vector<Sample> out;
  out.reserve(per_class * spec.n_classes);
  std::uint32_t id = 0;
  for (std::size_t c = 0; c < spec.n_classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i, ++id)
      out.push_back(draw_sample(spec, patterns[c], id, static_cast<std::uint16_t>(c), salt));
  return out;
}

std::vector<bool> inject_noise(std::vector<Sample>& samples, std::size_t n_classes, double noise_ratio,
                               std::uint64_t seed) {
  if (n_classes < 2) throw InvalidArgument("inject_noise: need at least two classes");
  if (!(noise_ratio >= 0.0 && noise_ratio < 1.0)) throw InvalidArgument("inject_noise: ratio must lie in [0, 1)");
  const std::size_t n = samples.size();
  const auto n_flip = static_cast<std::size_t>(std::llround(noise_ratio * static_cast<double>(n)));

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  // Partial Fisher-Yates: the first n_flip slots are a uniform subset.
  for (std::size_t i = 0; i < n_flip; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }

  std::vector<bool> mask(n, false);
  for (auto& s : samples) {
    s.observed_label = s.true_label;
    s.flipped = false;
  }
  std::uniform_int_distribution<std::size_t> other(0, n_classes - 2);
  for (std::size_t i = 0; i < n_flip; ++i) {
    Sample& s = samples[order[i]];
    const std::size_t r = other(rng);
    s.observed_label = static_cast<std::uint16_t>(r < s.true_label ? r : r + 1);
    s.flipped = true;
    mask[order[i]] = true;
  }
  return mask;
}

Mat sample_clip(const Sample& sample, std::size_t clip_len, std::mt19937_64& rng, const AugmentConfig& aug) {
  const auto F = static_cast<std::size_t>(sample.frames.rows());
  if (clip_len == 0 || clip_len > F) throw InvalidArgument("sample_clip: clip_len must lie in [1, F]");
  const auto D = sample.frames.cols();
  const auto T = static_cast<Eigen::Index>(clip_len);

  std::uniform_int_distribution<std::size_t> start_dist(0, F - clip_len);
  const auto start = static_cast<Eigen::Index>(start_dist(rng));
  Mat clip = sample.frames.block(start, 0, T, D).cast<double>();

  std::uniform_real_distribution<double> scale(aug.scale_lo, aug.scale_hi);
  std::bernoulli_distribution drop(aug.dropout);
  std::normal_distribution<double> jitter(0.0, 1.0);
  if (aug.jitter_sigma > 0.0)
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index k = 0; k < D; ++k) clip(t, k) += aug.jitter_sigma * jitter(rng);
  for (Eigen::Index k = 0; k < D; ++k) {
    const double s = aug.scale_hi > aug.scale_lo ? scale(rng) : aug.scale_lo;
    const bool dropped = aug.dropout > 0.0 && drop(rng);
    clip.col(k) *= dropped ? 0.0 : s;
  }
  return clip;
}

ClipPair make_clip_pair(const Sample& sample, std::size_t clip_len, std::mt19937_64& rng, const AugmentConfig& aug) {
  ClipPair pair;
  pair.clip_a = sample_clip(sample, clip_len, rng, aug);
  pair.clip_b = sample_clip(sample, clip_len, rng, aug);
  pair.source_id = sample.id;
  return pair;
}

Mat full_sequence(const Sample& sample) { return sample.frames.cast<double>(); }

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  const auto& spec = corpus.spec;
  const std::size_t F = spec.frames;
  const std::size_t D = spec.features;
  for (const auto& s : corpus.samples) {
    if (static_cast<std::size_t>(s.frames.rows()) != F || static_cast<std::size_t>(s.frames.cols()) != D)
      throw InvalidArgument("save_corpus: sample frame shape disagrees with spec");
  }

  nlohmann::json header = {
      {"spec", nlohmann::json::parse(corpus_spec_to_json(spec))},
      {"n", corpus.samples.size()},
      {"K", spec.n_classes},
      {"F", F},
      {"D", D},
      {"noise_ratio", corpus.noise_ratio},
  };
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CorpusFileError(CorpusFileError::Code::Io, "cannot open " + path.string() + " for writing");
  os.write(kCorpusMagic, sizeof(kCorpusMagic));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  const char pad[3] = {0, 0, 0};
  for (const auto& s : corpus.samples) {
    put<std::uint32_t>(os, s.id);
    put<std::uint16_t>(os, s.observed_label);
    put<std::uint16_t>(os, s.true_label);
    put<std::uint8_t>(os, s.flipped ? 1 : 0);
    os.write(pad, sizeof(pad));
    os.write(reinterpret_cast<const char*>(s.frames.data()), static_cast<std::streamsize>(sizeof(float) * F * D));
  }
  if (!os) throw CorpusFileError(CorpusFileError::Code::Io, "write failed for " + path.string());
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CorpusFileError(CorpusFileError::Code::Io, "cannot open " + path.string());

  char magic[8] = {};
  is.read(magic, sizeof(magic));
  if (!is) throw CorpusFileError(CorpusFileError::Code::Truncated, "corpus file truncated in magic");
  if (std::memcmp(magic, kCorpusMagic, sizeof(magic)) != 0)
    throw CorpusFileError(CorpusFileError::Code::BadMagic, "not a corpus file (magic mismatch)");

  const auto len = take<std::uint32_t>(is);
  std::string text(len, '\0');
  is.read(text.data(), len);
  if (!is) throw CorpusFileError(CorpusFileError::Code::Truncated, "corpus file truncated in header");

  Corpus corpus;
  std::size_t n = 0;
  try {
    const auto header = nlohmann::json::parse(text);
    corpus.spec = corpus_spec_from_json(header.at("spec").dump());
    n = header.at("n").get<std::size_t>();
    corpus.noise_ratio = header.value("noise_ratio", 0.0);
    if (header.at("K").get<std::size_t>() != corpus.spec.n_classes || header.at("F").get<std::size_t>() != corpus.spec.frames ||
        header.at("D").get<std::size_t>() != corpus.spec.features)
      throw InvalidArgument("header dims disagree with spec");
  } catch (const std::exception& e) {
    throw CorpusFileError(CorpusFileError::Code::BadHeader, std::string("bad corpus header: ") + e.what());
  }

  const auto F = static_cast<Eigen::Index>(corpus.spec.frames);
  const auto D = static_cast<Eigen::Index>(corpus.spec.features);
  corpus.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.id = take<std::uint32_t>(is);
    s.observed_label = take<std::uint16_t>(is);
    s.true_label = take<std::uint16_t>(is);
    s.flipped = take<std::uint8_t>(is) != 0;
    char pad[3];
    is.read(pad, sizeof(pad));
    s.frames.resize(F, D);
    is.read(reinterpret_cast<char*>(s.frames.data()), static_cast<std::streamsize>(sizeof(float) * F * D));
    if (!is) throw CorpusFileError(CorpusFileError::Code::Truncated, "corpus file truncated in record " + std::to_string(i));
    corpus.samples.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace nlr
