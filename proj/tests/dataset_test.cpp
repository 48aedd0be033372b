#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "nlr/dataset.hpp"
#include "support/oracles.hpp"

using namespace nlr;
namespace fs = std::filesystem;

namespace {

CorpusSpec small_spec() {
  CorpusSpec s;
  s.n_classes = 2;
  s.samples_per_class = {5, 5};
  s.frames = 32;
  s.features = 8;
  s.class_separation = 4.0;
  s.frame_noise_sigma = 0.1;
  s.seed = 7;
  return s;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "nlr_dataset_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(CorpusSpec, Validation) {
  auto s = small_spec();
  EXPECT_NO_THROW(s.validate());
  s.n_classes = 1;
  s.samples_per_class = {3};
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = small_spec();
  s.samples_per_class = {5, 0};
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = small_spec();
  s.samples_per_class = {5};
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = small_spec();
  s.class_separation = 0.0;
  EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(Generate, CountsAndDeterminism) {
  const auto spec = small_spec();
  const auto a = generate(spec);
  const auto b = generate(spec);
  ASSERT_EQ(a.size(), 10u);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, i);
    EXPECT_EQ(a[i].true_label, i < 5 ? 0 : 1);
    EXPECT_EQ(a[i].observed_label, a[i].true_label);
    EXPECT_FALSE(a[i].flipped);
    EXPECT_EQ(a[i].frames.rows(), 32);
    EXPECT_EQ(a[i].frames.cols(), 8);
  }
  auto other = spec;
  other.seed = 8;
  EXPECT_FALSE(generate(other)[0] == a[0]);
}

TEST(Generate, PrototypesRespectSeparation) {
  CorpusSpec spec = small_spec();
  spec.n_classes = 8;
  spec.samples_per_class.assign(8, 1);
  spec.class_separation = 6.0;
  const auto p = class_patterns(spec);
  for (std::size_t a = 0; a < p.size(); ++a)
    for (std::size_t b = a + 1; b < p.size(); ++b) EXPECT_GE((p[a].prototype - p[b].prototype).norm(), 6.0);
}

TEST(Generate, NoiseFreeSamplesDifferOnlyInPhase) {
  auto spec = small_spec();
  spec.frame_noise_sigma = 0.0;
  const auto samples = generate(spec);
  const auto patterns = class_patterns(spec);
  for (const auto& s : samples) {
    const auto& pat = patterns[s.true_label];
    for (Eigen::Index t = 0; t < s.frames.rows(); ++t) {
      const Vec off = s.frames.row(t).cast<double>().transpose() - pat.prototype;
      const double wave = off[0] / pat.amplitude[0];
      EXPECT_LE(std::abs(wave), 1.0 + 1e-5);
      for (Eigen::Index d = 1; d < off.size(); ++d) EXPECT_NEAR(off[d], wave * pat.amplitude[d], 1e-4);
    }
  }
}

TEST(Generate, SeparatedCorpusIsPrototypeClassifiable) {
  CorpusSpec spec;
  spec.n_classes = 8;
  spec.samples_per_class.assign(8, 100);
  spec.class_separation = 6.0;
  spec.frame_noise_sigma = 0.5;
  EXPECT_EQ(oracle::nearest_prototype_accuracy(spec, generate(spec)), 1.0);
}

TEST(Generate, HoldoutSharesPatterns) {
  CorpusSpec spec;
  spec.n_classes = 4;
  spec.samples_per_class.assign(4, 20);
  const auto train = generate(spec);
  const auto hold = generate_holdout(spec, 10, 101);
  ASSERT_EQ(hold.size(), 40u);
  EXPECT_FALSE(hold[0] == train[0]);
  EXPECT_EQ(oracle::nearest_prototype_accuracy(spec, hold), 1.0);
  EXPECT_EQ(hold, generate_holdout(spec, 10, 101));
  EXPECT_THROW(generate_holdout(spec, 10, 0), InvalidArgument);
}

TEST(InjectNoise, ZeroRatio) {
  auto s = generate(small_spec());
  const auto before = s;
  const auto mask = inject_noise(s, 2, 0.0, 1);
  EXPECT_EQ(s, before);
  for (bool f : mask) EXPECT_FALSE(f);
}

TEST(InjectNoise, ExactCount) {
  CorpusSpec spec;
  spec.n_classes = 8;
  spec.samples_per_class.assign(8, 100);
  spec.frames = 4;
  spec.features = 2;
  auto s = generate(spec);
  const auto mask = inject_noise(s, 8, 0.5, 3);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(mask[i], s[i].flipped);
    EXPECT_EQ(s[i].flipped, s[i].observed_label != s[i].true_label);
    EXPECT_EQ(s[i].true_label, i / 100);
    flips += mask[i];
  }
  EXPECT_EQ(flips, 400u);
}

TEST(InjectNoise, BinaryFlipsToOtherClass) {
  auto s = generate(small_spec());
  inject_noise(s, 2, 0.5, 4);
  for (const auto& x : s)
    if (x.flipped) EXPECT_EQ(x.observed_label, 1 - x.true_label);
}

TEST(InjectNoise, RejectsBadRatio) {
  auto s = generate(small_spec());
  EXPECT_THROW(inject_noise(s, 2, 1.0, 1), InvalidArgument);
  EXPECT_THROW(inject_noise(s, 2, -0.1, 1), InvalidArgument);
}

TEST(InjectNoise, TargetsUniformOverOtherClasses) {
  const std::size_t k = 5;
  CorpusSpec spec;
  spec.n_classes = k;
  spec.samples_per_class.assign(k, 4000);
  spec.frames = 1;
  spec.features = 1;
  auto s = generate(spec);
  inject_noise(s, k, 0.5, 11);
  std::vector<std::vector<double>> counts(k, std::vector<double>(k, 0.0));
  std::vector<double> per_source(k, 0.0);
  for (const auto& x : s)
    if (x.flipped) {
      counts[x.true_label][x.observed_label] += 1.0;
      per_source[x.true_label] += 1.0;
    }
  double chi2 = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    const double expected = per_source[a] / static_cast<double>(k - 1);
    for (std::size_t b = 0; b < k; ++b)
      if (a != b) chi2 += (counts[a][b] - expected) * (counts[a][b] - expected) / expected;
  }
  // 0.99 quantile of chi-square with k * (k - 2) = 15 degrees of freedom
  EXPECT_LT(chi2, 30.578);
}

TEST(Clips, AugmentationOffReproducesFrames) {
  const auto s = generate(small_spec())[3];
  std::mt19937_64 rng(1);
  const auto pair = make_clip_pair(s, 32, rng, AugmentConfig::none());
  EXPECT_EQ(pair.clip_a, full_sequence(s));
  EXPECT_EQ(pair.clip_b, full_sequence(s));
  EXPECT_EQ(pair.source_id, 3u);
}

TEST(Clips, SeededDeterminism) {
  const auto s = generate(small_spec())[0];
  std::mt19937_64 a(42), b(42);
  const auto pa = make_clip_pair(s, 16, a);
  const auto pb = make_clip_pair(s, 16, b);
  EXPECT_EQ(pa.clip_a, pb.clip_a);
  EXPECT_EQ(pa.clip_b, pb.clip_b);
}

TEST(Clips, DefaultAugmentationDiffers) {
  const auto s = generate(small_spec())[0];
  std::mt19937_64 rng(2);
  int differ = 0;
  for (int i = 0; i < 100; ++i) {
    const auto p = make_clip_pair(s, 16, rng);
    EXPECT_EQ(p.clip_a.rows(), 16);
    EXPECT_EQ(p.clip_a.cols(), 8);
    EXPECT_EQ(p.clip_b.rows(), 16);
    differ += p.clip_a != p.clip_b;
  }
  EXPECT_EQ(differ, 100);
}

TEST(Clips, RejectsLongClip) {
  const auto s = generate(small_spec())[0];
  std::mt19937_64 rng(2);
  EXPECT_THROW(make_clip_pair(s, 33, rng), InvalidArgument);
  EXPECT_THROW(sample_clip(s, 0, rng), InvalidArgument);
}

TEST(Clips, DropoutZeroesWholeChannels) {
  const auto s = generate(small_spec())[0];
  std::mt19937_64 rng(6);
  AugmentConfig aug;
  aug.dropout = 0.5;
  int dropped = 0;
  for (int i = 0; i < 20; ++i) {
    const Mat c = sample_clip(s, 8, rng, aug);
    for (Eigen::Index d = 0; d < c.cols(); ++d) {
      const bool zero = c.col(d).cwiseAbs().maxCoeff() == 0.0;
      dropped += zero;
    }
  }
  EXPECT_GT(dropped, 0);
}

TEST(CorpusFile, RoundTrip) {
  Corpus c;
  c.spec = small_spec();
  c.samples = generate(c.spec);
  c.noise_ratio = 0.5;
  inject_noise(c.samples, 2, 0.5, 9);
  const auto path = scratch("round.nlpc");
  save_corpus(c, path);
  const auto back = load_corpus(path);
  EXPECT_EQ(back.spec, c.spec);
  EXPECT_EQ(back.noise_ratio, 0.5);
  EXPECT_EQ(back.samples, c.samples);
}

TEST(CorpusFile, EmptyRoundTrip) {
  Corpus c;
  c.spec = small_spec();
  const auto path = scratch("empty.nlpc");
  save_corpus(c, path);
  EXPECT_TRUE(load_corpus(path).samples.empty());
}

TEST(CorpusFile, ErrorCodes) {
  Corpus c;
  c.spec = small_spec();
  c.samples = generate(c.spec);
  const auto path = scratch("bad.nlpc");
  save_corpus(c, path);
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto code_of = [&](const std::string& content) {
    const auto p = scratch("probe.nlpc");
    std::ofstream(p, std::ios::binary | std::ios::trunc).write(content.data(), static_cast<std::streamsize>(content.size()));
    try {
      load_corpus(p);
    } catch (const CorpusFileError& e) {
      return static_cast<int>(e.code());
    }
    return -1;
  };
  std::string magic = bytes;
  magic[3] = 'X';
  EXPECT_EQ(code_of(magic), static_cast<int>(CorpusFileError::Code::BadMagic));
  EXPECT_EQ(code_of(bytes.substr(0, bytes.size() - 7)), static_cast<int>(CorpusFileError::Code::Truncated));
  EXPECT_EQ(code_of(bytes.substr(0, 5)), static_cast<int>(CorpusFileError::Code::Truncated));
  std::string header = bytes;
  header[13] = '#';
  EXPECT_EQ(code_of(header), static_cast<int>(CorpusFileError::Code::BadHeader));
  try {
    load_corpus(scratch("missing/none.nlpc"));
    FAIL();
  } catch (const CorpusFileError& e) {
    EXPECT_EQ(e.code(), CorpusFileError::Code::Io);
  }
}

TEST(DeriveSeed, SpreadsInputs) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0, 1), derive_seed(1, 0, 2));
  EXPECT_EQ(derive_seed(5, 6, 7), derive_seed(5, 6, 7));
}
