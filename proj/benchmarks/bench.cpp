#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "nlr/clustering.hpp"
#include "nlr/denoise.hpp"
#include "nlr/encoder.hpp"

namespace {

nlr::Mat random_points(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  nlr::Mat m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = g(rng);
  return m;
}

void BM_WardLinkage(benchmark::State& state) {
  const nlr::Mat p = random_points(state.range(0), 16, 1);
  for (auto _ : state) benchmark::DoNotOptimize(nlr::agglomerative(p, 8));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_WardLinkage)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

void BM_GmmFit(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> a(0.1, 0.03), b(0.6, 0.05);
  std::vector<double> x;
  for (int64_t i = 0; i < state.range(0); ++i) x.push_back(i % 2 ? a(rng) : b(rng));
  for (auto _ : state) benchmark::DoNotOptimize(nlr::fit_gmm_2(x));
}
BENCHMARK(BM_GmmFit)->Arg(400)->Arg(4000);

void BM_EncoderForwardBackward(benchmark::State& state) {
  auto model = nlr::init_model({8, 64, 64, 16, 8}, 3);
  const nlr::Mat clip = random_points(16, 8, 4);
  nlr::OutputGrads grads;
  grads.dv = nlr::Vec::Ones(16);
  grads.dlogits = nlr::Vec::Ones(8);
  for (auto _ : state) {
    const auto cache = nlr::forward(model, clip);
    nlr::backward(model, cache, grads);
    benchmark::DoNotOptimize(model.w1.grad.data());
  }
}
BENCHMARK(BM_EncoderForwardBackward);

}  // namespace

BENCHMARK_MAIN();
