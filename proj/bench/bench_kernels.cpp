#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ctxnorm/kernels.hpp"
#include "ctxnorm/reference.hpp"

namespace {

ctxnorm::Batch random_batch(int n, int c, int h, int w, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  ctxnorm::Batch x(n, c, h, w);
  for (double& v : x.data) v = dist(rng);
  return x;
}

std::vector<int> round_robin_groups(int n, int k) {
  std::vector<int> g(n);
  for (int i = 0; i < n; ++i) g[i] = i % k;
  return g;
}

void bm_channel_moments(benchmark::State& state) {
  const ctxnorm::Batch x = random_batch(static_cast<int>(state.range(0)), 64, 8, 8, 1);
  for (auto _ : state) benchmark::DoNotOptimize(ctxnorm::channel_moments(x));
}

void bm_channel_moments_ref(benchmark::State& state) {
  const ctxnorm::Batch x = random_batch(static_cast<int>(state.range(0)), 64, 8, 8, 1);
  for (auto _ : state) benchmark::DoNotOptimize(ctxnorm::ref::channel_moments(x));
}

void bm_group_moments(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ctxnorm::Batch x = random_batch(n, 64, 8, 8, 2);
  const std::vector<int> groups = round_robin_groups(n, 4);
  std::vector<int> members;
  for (int i = 0; i < n; ++i)
    if (groups[i] == 0) members.push_back(i);
  for (auto _ : state)
    benchmark::DoNotOptimize(ctxnorm::group_channel_moments(x, members));
}

void bm_group_moments_ref(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ctxnorm::Batch x = random_batch(n, 64, 8, 8, 2);
  const std::vector<int> groups = round_robin_groups(n, 4);
  std::vector<int> members;
  for (int i = 0; i < n; ++i)
    if (groups[i] == 0) members.push_back(i);
  for (auto _ : state)
    benchmark::DoNotOptimize(ctxnorm::ref::group_channel_moments(x, members));
}

void bm_standardize(benchmark::State& state) {
  const ctxnorm::Batch x = random_batch(static_cast<int>(state.range(0)), 64, 8, 8, 3);
  const ctxnorm::Moments m = ctxnorm::channel_moments(x);
  for (auto _ : state)
    benchmark::DoNotOptimize(ctxnorm::standardize(x, m.mean, m.var, 1e-5));
}

void bm_standardize_ref(benchmark::State& state) {
  const ctxnorm::Batch x = random_batch(static_cast<int>(state.range(0)), 64, 8, 8, 3);
  const ctxnorm::Moments m = ctxnorm::channel_moments(x);
  for (auto _ : state)
    benchmark::DoNotOptimize(ctxnorm::ref::standardize(x, m.mean, m.var, 1e-5));
}

void bm_affine(benchmark::State& state) {
  const ctxnorm::Batch x = random_batch(static_cast<int>(state.range(0)), 64, 8, 8, 4);
  const ctxnorm::ChannelVector scale(64, 1.25), shift(64, -0.5);
  for (auto _ : state) benchmark::DoNotOptimize(ctxnorm::affine(x, scale, shift));
}

void bm_affine_ref(benchmark::State& state) {
  const ctxnorm::Batch x = random_batch(static_cast<int>(state.range(0)), 64, 8, 8, 4);
  const ctxnorm::ChannelVector scale(64, 1.25), shift(64, -0.5);
  for (auto _ : state) benchmark::DoNotOptimize(ctxnorm::ref::affine(x, scale, shift));
}

BENCHMARK(bm_channel_moments)->Arg(64)->Arg(256);
BENCHMARK(bm_channel_moments_ref)->Arg(64)->Arg(256);
BENCHMARK(bm_group_moments)->Arg(64)->Arg(256);
BENCHMARK(bm_group_moments_ref)->Arg(64)->Arg(256);
BENCHMARK(bm_standardize)->Arg(64)->Arg(256);
BENCHMARK(bm_standardize_ref)->Arg(64)->Arg(256);
BENCHMARK(bm_affine)->Arg(64)->Arg(256);
BENCHMARK(bm_affine_ref)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
