#include "mevt/ssm_core.hpp"
#include "mevt/vim_block.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

constexpr int kDInner = 768;
constexpr int kDState = 16;

struct ScanCase {
  mevt::MatrixF u;
  mevt::ScanInputs<float> in;
  mevt::MatrixF a;
  mevt::VectorF d;
};

ScanCase make_case(int length) {
  std::mt19937_64 rng(17);
  std::normal_distribution<float> normal;
  std::uniform_real_distribution<float> step(1e-3f, 1e-1f);
  auto fill = [&](mevt::MatrixF m, auto& dist) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
  };
  ScanCase c;
  c.u = fill(mevt::MatrixF(length, kDInner), normal);
  c.in.delta = fill(mevt::MatrixF(length, kDInner), step);
  c.in.b = fill(mevt::MatrixF(length, kDState), normal);
  c.in.c = fill(mevt::MatrixF(length, kDState), normal);
  c.a.resize(kDInner, kDState);
  for (int d = 0; d < kDInner; ++d)
    for (int n = 0; n < kDState; ++n) c.a(d, n) = -static_cast<float>(n + 1);
  c.d = mevt::VectorF::Ones(kDInner);
  return c;
}

void BM_ScanSequential(benchmark::State& state) {
  const ScanCase c = make_case(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mevt::selective_scan(c.u, c.in, c.a, c.d));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScanChunked(benchmark::State& state) {
  const ScanCase c = make_case(static_cast<int>(state.range(0)));
  const int chunk = static_cast<int>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mevt::selective_scan_chunked(c.u, c.in, c.a, c.d, chunk));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

// One residual block at the default width over a template+search sequence.
void BM_VimBlock(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const mevt::BlockShape shape;
  const mevt::VimBlockParams params = mevt::VimBlockParams::random(shape, 24, rng);
  std::normal_distribution<float> normal;
  mevt::MatrixF tokens(state.range(0), shape.dim);
  for (Eigen::Index i = 0; i < tokens.size(); ++i) tokens.data()[i] = normal(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mevt::vim_block(tokens, params));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_ScanSequential)->Arg(256)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScanChunked)
    ->ArgsProduct({{256, 1024, 4096}, {16, 64, 256}})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VimBlock)->Arg(320)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
