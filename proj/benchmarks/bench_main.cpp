#include <random>

#include <benchmark/benchmark.h>

#include "odx/architecture.hpp"
#include "odx/eval_harness.hpp"
#include "odx/latent_search.hpp"
#include "odx/stat_gate.hpp"

namespace {

odx::GeneratorModel preset(const char* name, std::size_t latent_dim) {
  return odx::init_generator(odx::architecture_preset(name), latent_dim, odx::PriorSpec::normal(), std::nullopt, 1);
}

void BM_Forward(benchmark::State& state, const char* arch) {
  const auto g = preset(arch, 64);
  std::mt19937_64 rng(2);
  const odx::Tensor z = g.prior().sample(64, rng);
  for (auto _ : state) benchmark::DoNotOptimize(g.forward(z));
}
BENCHMARK_CAPTURE(BM_Forward, mlp, "mlp");
BENCHMARK_CAPTURE(BM_Forward, dcgan, "dcgan");
BENCHMARK_CAPTURE(BM_Forward, upconv, "upconv");

void BM_BackwardInput(benchmark::State& state, const char* arch) {
  const auto g = preset(arch, 64);
  std::mt19937_64 rng(3);
  const odx::Tensor z = g.prior().sample(64, rng);
  const auto pass = g.run(z);
  const odx::Tensor d(pass.output.shape(), std::vector<double>(pass.output.size(), 0.1));
  for (auto _ : state) benchmark::DoNotOptimize(g.backward(pass, d, nullptr));
}
BENCHMARK_CAPTURE(BM_BackwardInput, mlp, "mlp");
BENCHMARK_CAPTURE(BM_BackwardInput, dcgan, "dcgan");

void BM_Search(benchmark::State& state) {
  const auto g = preset("mlp", 64);
  const auto target = odx::make_outdomain_targets(1, g.output_shape(), 4).front();
  odx::AttackConfig cfg = odx::AttackConfig::defaults_for(g.prior());
  cfg.max_iters = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(odx::search(g, target, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Search)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Gate(benchmark::State& state, odx::GofTest test) {
  std::mt19937_64 rng(5);
  const odx::Tensor z = odx::PriorSpec::normal().sample(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(odx::run_test(z.values(), odx::PriorSpec::normal(), test));
}
BENCHMARK_CAPTURE(BM_Gate, ad, odx::GofTest::anderson_darling)->Arg(100)->Arg(1000);
BENCHMARK_CAPTURE(BM_Gate, ks, odx::GofTest::kolmogorov_smirnov)->Arg(100)->Arg(1000);
BENCHMARK_CAPTURE(BM_Gate, sw, odx::GofTest::shapiro_wilk)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
