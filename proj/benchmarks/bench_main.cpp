#include <benchmark/benchmark.h>

#include "rldyn/advantage.hpp"
#include "rldyn/autodiff.hpp"
#include "rldyn/diagnostics.hpp"
#include "rldyn/networks.hpp"
#include "rldyn/rng.hpp"
#include "rldyn/toy.hpp"

using namespace rldyn;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = 2.0 * rng.uniform() - 1.0;
  return m;
}

void BM_ForwardBackward(benchmark::State& state) {
  const std::size_t batch = static_cast<std::size_t>(state.range(0));
  nets::MlpSpec spec;
  spec.input_dim = 25;
  spec.hidden_widths = {64, 64};
  spec.activation = ad::Activation::relu;
  spec.head = nets::HeadKind::categorical;
  spec.head_dim = 4;
  nets::NetworkParams net = nets::init_mlp(spec, 1);
  ad::ParameterSet params;
  net.register_in(params, "net");

  Rng rng(7);
  Matrix obs = random_matrix(batch, 25, rng);
  for (auto _ : state) {
    nets::ForwardTrace trace = nets::forward_graph(net, ad::constant(obs));
    ad::NodePtr loss =
        ad::reduce(ad::log_softmax(trace.logits), ad::Reduce::mean);
    params.zero_gradients();
    ad::backward(loss);
    benchmark::DoNotOptimize(params.get("net/h0/W")->grad.data.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

void BM_SingularValues(benchmark::State& state) {
  const std::size_t d = static_cast<std::size_t>(state.range(0));
  Rng rng(11);
  Matrix phi = random_matrix(1024, d, rng);
  for (auto _ : state) {
    auto sigma = diag::singular_values(phi);
    benchmark::DoNotOptimize(sigma.data());
  }
}

void BM_Gae(benchmark::State& state) {
  const std::size_t t = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> rewards(t), values(t);
  std::vector<bool> term(t, false);
  for (std::size_t i = 0; i < t; ++i) {
    rewards[i] = rng.uniform();
    values[i] = rng.uniform();
    if (rng.uniform() < 0.02) term[i] = true;
  }
  gae::GaeConfig cfg;
  for (auto _ : state) {
    auto res = gae::compute_gae(rewards, values, 0.3, term, cfg);
    benchmark::DoNotOptimize(res.advantages.data());
  }
  state.SetItemsProcessed(state.iterations() * t);
}

void BM_ToySimulate(benchmark::State& state) {
  toy::ToyConfig cfg;
  cfg.alpha = 3.0;
  for (auto _ : state) {
    toy::ToyTrace trace = toy::toy_simulate(cfg);
    benchmark::DoNotOptimize(trace.updates.data());
  }
}

BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_SingularValues)->Arg(16)->Arg(64)->Arg(128);
BENCHMARK(BM_Gae)->Arg(128)->Arg(1024);
BENCHMARK(BM_ToySimulate);

}  // namespace

BENCHMARK_MAIN();
