// router_bench.cpp - throughput benchmarks for routers, dispatch and the tape
#include <benchmark/benchmark.h>

#include "moelab/moe.hpp"
#include "moelab/rng.hpp"
#include "moelab/router.hpp"
#include "moelab/tape.hpp"

namespace {

constexpr std::size_t kBatchRows = 64;

moelab::Tensor batch_input(std::size_t rows, std::size_t width) {
    moelab::Tensor x({rows, width});
    moelab::Rng rng(7);
    rng.fill_normal(x, 0.0, 1.0);
    return x;
}

void BM_RouterProbabilities(benchmark::State& state, const char* name) {
    moelab::RouterConfig cfg;
    const moelab::RouterPtr router = moelab::make_router(name, cfg);
    const moelab::Tensor x = batch_input(kBatchRows, cfg.hidden_size);
    for (auto _ : state) {
        moelab::Tensor p = router->probabilities(x);
        benchmark::DoNotOptimize(p.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * kBatchRows);
}

BENCHMARK_CAPTURE(BM_RouterProbabilities, linear, "linear");
BENCHMARK_CAPTURE(BM_RouterProbabilities, attention, "attention");
BENCHMARK_CAPTURE(BM_RouterProbabilities, mlp, "mlp");
BENCHMARK_CAPTURE(BM_RouterProbabilities, hybrid, "hybrid");
BENCHMARK_CAPTURE(BM_RouterProbabilities, mlp_hadamard, "mlp-hadamard");
BENCHMARK_CAPTURE(BM_RouterProbabilities, hash, "hash");
BENCHMARK_CAPTURE(BM_RouterProbabilities, self_supervised, "self-supervised");

void BM_TopkSelect(benchmark::State& state) {
    moelab::RouterConfig cfg;
    const moelab::RouterPtr router = moelab::make_router(moelab::RouterKind::linear, cfg);
    const moelab::Tensor probs = router->probabilities(batch_input(kBatchRows, cfg.hidden_size));
    for (auto _ : state) {
        moelab::RoutingDecision d = moelab::select_topk(probs, cfg.top_k);
        benchmark::DoNotOptimize(d.indices.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * kBatchRows);
}
BENCHMARK(BM_TopkSelect);

moelab::MoeLayer small_layer(const char* name) {
    moelab::RouterConfig cfg;
    cfg.hidden_size = 128;
    cfg.qk_dim = 32;
    moelab::ExpertConfig expert;
    expert.hidden_size = cfg.hidden_size;
    expert.ffn_size = 512;
    return moelab::MoeLayer(moelab::make_router(name, cfg), expert);
}

void BM_MoeForward(benchmark::State& state, const char* name) {
    moelab::MoeLayer layer = small_layer(name);
    const moelab::Tensor x = batch_input(32, layer.router().hidden_size());
    for (auto _ : state) {
        moelab::MoeLayer::ForwardResult r = layer.forward(x);
        benchmark::DoNotOptimize(r.output.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 32);
}
BENCHMARK_CAPTURE(BM_MoeForward, linear, "linear");
BENCHMARK_CAPTURE(BM_MoeForward, hash, "hash");

void BM_TapeBackward(benchmark::State& state) {
    moelab::MoeLayer layer = small_layer("linear");
    const moelab::Tensor x = batch_input(32, layer.router().hidden_size());
    const moelab::Tensor target = batch_input(32, layer.router().hidden_size());
    for (auto _ : state) {
        moelab::grad::Tape tape;
        moelab::MoeLayer::ForwardNodes moe = layer.forward_node(tape, tape.constant(x));
        const moelab::grad::NodeId loss = tape.add(tape.mse(moe.output, target), moe.aux);
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.gradient(moe.output).data());
    }
}
BENCHMARK(BM_TapeBackward);

}  // namespace

BENCHMARK_MAIN();
