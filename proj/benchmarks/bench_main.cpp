#include <benchmark/benchmark.h>

#include <vector>

#include "prorl/eval.hpp"
#include "prorl/grpo.hpp"
#include "prorl/policy.hpp"
#include "prorl/rng.hpp"
#include "prorl/tasks.hpp"

using namespace prorl;

namespace {

TokenSequence make_sequence(int response_len) {
    const auto inst = tasks::generate(tasks::Family::Arithmetic, {2, 7}, 1);
    TokenSequence s;
    s.prompt = inst.prompt;
    for (int t = 0; t < response_len; ++t) s.response.push_back(static_cast<TokenId>(4 + t % 12));
    return s;
}

void BM_Logprobs(benchmark::State& state) {
    const PolicyParameters p = init_gaussian(ModelDims{}, 0.3, 1);
    const TokenSequence s = make_sequence(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(logprobs(p, s));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Logprobs)->Arg(8)->Arg(32);

void BM_Sample(benchmark::State& state) {
    const PolicyParameters p = init_gaussian(ModelDims{}, 0.3, 1);
    const auto prompt = make_sequence(0).prompt;
    auto rng = make_stream({7});
    for (auto _ : state) benchmark::DoNotOptimize(sample(p, prompt, 1.2, 32, rng));
}
BENCHMARK(BM_Sample);

void BM_Gradient(benchmark::State& state) {
    const PolicyParameters p = init_gaussian(ModelDims{}, 0.3, 1);
    std::vector<TokenSequence> seqs(static_cast<std::size_t>(state.range(0)), make_sequence(16));
    const std::vector<double> w(16, 0.01);
    std::vector<WeightedSequence> batch;
    for (const auto& s : seqs) batch.push_back({&s, w});
    for (auto _ : state) benchmark::DoNotOptimize(grad_weighted_logprob(p, batch));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 16);
}
BENCHMARK(BM_Gradient)->Arg(8)->Arg(64);

void BM_Advantages(benchmark::State& state) {
    std::vector<double> r(16);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = static_cast<double>(i % 3) / 2.0;
    for (auto _ : state) benchmark::DoNotOptimize(grpo::compute_advantages(r));
}
BENCHMARK(BM_Advantages);

void BM_PassAtKCurve(benchmark::State& state) {
    std::vector<std::size_t> counts;
    for (std::size_t i = 0; i < 100; ++i) counts.push_back(i % 17);
    const auto m = eval::matrix_from_counts(16, counts);
    const std::vector<std::size_t> ks{1, 2, 4, 8, 16};
    for (auto _ : state) benchmark::DoNotOptimize(eval::pass_at_k_curve(m, ks));
}
BENCHMARK(BM_PassAtKCurve);

} // namespace
BENCHMARK_MAIN();
