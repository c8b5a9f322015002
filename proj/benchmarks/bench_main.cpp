#include "synergraph/modality_graph.hpp"
#include "synergraph/sparse.hpp"
#include "synergraph/trainer.hpp"

#include <benchmark/benchmark.h>

using namespace synergraph;

namespace {

// Shared fixture sized by the first range argument (users; items = users / 3).
struct Scene {
    SyntheticData data;
    SplitDataset split;
    SparseMatrix adjacency;

    explicit Scene(Index users)
        : data(synth_dataset({users, std::max<Index>(users / 3, 20), 8, 64, 64, 3})),
          split(user_split(data.dataset, {}, 3)),
          adjacency(build_norm_adjacency(build_interaction_matrix(split))) {}
};

void BM_Spmm(benchmark::State& state) {
    const Scene s(state.range(0));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0, 1);
    Matrix x(s.adjacency.cols(), 64);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    Matrix out;
    for (auto _ : state) {
        spmm_into(s.adjacency, x, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * s.adjacency.nnz() * 64);
}
BENCHMARK(BM_Spmm)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_CosineTopK(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0, 1);
    FeatureMatrix f{Modality::textual, Matrix(state.range(0), 128)};
    for (Index i = 0; i < f.data.size(); ++i) f.data.data()[i] = g(rng);
    for (auto _ : state) benchmark::DoNotOptimize(cosine_topk(f, 30));
}
BENCHMARK(BM_CosineTopK)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    const Scene s(state.range(0));
    const auto inputs = build_model_inputs(
        s.split, {std::make_shared<FeatureMatrix>(s.data.visual), std::make_shared<FeatureMatrix>(s.data.textual)}, 10);
    SynerGraphModel model(ModelConfig{}, inputs, {}, 1);
    std::mt19937_64 rng(4);
    const auto batch = sample_batches(s.split, 1024, rng).front();
    std::vector<Matrix> grads;
    for (auto _ : state) benchmark::DoNotOptimize(model.loss_and_gradients(batch, grads).total);
}
BENCHMARK(BM_TrainStep)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
