#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "spikemem/autodiff.hpp"
#include "spikemem/encoder.hpp"
#include "spikemem/events.hpp"
#include "spikemem/hgrn.hpp"
#include "spikemem/hopfield.hpp"
#include "spikemem/model.hpp"
#include "spikemem/scl.hpp"
#include "spikemem/silhouette.hpp"

using namespace spikemem;

namespace {

Tensor uniform(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = d(rng);
    return t;
}

std::vector<SpikeTensor> synthetic_batch(std::size_t n) {
    std::vector<SpikeTensor> batch;
    for (std::size_t i = 0; i < n; ++i) batch.push_back(synthesize(static_cast<int>(i % 4), 100 + i));
    return batch;
}

void BM_EncoderForward(benchmark::State& state) {
    auto config = EncoderConfig::desk();
    std::mt19937_64 rng(0);
    auto params = EncoderParams::init(config, rng);
    const auto batch = synthetic_batch(static_cast<std::size_t>(state.range(0)));
    ad::NoGradGuard no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(encoder_forward(batch, params, config).counts.spikes);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncoderForward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    const auto id = static_cast<ModelId>(state.range(0));
    ModelConfig config;
    config.encoder.classes = 4;
    auto model = build_model(id, config, 0);
    const auto batch = synthetic_batch(32);
    std::vector<int> labels;
    for (std::size_t i = 0; i < batch.size(); ++i) labels.push_back(static_cast<int>(i % 4));
    for (auto _ : state) {
        const auto r = model.forward(batch, {true});
        ad::backward(model.loss(r, labels).total, {true});
    }
    state.SetLabel(model_name(id));
    state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_TrainStep)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

void BM_HopfieldRetrieve(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::bernoulli_distribution coin(0.5);
    std::vector<Bipolar> patterns(static_cast<std::size_t>(state.range(0)), Bipolar(512));
    for (auto& p : patterns) {
        for (auto& v : p) v = coin(rng) ? 1.0 : -1.0;
    }
    const auto memory = HopfieldMemory::store(patterns);
    Bipolar query = patterns.front();
    for (std::size_t i = 0; i < 40; ++i) query[i] = -query[i];
    for (auto _ : state) benchmark::DoNotOptimize(hopfield_update(memory, query).iterations);
}
BENCHMARK(BM_HopfieldRetrieve)->Arg(4)->Arg(10)->Arg(50);

void BM_HgrnSequence(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const auto params = GateParams::init(512, 512, rng);
    std::vector<ad::Value> xs;
    for (int t = 0; t < 25; ++t) xs.push_back(ad::Value::constant(uniform({32, 512}, rng, 0.0, 1.0)));
    ad::NoGradGuard no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(hgrn_sequence(xs, params).data()[0]);
}
BENCHMARK(BM_HgrnSequence)->Unit(benchmark::kMillisecond);

void BM_SclLoss(benchmark::State& state) {
    std::mt19937_64 rng(3);
    const auto n = static_cast<std::size_t>(state.range(0));
    auto h = ad::Value::parameter(uniform({n, 512}, rng, 0.0, 1.0));
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back(static_cast<int>(i % 10));
    for (auto _ : state) {
        const auto norm = normalize_features(h);
        ad::backward(scl_loss({norm.z, labels, 0.07, norm.excluded}));
    }
}
BENCHMARK(BM_SclLoss)->Arg(64)->Arg(256);

void BM_Silhouette(benchmark::State& state) {
    std::mt19937_64 rng(4);
    const auto n = static_cast<std::size_t>(state.range(0));
    LabeledEmbedding e{uniform({n, 512}, rng), {}};
    for (std::size_t i = 0; i < n; ++i) e.labels.push_back(static_cast<int>(i % 10));
    for (auto _ : state) benchmark::DoNotOptimize(silhouette_score(e));
}
BENCHMARK(BM_Silhouette)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_BinEvents(benchmark::State& state) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> coord(0, 33), pol(0, 1);
    std::uniform_int_distribution<std::uint32_t> t(0, 300000);
    std::vector<DvsEvent> events(static_cast<std::size_t>(state.range(0)));
    for (auto& e : events) {
        e = {static_cast<std::uint8_t>(coord(rng)), static_cast<std::uint8_t>(coord(rng)),
             static_cast<std::uint8_t>(pol(rng)), t(rng)};
    }
    const auto bytes = encode_events(events);
    for (auto _ : state) benchmark::DoNotOptimize(bin_events(parse_events(bytes)).tensor.data[0]);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BinEvents)->Arg(4000);

}  // namespace
BENCHMARK_MAIN();
