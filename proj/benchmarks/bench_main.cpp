#include <benchmark/benchmark.h>

#include <vector>

#include "fedecg/data.hpp"
#include "fedecg/federation.hpp"
#include "fedecg/layers.hpp"
#include "fedecg/model.hpp"
#include "fedecg/protocol.hpp"
#include "fedecg/synthetic.hpp"
#include "fedecg/training.hpp"
#include "support/bundles.hpp"

using namespace fedecg;

namespace {

// Shapes of the widest convolution in either model.
void BM_Conv1dForward(benchmark::State& state) {
  Rng rng(1);
  const Tensor x = testing::random_float_tensor({64, 24}, rng);
  const Tensor w = testing::random_float_tensor({64, 64, 3}, rng);
  const Tensor b = testing::random_float_tensor({64}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv1d(x, w, b));
}
BENCHMARK(BM_Conv1dForward);

void BM_Conv1dBackward(benchmark::State& state) {
  Rng rng(2);
  const Tensor x = testing::random_float_tensor({64, 24}, rng);
  const Tensor w = testing::random_float_tensor({64, 64, 3}, rng);
  const Tensor g = testing::random_float_tensor({64, 24}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv1d_backward(g, x, w));
}
BENCHMARK(BM_Conv1dBackward);

void BM_ClassifierForward(benchmark::State& state) {
  const Model clf = build_classifier(3);
  const Tensor beat = pad_beat(synthesize_dataset({1, 0, 0, 0, 0}, 3).records[0]);
  for (auto _ : state) benchmark::DoNotOptimize(clf.forward(beat));
}
BENCHMARK(BM_ClassifierForward);

void BM_AutoencoderEpoch(benchmark::State& state) {
  const BeatDataset clean = synthesize_dataset({20, 20, 20, 20, 20}, 4);
  const BeatDataset noisy = inject_noise(clean, 0.2, 5);
  TrainConfig cfg;
  cfg.batch_size = 100;
  for (auto _ : state) {
    Model ae = build_autoencoder(4);
    train_autoencoder(ae, noisy, clean, cfg);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(clean.size()));
}
BENCHMARK(BM_AutoencoderEpoch)->Unit(benchmark::kMillisecond);

void BM_ClassifierEpoch(benchmark::State& state) {
  const BeatDataset data = synthesize_dataset({20, 20, 20, 20, 20}, 6);
  TrainConfig cfg;
  cfg.batch_size = 100;
  for (auto _ : state) {
    Model clf = build_classifier(6);
    train_classifier(clf, data, cfg);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_ClassifierEpoch)->Unit(benchmark::kMillisecond);

void BM_FedAvg(benchmark::State& state) {
  Rng rng(7);
  const WeightBundle layout = build_classifier(7).weights();
  std::vector<ClientUpdate> updates;
  for (std::uint32_t id = 1; id <= static_cast<std::uint32_t>(state.range(0)); ++id) {
    updates.push_back({id, Tier::kClassifier, 1, 1000 + id, testing::randomized_like(layout, rng)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(fedavg(updates));
}
BENCHMARK(BM_FedAvg)->Arg(3)->Arg(10);

void BM_EncodeUpdate(benchmark::State& state) {
  const auto msg = wire::make_update(ModelKind::kClassifier, 1, 5000, build_classifier(8).weights());
  for (auto _ : state) benchmark::DoNotOptimize(wire::encode_message(msg));
}
BENCHMARK(BM_EncodeUpdate);

void BM_DecodeUpdate(benchmark::State& state) {
  const auto bytes = wire::encode_message(wire::make_update(ModelKind::kClassifier, 1, 5000, build_classifier(9).weights()));
  for (auto _ : state) benchmark::DoNotOptimize(wire::decode_message(bytes));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_DecodeUpdate);

}  // namespace

BENCHMARK_MAIN();
