// Copyright 2026 The StreamStart Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "streamstart/detector.hpp"

namespace streamstart {
namespace {

detector::DetectorModel make_model(kernels::AdapterKind kind) {
  detector::DetectorConfig cfg;
  cfg.adapter.kind = kind;
  cfg.adapter.d = 64;
  cfg.adapter.d_prime = 32;
  cfg.d_in = 64;
  cfg.n_blocks = 2;
  cfg.mlp_hidden = 128;
  return detector::DetectorModel::create(cfg, 5);
}

// Cost of one StreamingDetector::push; constant in the stream position.
void BM_StreamingPush(benchmark::State& state) {
  const auto model = make_model(kernels::AdapterKind(state.range(0)));
  const Eigen::MatrixXd frames = Eigen::MatrixXd::Random(256, 64);
  const Eigen::VectorXd query = Eigen::VectorXd::Random(64);
  detector::StreamingDetector det(model, query);
  Eigen::Index i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(det.push(frames.row(i)));
    i = (i + 1) % frames.rows();
  }
  state.SetLabel(kernels::to_string(model.config.adapter.kind));
}
BENCHMARK(BM_StreamingPush)->DenseRange(0, 3);

// Re-encoding the last `window` frames from scratch on every arrival.
void BM_SlidingWindowFrame(benchmark::State& state) {
  const auto model = make_model(kernels::AdapterKind::kQrnn);
  const Eigen::MatrixXd frames = Eigen::MatrixXd::Random(state.range(0), 64);
  for (auto _ : state) benchmark::DoNotOptimize(detector::encode(model, frames));
}
BENCHMARK(BM_SlidingWindowFrame)->Arg(1)->Arg(4)->Arg(8);

void BM_TrainStep(benchmark::State& state) {
  detector::DetectorConfig cfg;
  cfg.adapter.kind = kernels::AdapterKind::kQrnn;
  cfg.adapter.d = 12;
  cfg.adapter.d_prime = 12;
  cfg.adapter.depthwise = true;
  cfg.d_in = 12;
  cfg.n_blocks = 1;
  cfg.mlp_hidden = 24;
  const auto model = detector::DetectorModel::create(cfg, 1);
  std::vector<detector::Sample> batch(state.range(0));
  for (auto& s : batch) {
    s.embeddings = Eigen::MatrixXd::Random(60, 12);
    s.query = Eigen::VectorXd::Random(12);
    s.labels.assign(60, 0);
    for (int t = 20; t < 35; ++t) s.labels[t] = 1;
  }
  for (auto _ : state) benchmark::DoNotOptimize(detector::backward(model, batch, 20.0));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(32);

}  // namespace
}  // namespace streamstart
