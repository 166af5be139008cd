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

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "streamstart/detector.hpp"
#include "streamstart/error.hpp"
#include "test_util.hpp"

namespace streamstart::detector {
namespace {

using kernels::AdapterKind;

DetectorModel tiny_model(AdapterKind kind, std::uint64_t seed, double temperature) {
  DetectorConfig cfg;
  cfg.adapter = testing::tiny_config(kind, 8, 4, 3);
  cfg.d_in = 5;
  cfg.n_blocks = 2;
  cfg.mlp_hidden = 12;
  cfg.temperature = temperature;
  DetectorModel m = DetectorModel::create(cfg, seed);
  std::uint64_t s = seed * 31 + 7;
  for (auto& b : m.blocks) {
    testing::randomize(b.temporal, ++s, 0.3);
    testing::randomize(b.pre_mlp, ++s, 0.3);
  }
  return m;
}

std::vector<Sample> tiny_batch(std::uint64_t seed) {
  std::vector<Sample> batch;
  for (int i = 0; i < 3; ++i) {
    Sample s;
    s.embeddings = testing::random_matrix(6, 5, seed * 10 + i);
    s.query = testing::random_matrix(5, 1, seed * 10 + i + 5).col(0);
    s.labels = {0, 0, 1, 1, i == 0 ? char(1) : char(0), 0};
    batch.push_back(std::move(s));
  }
  return batch;
}

struct GradCheck {
  std::string worst_name;
  double worst = 0.0;
};

// Per-tensor relative error ||analytic - numeric|| / max(||analytic||, ||numeric||).
GradCheck check_gradients(DetectorModel model, const std::vector<Sample>& batch) {
  const double cap = 20.0;
  const BackwardResult br = backward(model, batch, cap);
  std::vector<std::vector<double>> analytic;
  br.grads.for_each([&](const std::string&, std::span<const double> g) {
    analytic.emplace_back(g.begin(), g.end());
  });
  std::vector<std::string> names;
  std::vector<std::span<double>> params;
  model.for_each_trainable([&](const std::string& name, std::span<double> p) {
    names.push_back(name);
    params.push_back(p);
  });
  const double eps = 1e-5;
  GradCheck out;
  for (std::size_t t = 0; t < params.size(); ++t) {
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t j = 0; j < params[t].size(); ++j) {
      const double keep = params[t][j];
      params[t][j] = keep + eps;
      const double up = batch_loss(model, batch, cap).total;
      params[t][j] = keep - eps;
      const double down = batch_loss(model, batch, cap).total;
      params[t][j] = keep;
      const double numeric = (up - down) / (2 * eps);
      diff2 += (analytic[t][j] - numeric) * (analytic[t][j] - numeric);
      a2 += analytic[t][j] * analytic[t][j];
      n2 += numeric * numeric;
    }
    const double denom = std::sqrt(std::max(a2, n2));
    const double rel = denom == 0.0 ? 0.0 : std::sqrt(diff2) / denom;
    if (rel > out.worst) {
      out.worst = rel;
      out.worst_name = names[t];
    }
  }
  return out;
}

class GradientTest : public ::testing::TestWithParam<AdapterKind> {};

TEST_P(GradientTest, AnalyticMatchesCentralDifference) {
  for (double temperature : {0.07, 1.0}) {
    for (std::uint64_t seed = 1; seed <= 2; ++seed) {
      const GradCheck g = check_gradients(tiny_model(GetParam(), seed, temperature), tiny_batch(seed));
      EXPECT_LT(g.worst, 1e-5) << kernels::to_string(GetParam()) << " worst tensor "
                               << g.worst_name << " tau=" << temperature;
    }
  }
}

TEST_P(GradientTest, ZeroUpProjectionBlocksDownGradients) {
  DetectorConfig cfg;
  cfg.adapter = testing::tiny_config(GetParam(), 8, 4, 3);
  cfg.d_in = 8;
  cfg.n_blocks = 1;
  cfg.mlp_hidden = 12;
  const DetectorModel m = DetectorModel::create(cfg, 3);
  std::vector<Sample> batch;
  for (int i = 0; i < 2; ++i) {
    Sample s;
    s.embeddings = testing::random_matrix(6, 8, 40 + i);
    s.query = testing::random_matrix(8, 1, 50 + i).col(0);
    s.labels = {0, 1, 1, 0, 0, 0};
    batch.push_back(std::move(s));
  }
  const BackwardResult br = backward(m, batch, 20.0);
  double up_norm = 0.0;
  br.grads.for_each([&](const std::string& name, std::span<const double> g) {
    const bool up = name.find("up_") != std::string::npos;
    for (double v : g) {
      if (!up) {
        EXPECT_EQ(v, 0.0) << name;
      } else {
        up_norm += v * v;
      }
    }
  });
  EXPECT_GT(up_norm, 0.0);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, GradientTest,
                         ::testing::Values(AdapterKind::kVanilla, AdapterKind::kStConv,
                                           AdapterKind::kQrnn, AdapterKind::kRetention),
                         [](const auto& info) { return kernels::to_string(info.param); });

TEST(Gradients, FrozenParametersAreAbsent) {
  const DetectorModel m = tiny_model(AdapterKind::kQrnn, 1, 0.07);
  const BackwardResult br = backward(m, tiny_batch(1), 20.0);
  std::set<std::string> names;
  br.grads.for_each([&](const std::string& name, std::span<const double>) { names.insert(name); });
  std::set<std::string> trainable;
  m.for_each_trainable([&](const std::string& name, std::span<const double>) { trainable.insert(name); });
  EXPECT_EQ(names, trainable);
  for (const auto& n : names) {
    EXPECT_TRUE(n.find(".temporal.") != std::string::npos || n.find(".pre_mlp.") != std::string::npos)
        << n;
    EXPECT_EQ(n.find("spatial"), std::string::npos);
    EXPECT_EQ(n.find("mlp_w"), std::string::npos);
  }
}

TEST(Gradients, IndependentOfWorkerCount) {
  const DetectorModel m = tiny_model(AdapterKind::kRetention, 2, 0.07);
  std::vector<Sample> batch = tiny_batch(2);
  for (const Sample& s : tiny_batch(3)) batch.push_back(s);
  const BackwardResult one = backward(m, batch, 20.0, 1);
  for (int workers : {2, 4, 16}) {
    const BackwardResult many = backward(m, batch, 20.0, workers);
    EXPECT_EQ(many.loss.total, one.loss.total);
    std::vector<double> a, b;
    one.grads.for_each([&](const std::string&, std::span<const double> g) { a.insert(a.end(), g.begin(), g.end()); });
    many.grads.for_each([&](const std::string&, std::span<const double> g) { b.insert(b.end(), g.begin(), g.end()); });
    EXPECT_EQ(a, b);
  }
}

TEST(Gradients, NonFiniteGradientNamesTensor) {
  DetectorModel m = tiny_model(AdapterKind::kVanilla, 1, 0.07);
  m.blocks[1].pre_mlp.up_b(0) = NAN;
  try {
    backward(m, tiny_batch(1), 20.0);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("block"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace streamstart::detector
