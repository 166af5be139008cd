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

#pragma once

// Loop-level reference implementations of the temporal kernels.

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "streamstart/kernels.hpp"
#include "test_util.hpp"

namespace streamstart::testing {

// y[t] = sum_j sum_c x[t - lookback + j][c] * W[j][c][o]
inline Eigen::MatrixXd oracle_conv(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, int k,
                                   int lookback, bool depthwise) {
  const Eigen::Index n = x.rows(), width = x.cols();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, width);
  for (Eigen::Index t = 0; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      const Eigen::Index src = t - lookback + j;
      if (src < 0 || src >= n) continue;
      for (Eigen::Index o = 0; o < width; ++o) {
        if (depthwise) {
          y(t, o) += x(src, o) * w(j, o);
        } else {
          for (Eigen::Index c = 0; c < width; ++c) y(t, o) += x(src, c) * w(j * width + c, o);
        }
      }
    }
  }
  return y;
}

inline Eigen::MatrixXd oracle_fo_pool(const Eigen::MatrixXd& s, const Eigen::MatrixXd& f,
                                      const Eigen::RowVectorXd& h0) {
  Eigen::MatrixXd h(s.rows(), s.cols());
  for (Eigen::Index c = 0; c < s.cols(); ++c) {
    double prev = h0(c);
    for (Eigen::Index t = 0; t < s.rows(); ++t) {
      prev = f(t, c) * prev + (1.0 - f(t, c)) * s(t, c);
      h(t, c) = prev;
    }
  }
  return h;
}

// Complex form: channel pairs are complex numbers, the score of (n, m) is
// Re(sum q_n conj(k_m) e^{i (n - m) theta}), decayed by gamma^(n - m).
inline Eigen::MatrixXd oracle_retention(const Eigen::MatrixXd& x, const kernels::AdapterParams& p,
                                        double gamma, double theta) {
  const Eigen::MatrixXd q = x * p.wq, k = x * p.wk, v = x * p.wv;
  const Eigen::Index n = x.rows(), dp = q.cols(), pairs = dp / 2;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, dp);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      const std::complex<double> phase = std::polar(1.0, double(a - b) * theta);
      double score = 0.0;
      for (Eigen::Index c = 0; c < pairs; ++c) {
        const std::complex<double> qc(q(a, 2 * c), q(a, 2 * c + 1));
        const std::complex<double> kc(k(b, 2 * c), k(b, 2 * c + 1));
        score += (qc * std::conj(kc) * phase).real();
      }
      if (dp % 2 == 1) score += q(a, dp - 1) * k(b, dp - 1);
      out.row(a) += std::pow(gamma, double(a - b)) * score * v.row(b);
    }
  }
  return out;
}

struct RandomKernelCase {
  kernels::AdapterConfig config;
  kernels::AdapterParams params;
  Eigen::MatrixXd x;
  std::vector<Eigen::Index> cuts;  // chunk lengths summing to x.rows()
};

inline RandomKernelCase random_kernel_case(std::uint64_t seed, kernels::AdapterKind kind,
                                           Eigen::Index max_frames = 40) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  RandomKernelCase c;
  c.config.kind = kind;
  c.config.d = pick(2, 12);
  c.config.d_prime = pick(1, c.config.d);
  c.config.kernel_size = pick(1, 4);
  c.config.lookback = c.config.kernel_size - 1;
  c.config.depthwise = pick(0, 1) == 1;
  c.config.gamma = std::uniform_real_distribution<double>(0.5, 0.99)(rng);
  c.config.theta = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  c.config.parallel_cap = pick(1, 16);
  c.params = kernels::init_params(c.config, rng());
  randomize(c.params, rng());
  const Eigen::Index n = pick(1, int(max_frames));
  c.x = random_matrix(n, c.config.d, rng());
  Eigen::Index left = n;
  while (left > 0) {
    const Eigen::Index len = std::min<Eigen::Index>(left, pick(1, 7));
    c.cuts.push_back(len);
    left -= len;
  }
  return c;
}

}  // namespace streamstart::testing
