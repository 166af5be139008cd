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

#include <Eigen/Dense>

#include "streamstart/kernels.hpp"

namespace streamstart::kernels::internal {

void check_conv_shape(const Eigen::MatrixXd& w, int kernel_size, Eigen::Index width,
                      bool depthwise);

// Valid correlation over an already padded input; produces n_out rows.
Sequence conv_padded(const Eigen::MatrixXd& padded, const Eigen::MatrixXd& w,
                     int kernel_size, bool depthwise, Eigen::Index n_out);

Eigen::MatrixXd pad_rows(const Sequence& x, int before, int after);

double sigmoid(double x);

// [1, gamma, gamma^2, ..., gamma^(n-1)]
Eigen::VectorXd decay_powers(double gamma, Eigen::Index n);

// Lower-triangular D with D(r, c) = gamma^(r - c).
Eigen::MatrixXd decay_mask(double gamma, Eigen::Index n);

Sequence frozen_mlp(const Sequence& x, const BlockParams& p);

}  // namespace streamstart::kernels::internal
