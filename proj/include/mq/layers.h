// include/mq/layers.h

// Copyright 2026  mqnet authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MQ_LAYERS_H_
#define MQ_LAYERS_H_

#include <random>

#include "mq/tensor.h"

namespace mq {

// K-tap per-channel convolution over time with zero same-padding. The
// receptive field is widened by the dilation (tap spacing) while the output
// keeps the input's T x C shape for every dilation; kernel size must be odd
// so the padding is symmetric.
class DepthwiseConv1d {
 public:
  DepthwiseConv1d(int kernel_size, int channels, int dilation,
                  std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const;

  Tensor& kernel() { return kernel_; }  // K x C
  const Tensor& kernel() const { return kernel_; }
  int kernel_size() const { return kernel_size_; }
  int channels() const { return channels_; }
  int dilation() const { return dilation_; }
  std::int64_t param_count() const;

 private:
  int kernel_size_;
  int channels_;
  int dilation_;
  Tensor kernel_;
};

// 1x1 convolution across channels: a per-frame affine map.
class PointwiseConv1d {
 public:
  PointwiseConv1d(int in_channels, int out_channels, bool with_bias,
                  std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const;

  Tensor& weight() { return weight_; }  // C_out x C_in
  const Tensor& weight() const { return weight_; }
  Tensor& bias() { return bias_; }
  bool has_bias() const { return bias_.defined(); }
  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }
  std::int64_t param_count() const;

 private:
  int in_channels_;
  int out_channels_;
  Tensor weight_;
  Tensor bias_;
};

// Per-channel normalization over the time axis (biased variance), with
// running statistics for eval mode. Train mode needs T >= 2.
class BatchNorm1d {
 public:
  explicit BatchNorm1d(int channels);

  Tensor forward(const Tensor& x, bool training);

  Tensor& gamma() { return gamma_; }
  Tensor& beta() { return beta_; }
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }
  const Tensor& gamma() const { return gamma_; }
  const Tensor& beta() const { return beta_; }
  const Tensor& running_mean() const { return running_mean_; }
  const Tensor& running_var() const { return running_var_; }
  int channels() const { return channels_; }
  double momentum() const { return momentum_; }
  double eps() const { return eps_; }
  std::int64_t param_count() const { return 2 * channels_; }

 private:
  int channels_;
  double momentum_ = 0.1;
  double eps_ = 1e-5;
  Tensor gamma_;
  Tensor beta_;
  Tensor running_mean_;
  Tensor running_var_;
};

// Full cross-channel 1D convolution with same-padding; output length is
// ceil(T / stride).
class PlainConv1d {
 public:
  PlainConv1d(int in_channels, int out_channels, int kernel_size, int stride,
              bool with_bias, std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const;

  Tensor& weight() { return weight_; }  // C_out x C_in x K
  const Tensor& weight() const { return weight_; }
  Tensor& bias() { return bias_; }
  bool has_bias() const { return bias_.defined(); }
  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }
  int kernel_size() const { return kernel_size_; }
  int stride() const { return stride_; }
  std::int64_t param_count() const;

 private:
  int in_channels_;
  int out_channels_;
  int kernel_size_;
  int stride_;
  Tensor weight_;
  Tensor bias_;
};

}  // namespace mq

#endif  // MQ_LAYERS_H_
