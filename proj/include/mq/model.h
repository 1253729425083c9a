// include/mq/model.h

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

#ifndef MQ_MODEL_H_
#define MQ_MODEL_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mq/config.h"
#include "mq/layers.h"
#include "mq/tensor.h"

namespace mq {

// Squeeze-excite channel gate: pooled statistics pass through a shared
// two-layer bottleneck MLP, and the sigmoid of the summed paths scales each
// channel. Gate values are strictly inside (0,1) for finite inputs.
class ChannelAttention {
 public:
  ChannelAttention(int channels, int reduction, std::mt19937_64& rng);

  // Gate vector w in (0,1)^C for input x (T x C).
  Tensor gate(const Tensor& x) const;
  // x scaled per channel by gate(x).
  Tensor forward(const Tensor& x) const;

  const Tensor& w1() const { return w1_; }
  const Tensor& w2() const { return w2_; }
  Tensor& w1() { return w1_; }
  Tensor& w2() { return w2_; }
  int channels() const { return channels_; }
  std::int64_t param_count() const;

 private:
  int channels_ = 0;
  int reduction_ = 0;
  Tensor w1_;  // (C/D) x C
  Tensor w2_;  // C x (C/D)
};

// Gate probes captured during a forward pass, for inspection and tests.
struct ForwardTrace {
  std::vector<Tensor> attention_gates;  // every stream gate, network order
  Tensor fusion_gate;                   // concatenated per-group gate
  std::vector<Tensor> group_outputs;    // tap fed to the fusion module
  std::vector<Tensor> fused_outputs;    // per-group fused results
};

// One stream of a conv module: dilated depthwise, pointwise, BN, and an
// optional channel gate. All streams of a module share K and
// output channels; dilations are the module's stride set.
struct StreamBranch {
  StreamBranch(int in_channels, int out_channels, int kernel, int dilation,
               std::mt19937_64& rng);
  DepthwiseConv1d depthwise;
  PointwiseConv1d pointwise;
  BatchNorm1d bn;
  std::optional<ChannelAttention> attention;  // set by the owning module
};

// Multi-resolution separable conv module: parallel dilated streams summed
// over the channel dimension. With one stream and no gate this is exactly a
// time-channel separable conv layer.
class MultiResModule {
 public:
  MultiResModule(int in_channels, int out_channels, int kernel,
                 const std::vector<int>& dilations, bool attention_on,
                 bool attention_share, int reduction, std::mt19937_64& rng);

  // defer_relu leaves the summed stream output pre-activation so the caller
  // can add a residual branch before the nonlinearity.
  Tensor forward(const Tensor& x, bool training, bool defer_relu,
                 ForwardTrace* trace = nullptr);

  int num_streams() const { return static_cast<int>(streams_.size()); }
  std::vector<StreamBranch>& streams() { return streams_; }
  ChannelAttention* shared_attention() { return shared_attention_.get(); }
  std::int64_t param_count() const;

 private:
  std::vector<StreamBranch> streams_;
  // In shared-gate mode all streams point at shared_attention_.
  std::shared_ptr<ChannelAttention> shared_attention_;
  bool attention_on_ = false;
  bool attention_share_ = false;
};

// Residual branch of a block: pointwise projection plus BN on the block
// input, added before the block's final ReLU.
struct BlockResidual {
  BlockResidual(int in_channels, int out_channels, std::mt19937_64& rng);
  PointwiseConv1d pointwise;
  BatchNorm1d bn;
};

// A B row: `repeat` stacked blocks of `modules` conv modules each.
class BlockGroup {
 public:
  BlockGroup(const RowConfig& row, int in_channels, const ModelConfig& cfg,
             std::mt19937_64& rng);

  // Returns the group output; *tap receives the fusion input, which is the
  // same tensor for fusion_tap=post or the last pre-ReLU sum for =pre.
  Tensor forward(const Tensor& x, bool training, Tensor* tap,
                 ForwardTrace* trace = nullptr);

  const std::string& name() const { return name_; }
  int out_channels() const { return out_channels_; }
  std::vector<std::vector<MultiResModule>>& blocks() { return blocks_; }
  std::vector<std::optional<BlockResidual>>& residuals() {
    return residuals_;
  }

 private:
  std::string name_;
  int out_channels_ = 0;
  bool tap_pre_ = false;
  std::vector<std::vector<MultiResModule>> blocks_;   // [repeat][module]
  std::vector<std::optional<BlockResidual>> residuals_;  // per repeat
};

// Cross-group gate and fused residual chain over the group outputs.
class FusionModule {
 public:
  FusionModule(const std::vector<int>& group_channels, int reduction,
               std::mt19937_64& rng);

  // Inputs are the per-group taps y_i (T x C_i); returns every fused output
  // (the network consumes the last one).
  std::vector<Tensor> forward(const std::vector<Tensor>& group_outputs,
                              ForwardTrace* trace = nullptr) const;

  Tensor gate(const std::vector<Tensor>& group_outputs) const;
  const Tensor& w1() const { return w1_; }
  const Tensor& w2() const { return w2_; }
  Tensor& w1() { return w1_; }
  Tensor& w2() { return w2_; }
  std::vector<std::optional<PointwiseConv1d>>& projections() {
    return projections_;
  }
  int fused_channels() const { return fused_channels_; }
  std::int64_t param_count() const;

 private:
  std::vector<int> group_channels_;
  int fused_channels_ = 0;
  Tensor w1_;  // (C-hat / D-hat) x C-hat
  Tensor w2_;  // C-hat x (C-hat / D-hat)
  // projections_[i] maps fused output i into group i+1's channel count when
  // the two differ; identity boundaries stay empty.
  std::vector<std::optional<PointwiseConv1d>> projections_;
};

// A parameter or persistent buffer with its stable checkpoint name.
struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

// The full network: C1 stem, B groups, optional fusion, C2/C3/C4 head, and
// a log-softmax output layer.
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  // features: T x input_dim. Returns T x (vocab+1) log-probabilities.
  // Training mode updates BN running statistics; eval mode is const.
  Tensor forward(const Tensor& features, bool training,
                 ForwardTrace* trace = nullptr);

  const ModelConfig& config() const { return cfg_; }
  // Stable ordered parameter list, BN running stats included as
  // non-trainable buffers. Order defines the checkpoint layout.
  const std::vector<NamedTensor>& parameters() const { return params_; }
  std::int64_t trainable_param_count() const;

 private:
  void register_params();

  ModelConfig cfg_;
  std::unique_ptr<MultiResModule> c1_;
  std::vector<BlockGroup> groups_;
  std::unique_ptr<FusionModule> fusion_;
  std::unique_ptr<MultiResModule> c2_;
  std::unique_ptr<PlainConv1d> c3_conv_;
  std::unique_ptr<BatchNorm1d> c3_bn_;
  std::unique_ptr<PlainConv1d> c4_conv_;
  std::vector<NamedTensor> params_;
};

std::unique_ptr<Model> build_model(const ModelConfig& cfg,
                                   std::uint64_t seed);

// Analytic parameter accounting, itemized the way the layers compose.
struct RowParamCount {
  std::string row;
  std::int64_t depthwise = 0;
  std::int64_t pointwise = 0;  // includes residual and head conv weights
  std::int64_t bn = 0;
  std::int64_t attention = 0;
  std::int64_t total = 0;
};

struct ParamCountReport {
  std::vector<RowParamCount> rows;  // per network row plus "fusion"
  std::int64_t total = 0;
};

ParamCountReport count_params(const ModelConfig& cfg);

// Idealized conv-core parameter costs (BN and gates excluded), used to
// compare layer families at equal K and C.
std::int64_t separable_conv_core_params(int kernel, int channels,
                                        int streams);
std::int64_t traditional_conv_core_params(int kernel, int channels);

}  // namespace mq

#endif  // MQ_MODEL_H_
