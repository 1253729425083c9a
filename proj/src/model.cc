// src/model.cc

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

#include "mq/model.h"

#include <cmath>
#include <stdexcept>

namespace mq {

namespace {

double init_bound(int fan_in) { return 1.0 / std::sqrt(double(fan_in)); }

// Bottleneck MLP shared by the channel and fusion gates: w2 * relu(w1 * v).
Tensor gate_mlp(const Tensor& w1, const Tensor& w2, const Tensor& v) {
  Tensor col = reshape(v, {v.dim(0), 1});
  Tensor hidden = relu(matmul(w1, col));
  return matmul(w2, hidden);
}

}  // namespace

// ---------------------------------------------------------------------------
// ChannelAttention

ChannelAttention::ChannelAttention(int channels, int reduction,
                                   std::mt19937_64& rng)
    : channels_(channels), reduction_(reduction) {
  if (reduction < 1 || channels % reduction != 0) {
    throw std::invalid_argument(
        "channel attention: channels " + std::to_string(channels) +
        " not divisible by reduction " + std::to_string(reduction));
  }
  const int hidden = channels / reduction;
  const double b1 = init_bound(channels);
  const double b2 = init_bound(hidden);
  w1_ = Tensor::uniform({hidden, channels}, -b1, b1, rng, true);
  w2_ = Tensor::uniform({channels, hidden}, -b2, b2, rng, true);
}

Tensor ChannelAttention::gate(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != channels_) {
    throw std::invalid_argument("channel attention: expected T x " +
                                std::to_string(channels_) + ", got " +
                                x.shape_str());
  }
  Tensor avg_path = gate_mlp(w1_, w2_, mean_over_time(x));
  Tensor max_path = gate_mlp(w1_, w2_, max_over_time(x));
  return reshape(sigmoid(add(avg_path, max_path)), {channels_});
}

Tensor ChannelAttention::forward(const Tensor& x) const {
  return mul(x, gate(x));
}

std::int64_t ChannelAttention::param_count() const {
  return w1_.numel() + w2_.numel();
}

// ---------------------------------------------------------------------------
// MultiResModule

StreamBranch::StreamBranch(int in_channels, int out_channels, int kernel,
                           int dilation, std::mt19937_64& rng)
    : depthwise(kernel, in_channels, dilation, rng),
      pointwise(in_channels, out_channels, /*with_bias=*/false, rng),
      bn(out_channels) {}

MultiResModule::MultiResModule(int in_channels, int out_channels, int kernel,
                               const std::vector<int>& dilations,
                               bool attention_on, bool attention_share,
                               int reduction, std::mt19937_64& rng)
    : attention_on_(attention_on), attention_share_(attention_share) {
  if (dilations.empty()) {
    throw std::invalid_argument("multi-res module: empty stride set");
  }
  streams_.reserve(dilations.size());
  for (int d : dilations) {
    streams_.emplace_back(in_channels, out_channels, kernel, d, rng);
    if (attention_on && !attention_share) {
      streams_.back().attention.emplace(out_channels, reduction, rng);
    }
  }
  if (attention_on && attention_share) {
    shared_attention_ =
        std::make_shared<ChannelAttention>(out_channels, reduction, rng);
  }
}

Tensor MultiResModule::forward(const Tensor& x, bool training,
                               bool defer_relu, ForwardTrace* trace) {
  Tensor sum;
  for (auto& s : streams_) {
    Tensor h = s.depthwise.forward(x);
    h = s.pointwise.forward(h);
    h = s.bn.forward(h, training);
    if (!defer_relu) h = relu(h);
    if (attention_on_) {
      const ChannelAttention& att =
          attention_share_ ? *shared_attention_ : *s.attention;
      Tensor w = att.gate(h);
      if (trace != nullptr) trace->attention_gates.push_back(w);
      h = mul(h, w);
    }
    sum = sum.defined() ? add(sum, h) : h;
  }
  return sum;
}

std::int64_t MultiResModule::param_count() const {
  std::int64_t n = 0;
  for (const auto& s : streams_) {
    n += s.depthwise.param_count() + s.pointwise.param_count() +
         s.bn.param_count();
    if (s.attention) n += s.attention->param_count();
  }
  if (shared_attention_) n += shared_attention_->param_count();
  return n;
}

// ---------------------------------------------------------------------------
// BlockGroup

BlockResidual::BlockResidual(int in_channels, int out_channels,
                             std::mt19937_64& rng)
    : pointwise(in_channels, out_channels, /*with_bias=*/false, rng),
      bn(out_channels) {}

BlockGroup::BlockGroup(const RowConfig& row, int in_channels,
                       const ModelConfig& cfg, std::mt19937_64& rng)
    : name_(row.name),
      out_channels_(row.channels),
      tap_pre_(cfg.fusion_tap == "pre") {
  int block_in = in_channels;
  for (int r = 0; r < row.repeat; ++r) {
    std::vector<MultiResModule> mods;
    mods.reserve(row.modules);
    int mod_in = block_in;
    for (int m = 0; m < row.modules; ++m) {
      mods.emplace_back(mod_in, row.channels, row.kernel, row.stride_set,
                        cfg.attention_on, cfg.attention_share, cfg.reduction,
                        rng);
      mod_in = row.channels;
    }
    blocks_.push_back(std::move(mods));
    if (cfg.block_residual_on) {
      residuals_.emplace_back(BlockResidual(block_in, row.channels, rng));
    } else {
      residuals_.emplace_back(std::nullopt);
    }
    block_in = row.channels;
  }
}

Tensor BlockGroup::forward(const Tensor& x, bool training, Tensor* tap,
                           ForwardTrace* trace) {
  Tensor h = x;
  Tensor last_pre;
  for (std::size_t r = 0; r < blocks_.size(); ++r) {
    Tensor block_in = h;
    auto& mods = blocks_[r];
    const bool last_repeat = (r + 1 == blocks_.size());
    for (std::size_t m = 0; m < mods.size(); ++m) {
      const bool last_module = (m + 1 == mods.size());
      // The final ReLU is deferred past the residual add; without a
      // residual it is deferred only when the pre-activation tap is needed.
      const bool defer = last_module && (residuals_[r].has_value() ||
                                         (tap_pre_ && last_repeat));
      if (last_module) {
        Tensor pre = mods[m].forward(h, training, defer, trace);
        if (residuals_[r].has_value()) {
          Tensor res = residuals_[r]->bn.forward(
              residuals_[r]->pointwise.forward(block_in), training);
          pre = add(pre, res);
        }
        last_pre = pre;
        h = defer ? relu(pre) : pre;
      } else {
        h = mods[m].forward(h, training, /*defer_relu=*/false, trace);
      }
    }
  }
  if (tap != nullptr) *tap = tap_pre_ ? last_pre : h;
  return h;
}

// ---------------------------------------------------------------------------
// FusionModule

FusionModule::FusionModule(const std::vector<int>& group_channels,
                           int reduction, std::mt19937_64& rng)
    : group_channels_(group_channels) {
  if (group_channels.empty()) {
    throw std::invalid_argument("fusion: no group outputs to fuse");
  }
  for (int c : group_channels_) fused_channels_ += c;
  if (reduction < 1 || fused_channels_ % reduction != 0) {
    throw std::invalid_argument(
        "fusion: summed channels " + std::to_string(fused_channels_) +
        " not divisible by reduction " + std::to_string(reduction));
  }
  const int hidden = fused_channels_ / reduction;
  const double b1 = init_bound(fused_channels_);
  const double b2 = init_bound(hidden);
  w1_ = Tensor::uniform({hidden, fused_channels_}, -b1, b1, rng, true);
  w2_ = Tensor::uniform({fused_channels_, hidden}, -b2, b2, rng, true);
  for (std::size_t i = 0; i + 1 < group_channels_.size(); ++i) {
    if (group_channels_[i] != group_channels_[i + 1]) {
      projections_.emplace_back(PointwiseConv1d(group_channels_[i],
                                                group_channels_[i + 1],
                                                /*with_bias=*/false, rng));
    } else {
      projections_.emplace_back(std::nullopt);
    }
  }
}

Tensor FusionModule::gate(const std::vector<Tensor>& group_outputs) const {
  if (group_outputs.size() != group_channels_.size()) {
    throw std::invalid_argument(
        "fusion: expected " + std::to_string(group_channels_.size()) +
        " group outputs, got " + std::to_string(group_outputs.size()));
  }
  std::vector<Tensor> avgs, maxs;
  for (std::size_t i = 0; i < group_outputs.size(); ++i) {
    const Tensor& y = group_outputs[i];
    if (y.rank() != 2 || y.dim(1) != group_channels_[i]) {
      throw std::invalid_argument(
          "fusion: group output " + std::to_string(i + 1) + " has shape " +
          y.shape_str() + ", expected T x " +
          std::to_string(group_channels_[i]));
    }
    avgs.push_back(mean_over_time(y));
    maxs.push_back(max_over_time(y));
  }
  Tensor avg_path = gate_mlp(w1_, w2_, concat(avgs));
  Tensor max_path = gate_mlp(w1_, w2_, concat(maxs));
  return reshape(sigmoid(add(avg_path, max_path)), {fused_channels_});
}

std::vector<Tensor> FusionModule::forward(
    const std::vector<Tensor>& group_outputs, ForwardTrace* trace) const {
  Tensor w = gate(group_outputs);
  if (trace != nullptr) trace->fusion_gate = w;

  std::vector<Tensor> fused;
  int offset = 0;
  for (std::size_t i = 0; i < group_outputs.size(); ++i) {
    Tensor wi = slice(w, offset, group_channels_[i]);
    offset += group_channels_[i];
    Tensor y = mul(group_outputs[i], wi);
    if (i > 0) {
      Tensor prev = fused[i - 1];
      if (projections_[i - 1].has_value()) {
        prev = projections_[i - 1]->forward(prev);
      }
      y = add(y, prev);
    }
    fused.push_back(y);
  }
  if (trace != nullptr) trace->fused_outputs = fused;
  return fused;
}

std::int64_t FusionModule::param_count() const {
  std::int64_t n = w1_.numel() + w2_.numel();
  for (const auto& p : projections_) {
    if (p.has_value()) n += p->param_count();
  }
  return n;
}

// ---------------------------------------------------------------------------
// Model

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg_.vocab_size < 1) {
    throw std::invalid_argument(
        "build_model: vocab size unresolved; call resolve_vocab first");
  }
  validate_model_config(cfg_);

  std::mt19937_64 rng(seed);
  const auto& rows = cfg_.rows;
  const RowConfig& c1 = rows.front();
  c1_ = std::make_unique<MultiResModule>(
      cfg_.input_dim, c1.channels, c1.kernel, c1.stride_set,
      /*attention_on=*/false, false, cfg_.reduction, rng);

  int ch = c1.channels;
  std::vector<int> group_channels;
  for (std::size_t i = 1; i + 3 < rows.size(); ++i) {
    groups_.emplace_back(rows[i], ch, cfg_, rng);
    ch = rows[i].channels;
    group_channels.push_back(ch);
  }
  if (cfg_.fusion_on) {
    fusion_ = std::make_unique<FusionModule>(group_channels,
                                             cfg_.fusion_reduction, rng);
  }

  const RowConfig& c2 = rows[rows.size() - 3];
  c2_ = std::make_unique<MultiResModule>(ch, c2.channels, c2.kernel,
                                         c2.stride_set, /*attention_on=*/false,
                                         false, cfg_.reduction, rng);
  ch = c2.channels;

  const RowConfig& c3 = rows[rows.size() - 2];
  c3_conv_ = std::make_unique<PlainConv1d>(ch, c3.channels, 1, 1,
                                           /*with_bias=*/false, rng);
  c3_bn_ = std::make_unique<BatchNorm1d>(c3.channels);
  ch = c3.channels;

  const RowConfig& c4 = rows.back();
  c4_conv_ = std::make_unique<PlainConv1d>(ch, c4.channels, 1, 1,
                                           /*with_bias=*/true, rng);
  register_params();
}

Tensor Model::forward(const Tensor& features, bool training,
                      ForwardTrace* trace) {
  if (features.rank() != 2 || features.dim(1) != cfg_.input_dim) {
    throw std::invalid_argument("model forward: expected T x " +
                                std::to_string(cfg_.input_dim) +
                                " features, got " + features.shape_str());
  }
  Tensor h = c1_->forward(features, training, /*defer_relu=*/false, trace);
  std::vector<Tensor> taps;
  for (auto& g : groups_) {
    Tensor tap;
    h = g.forward(h, training, &tap, trace);
    taps.push_back(tap);
  }
  if (trace != nullptr) trace->group_outputs = taps;
  if (fusion_) {
    std::vector<Tensor> fused = fusion_->forward(taps, trace);
    h = fused.back();
  }
  h = c2_->forward(h, training, /*defer_relu=*/false, trace);
  h = relu(c3_bn_->forward(c3_conv_->forward(h), training));
  h = c4_conv_->forward(h);
  return log_softmax_rows(h);
}

std::int64_t Model::trainable_param_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.tensor.numel();
  }
  return n;
}

void Model::register_params() {
  params_.clear();
  auto add = [this](const std::string& name, const Tensor& t,
                    bool trainable) {
    params_.push_back(NamedTensor{name, t, trainable});
  };
  auto add_bn = [&](const std::string& prefix, BatchNorm1d& bn) {
    add(prefix + ".gamma", bn.gamma(), true);
    add(prefix + ".beta", bn.beta(), true);
    add(prefix + ".running_mean", bn.running_mean(), false);
    add(prefix + ".running_var", bn.running_var(), false);
  };
  auto add_module = [&](const std::string& prefix, MultiResModule& mod) {
    auto& streams = mod.streams();
    for (std::size_t j = 0; j < streams.size(); ++j) {
      const std::string sp = prefix + ".s" + std::to_string(j);
      add(sp + ".dw.kernel", streams[j].depthwise.kernel(), true);
      add(sp + ".pw.weight", streams[j].pointwise.weight(), true);
      add_bn(sp + ".bn", streams[j].bn);
      if (streams[j].attention.has_value()) {
        add(sp + ".att.w1", streams[j].attention->w1(), true);
        add(sp + ".att.w2", streams[j].attention->w2(), true);
      }
    }
    if (mod.shared_attention() != nullptr) {
      add(prefix + ".att.w1", mod.shared_attention()->w1(), true);
      add(prefix + ".att.w2", mod.shared_attention()->w2(), true);
    }
  };

  add_module("C1", *c1_);
  for (auto& g : groups_) {
    auto& blocks = g.blocks();
    for (std::size_t r = 0; r < blocks.size(); ++r) {
      const std::string rp = g.name() + ".r" + std::to_string(r);
      for (std::size_t m = 0; m < blocks[r].size(); ++m) {
        add_module(rp + ".m" + std::to_string(m), blocks[r][m]);
      }
      if (g.residuals()[r].has_value()) {
        add(rp + ".res.pw.weight", g.residuals()[r]->pointwise.weight(),
            true);
        add_bn(rp + ".res.bn", g.residuals()[r]->bn);
      }
    }
  }
  if (fusion_) {
    add("fusion.w1", fusion_->w1(), true);
    add("fusion.w2", fusion_->w2(), true);
    auto& projs = fusion_->projections();
    for (std::size_t b = 0; b < projs.size(); ++b) {
      if (projs[b].has_value()) {
        add("fusion.proj" + std::to_string(b) + ".weight",
            projs[b]->weight(), true);
      }
    }
  }
  add_module("C2", *c2_);
  add("C3.conv.weight", c3_conv_->weight(), true);
  add_bn("C3.bn", *c3_bn_);
  add("C4.conv.weight", c4_conv_->weight(), true);
  add("C4.conv.bias", c4_conv_->bias(), true);
}

std::unique_ptr<Model> build_model(const ModelConfig& cfg,
                                   std::uint64_t seed) {
  return std::make_unique<Model>(cfg, seed);
}

// ---------------------------------------------------------------------------
// Parameter accounting

ParamCountReport count_params(const ModelConfig& cfg) {
  ModelConfig c = cfg;
  if (c.vocab_size < 1) {
    throw std::invalid_argument(
        "count_params: vocab size unresolved; call resolve_vocab first");
  }
  validate_model_config(c);

  ParamCountReport report;
  auto push = [&report](RowParamCount rc) {
    rc.total = rc.depthwise + rc.pointwise + rc.bn + rc.attention;
    report.total += rc.total;
    report.rows.push_back(rc);
  };

  // Stream set of one conv module with input width x.
  auto module_cost = [&c](RowParamCount& rc, const RowConfig& r, int x,
                          bool with_attention) {
    const std::int64_t s = static_cast<std::int64_t>(r.stride_set.size());
    rc.depthwise += s * r.kernel * x;
    rc.pointwise += s * static_cast<std::int64_t>(x) * r.channels;
    rc.bn += s * 2 * r.channels;
    if (with_attention && c.attention_on) {
      const std::int64_t instances = c.attention_share ? 1 : s;
      rc.attention += instances * 2 *
                      (static_cast<std::int64_t>(r.channels) * r.channels /
                       c.reduction);
    }
  };

  const auto& rows = c.rows;
  int in_ch = c.input_dim;
  std::vector<int> group_channels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RowConfig& r = rows[i];
    RowParamCount rc;
    rc.row = r.name;
    const bool b_row = r.name[0] == 'B';
    if (r.name == "C3") {
      rc.pointwise += static_cast<std::int64_t>(in_ch) * r.channels;
      rc.bn += 2 * r.channels;
    } else if (r.name == "C4") {
      rc.pointwise +=
          static_cast<std::int64_t>(in_ch) * r.channels + r.channels;
    } else {
      int block_in = in_ch;
      for (int rep = 0; rep < r.repeat; ++rep) {
        int mod_in = block_in;
        for (int m = 0; m < r.modules; ++m) {
          module_cost(rc, r, mod_in, b_row);
          mod_in = r.channels;
        }
        if (b_row && c.block_residual_on) {
          rc.pointwise += static_cast<std::int64_t>(block_in) * r.channels;
          rc.bn += 2 * r.channels;
        }
        block_in = r.channels;
      }
    }
    push(rc);
    in_ch = r.channels;
    if (b_row) group_channels.push_back(r.channels);
  }

  if (c.fusion_on) {
    RowParamCount rc;
    rc.row = "fusion";
    std::int64_t fused = 0;
    for (int g : group_channels) fused += g;
    rc.attention += 2 * (fused * fused / c.fusion_reduction);
    for (std::size_t i = 0; i + 1 < group_channels.size(); ++i) {
      if (group_channels[i] != group_channels[i + 1]) {
        rc.pointwise += static_cast<std::int64_t>(group_channels[i]) *
                        group_channels[i + 1];
      }
    }
    push(rc);
  }
  return report;
}

std::int64_t separable_conv_core_params(int kernel, int channels,
                                        int streams) {
  return static_cast<std::int64_t>(kernel) * channels * streams +
         static_cast<std::int64_t>(channels) * channels;
}

std::int64_t traditional_conv_core_params(int kernel, int channels) {
  return static_cast<std::int64_t>(kernel) * channels * channels;
}

}  // namespace mq
