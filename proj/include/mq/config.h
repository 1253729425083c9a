// include/mq/config.h

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

#ifndef MQ_CONFIG_H_
#define MQ_CONFIG_H_

#include <string>
#include <vector>

namespace mq {

// One architecture row. The network is a C1 stem, a run of B groups, and a
// C2/C3/C4 head; every row carries the same five knobs.
struct RowConfig {
  std::string name;            // "C1", "B1".."Bn", "C2", "C3", "C4"
  int repeat = 1;              // R: times the block is stacked
  int modules = 1;             // M: conv modules per block
  int kernel = 1;              // K
  int channels = 0;            // C: output channels (0 while "labels" pends)
  bool channels_from_vocab = false;  // C4 may defer channels to the vocab
  std::vector<int> stride_set;       // per-stream dilations, ascending
};

struct ModelConfig {
  std::string name = "model";
  int input_dim = 64;          // feature channels consumed by C1
  int vocab_size = 0;          // label characters, excluding blank; 0 = unset
  int reduction = 16;          // D: attention bottleneck ratio
  int fusion_reduction = 16;   // D-hat: fusion gate bottleneck ratio
  bool multi_res_on = true;    // off forces every stride set to [1]
  bool attention_on = true;
  bool fusion_on = true;
  bool block_residual_on = true;   // per-block skip (pointwise + BN)
  bool attention_share = false;    // share one gate MLP across streams
  std::string fusion_tap = "post"; // group output tap: post|pre final ReLU
  bool speed_perturb = false;      // reserved; loading rejects "on"
  std::vector<RowConfig> rows;

  int num_groups() const;                      // count of B rows
  const RowConfig& row(const std::string& name) const;  // throws if absent
  int fused_channels() const;                  // C-hat: sum of B channels
};

// Parses the section-per-row text format:
//   globals as `key = value` lines, then one `[NAME]` section per row with
//   repeat/modules/kernel/channels/stride_set keys. `#` starts a comment.
// Performs syntactic checks only; call validate_model_config for semantics.
ModelConfig parse_model_config(const std::string& text);
ModelConfig load_model_config(const std::string& path);

// Canonical round-trippable rendering; also the checkpoint-hash preimage.
std::string serialize_model_config(const ModelConfig& cfg);

// Fills vocab-dependent fields (C4 channels = vocab_size + 1) and re-checks.
void resolve_vocab(ModelConfig& cfg, int vocab_size);

// Full semantic validation. Throws std::invalid_argument naming the row and
// field on the first violation. multi_res_on=false is applied here by
// collapsing stride sets to [1].
void validate_model_config(ModelConfig& cfg);

}  // namespace mq

#endif  // MQ_CONFIG_H_
