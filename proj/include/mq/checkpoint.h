// include/mq/checkpoint.h

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

#ifndef MQ_CHECKPOINT_H_
#define MQ_CHECKPOINT_H_

#include <cstdint>
#include <string>

#include "mq/model.h"
#include "mq/optim.h"

namespace mq {

// Binary snapshot of a model (every named tensor, BN statistics included)
// plus optional optimizer state. Little-endian layout:
//   "MQCK", u32 version,
//   u64 config hash (FNV-1a of the canonical config text), u64 step,
//   u32 tensor count, then per tensor: u32 name length, name bytes,
//   u8 trainable, u32 rank, u32 dims[rank];
//   float64 payload per tensor in manifest order;
//   u8 optimizer flag; when set: u32 slot count, then per slot: u32 name
//   length, name bytes, u8 initialized, f64 v, u64 m length, f64 m[...].
struct CheckpointInfo {
  std::uint32_t version = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t step = 0;
  std::uint32_t num_tensors = 0;
  bool has_optimizer = false;
};

std::uint64_t model_config_hash(const ModelConfig& cfg);

void save_checkpoint(const std::string& path, const Model& model,
                     std::uint64_t step, const Novograd* optimizer = nullptr);

// Restores tensors (and optimizer slots when requested) into an
// already-built model. The manifest must match the model's parameter list
// name-for-name and shape-for-shape, and the config hash must match.
// Returns the stored step.
std::uint64_t load_checkpoint(const std::string& path, Model& model,
                              Novograd* optimizer = nullptr);

CheckpointInfo inspect_checkpoint(const std::string& path);

}  // namespace mq

#endif  // MQ_CHECKPOINT_H_
