// src/checkpoint.cc

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

#include "mq/checkpoint.h"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mq/config.h"
#include "mq/util.h"

namespace mq {

namespace {

constexpr std::uint32_t kVersion = 1;

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const std::uint32_t len = read_u32(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("checkpoint: truncated string field");
  return s;
}

void read_magic(std::istream& in, const std::string& path) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "MQCK") {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
}

}  // namespace

std::uint64_t model_config_hash(const ModelConfig& cfg) {
  return fnv1a64(serialize_model_config(cfg));
}

void save_checkpoint(const std::string& path, const Model& model,
                     std::uint64_t step, const Novograd* optimizer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write("MQCK", 4);
  write_u32(out, kVersion);
  write_u64(out, model_config_hash(model.config()));
  write_u64(out, step);

  const auto& params = model.parameters();
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    write_string(out, p.name);
    out.put(p.trainable ? 1 : 0);
    write_u32(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (int d = 0; d < p.tensor.rank(); ++d) {
      write_u32(out, static_cast<std::uint32_t>(p.tensor.dim(d)));
    }
  }
  for (const auto& p : params) {
    write_f64_array(out, p.tensor.data(),
                    static_cast<std::size_t>(p.tensor.numel()));
  }

  out.put(optimizer != nullptr ? 1 : 0);
  if (optimizer != nullptr) {
    const auto& slots = optimizer->slots();
    write_u32(out, static_cast<std::uint32_t>(slots.size()));
    for (const auto& s : slots) {
      write_string(out, s.name);
      out.put(s.initialized ? 1 : 0);
      write_f64(out, s.v);
      write_u64(out, s.m.size());
      write_f64_array(out, s.m.data(), s.m.size());
    }
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

std::uint64_t load_checkpoint(const std::string& path, Model& model,
                              Novograd* optimizer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  read_magic(in, path);
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             std::to_string(version));
  }
  const std::uint64_t hash = read_u64(in);
  if (hash != model_config_hash(model.config())) {
    throw std::runtime_error(
        "load_checkpoint: config hash mismatch; the checkpoint was written "
        "for a different architecture or vocabulary");
  }
  const std::uint64_t step = read_u64(in);

  const auto& params = model.parameters();
  const std::uint32_t count = read_u32(in);
  if (count != params.size()) {
    throw std::runtime_error("load_checkpoint: manifest has " +
                             std::to_string(count) + " tensors, model has " +
                             std::to_string(params.size()));
  }
  for (const auto& p : params) {
    const std::string name = read_string(in);
    const bool trainable = in.get() != 0;
    const std::uint32_t rank = read_u32(in);
    std::vector<int> dims(rank);
    for (auto& d : dims) d = static_cast<int>(read_u32(in));
    if (name != p.name || trainable != p.trainable ||
        rank != static_cast<std::uint32_t>(p.tensor.rank()) ||
        dims != p.tensor.shape()) {
      throw std::runtime_error("load_checkpoint: manifest entry '" + name +
                               "' does not match model parameter '" + p.name +
                               "'");
    }
  }
  for (const auto& p : params) {
    Tensor t = p.tensor;  // shares storage
    read_f64_array(in, t.data(), static_cast<std::size_t>(t.numel()));
  }

  const int has_opt = in.get();
  if (has_opt == std::char_traits<char>::eof()) {
    throw std::runtime_error("load_checkpoint: truncated file " + path);
  }
  if (optimizer != nullptr) {
    if (has_opt == 0) {
      throw std::runtime_error(
          "load_checkpoint: no optimizer state stored in " + path);
    }
    auto& slots = optimizer->slots();
    const std::uint32_t n = read_u32(in);
    if (n != slots.size()) {
      throw std::runtime_error("load_checkpoint: optimizer has " +
                               std::to_string(slots.size()) +
                               " slots, file has " + std::to_string(n));
    }
    for (auto& s : slots) {
      const std::string name = read_string(in);
      if (name != s.name) {
        throw std::runtime_error("load_checkpoint: optimizer slot '" + name +
                                 "' does not match '" + s.name + "'");
      }
      s.initialized = in.get() != 0;
      s.v = read_f64(in);
      const std::uint64_t m_len = read_u64(in);
      if (m_len != s.m.size()) {
        throw std::runtime_error(
            "load_checkpoint: optimizer buffer size mismatch for " + name);
      }
      read_f64_array(in, s.m.data(), s.m.size());
    }
  }
  return step;
}

CheckpointInfo inspect_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("inspect_checkpoint: cannot open " + path);
  }
  read_magic(in, path);
  CheckpointInfo info;
  info.version = read_u32(in);
  info.config_hash = read_u64(in);
  info.step = read_u64(in);
  info.num_tensors = read_u32(in);
  // The optimizer flag sits after the payload, so walk the manifest to
  // learn the payload size and hop over it.
  std::uint64_t numel = 0;
  for (std::uint32_t i = 0; i < info.num_tensors; ++i) {
    read_string(in);
    in.get();  // trainable flag
    const std::uint32_t rank = read_u32(in);
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) n *= read_u32(in);
    numel += n;
  }
  in.seekg(static_cast<std::streamoff>(numel * sizeof(double)),
           std::ios::cur);
  const int has_opt = in.get();
  if (!in || has_opt == std::char_traits<char>::eof()) {
    throw std::runtime_error("inspect_checkpoint: truncated file " + path);
  }
  info.has_optimizer = has_opt != 0;
  return info;
}

}  // namespace mq
