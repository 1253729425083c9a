// src/config.cc

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

#include "mq/config.h"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "mq/util.h"

namespace mq {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw std::invalid_argument("model config: " + where + ": " + what);
}

int parse_int(const std::string& where, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int n = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    fail(where, "expected an integer, got '" + v + "'");
  }
}

bool parse_flag(const std::string& where, const std::string& v) {
  if (v == "on") return true;
  if (v == "off") return false;
  fail(where, "expected on|off, got '" + v + "'");
}

std::vector<int> parse_stride_set(const std::string& where,
                                  const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(parse_int(where, tok));
  }
  if (out.empty()) fail(where, "stride_set is empty");
  return out;
}

bool is_b_row(const RowConfig& r) {
  return !r.name.empty() && r.name[0] == 'B';
}

}  // namespace

int ModelConfig::num_groups() const {
  int n = 0;
  for (const auto& r : rows) n += is_b_row(r) ? 1 : 0;
  return n;
}

const RowConfig& ModelConfig::row(const std::string& name) const {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw std::invalid_argument("model config: no row named " + name);
}

int ModelConfig::fused_channels() const {
  int sum = 0;
  for (const auto& r : rows)
    if (is_b_row(r)) sum += r.channels;
  return sum;
}

ModelConfig parse_model_config(const std::string& text) {
  ModelConfig cfg;
  RowConfig* row = nullptr;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw
                                                      : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);

    if (line.front() == '[') {
      if (line.back() != ']') fail(where, "unterminated section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) fail(where, "empty section name");
      cfg.rows.push_back(RowConfig{});
      row = &cfg.rows.back();
      row->name = name;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(where, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty()) fail(where, "expected key = value");

    if (row == nullptr) {
      if (key == "name") cfg.name = val;
      else if (key == "input_dim") cfg.input_dim = parse_int(where, val);
      else if (key == "vocab") cfg.vocab_size = parse_int(where, val);
      else if (key == "reduction") cfg.reduction = parse_int(where, val);
      else if (key == "fusion_reduction")
        cfg.fusion_reduction = parse_int(where, val);
      else if (key == "multi_res") cfg.multi_res_on = parse_flag(where, val);
      else if (key == "attention") cfg.attention_on = parse_flag(where, val);
      else if (key == "fusion") cfg.fusion_on = parse_flag(where, val);
      else if (key == "block_residual")
        cfg.block_residual_on = parse_flag(where, val);
      else if (key == "attention_share")
        cfg.attention_share = parse_flag(where, val);
      else if (key == "fusion_tap") cfg.fusion_tap = val;
      else if (key == "speed_perturb")
        cfg.speed_perturb = parse_flag(where, val);
      else fail(where, "unknown global key '" + key + "'");
      continue;
    }

    const std::string rwhere = "row " + row->name + ", " + where;
    if (key == "repeat") row->repeat = parse_int(rwhere, val);
    else if (key == "modules") row->modules = parse_int(rwhere, val);
    else if (key == "kernel") row->kernel = parse_int(rwhere, val);
    else if (key == "channels") {
      if (val == "labels") {
        row->channels_from_vocab = true;
        row->channels = 0;
      } else {
        row->channels = parse_int(rwhere, val);
      }
    } else if (key == "stride_set") {
      row->stride_set = parse_stride_set(rwhere, val);
    } else {
      fail(rwhere, "unknown row key '" + key + "'");
    }
  }
  return cfg;
}

ModelConfig load_model_config(const std::string& path) {
  return parse_model_config(read_text_file(path));
}

std::string serialize_model_config(const ModelConfig& cfg) {
  std::ostringstream out;
  auto flag = [](bool b) { return b ? "on" : "off"; };
  out << "name = " << cfg.name << "\n";
  out << "input_dim = " << cfg.input_dim << "\n";
  out << "vocab = " << cfg.vocab_size << "\n";
  out << "reduction = " << cfg.reduction << "\n";
  out << "fusion_reduction = " << cfg.fusion_reduction << "\n";
  out << "multi_res = " << flag(cfg.multi_res_on) << "\n";
  out << "attention = " << flag(cfg.attention_on) << "\n";
  out << "fusion = " << flag(cfg.fusion_on) << "\n";
  out << "block_residual = " << flag(cfg.block_residual_on) << "\n";
  out << "attention_share = " << flag(cfg.attention_share) << "\n";
  out << "fusion_tap = " << cfg.fusion_tap << "\n";
  out << "speed_perturb = " << flag(cfg.speed_perturb) << "\n";
  for (const auto& r : cfg.rows) {
    out << "\n[" << r.name << "]\n";
    out << "repeat = " << r.repeat << "\n";
    out << "modules = " << r.modules << "\n";
    out << "kernel = " << r.kernel << "\n";
    if (r.channels_from_vocab && r.channels == 0) {
      out << "channels = labels\n";
    } else {
      out << "channels = " << r.channels << "\n";
    }
    out << "stride_set = ";
    for (std::size_t i = 0; i < r.stride_set.size(); ++i) {
      if (i) out << ",";
      out << r.stride_set[i];
    }
    out << "\n";
  }
  return out.str();
}

void resolve_vocab(ModelConfig& cfg, int vocab_size) {
  if (vocab_size < 1) {
    throw std::invalid_argument("resolve_vocab: vocab size must be >= 1");
  }
  if (cfg.vocab_size != 0 && cfg.vocab_size != vocab_size) {
    throw std::invalid_argument(
        "resolve_vocab: config pins vocab = " +
        std::to_string(cfg.vocab_size) + " but vocabulary has " +
        std::to_string(vocab_size));
  }
  cfg.vocab_size = vocab_size;
  for (auto& r : cfg.rows) {
    if (r.channels_from_vocab) r.channels = vocab_size + 1;
  }
  validate_model_config(cfg);
}

void validate_model_config(ModelConfig& cfg) {
  if (cfg.rows.size() < 5) {
    fail("rows", "need C1, at least one B group, C2, C3, C4; got " +
                     std::to_string(cfg.rows.size()) + " rows");
  }
  if (cfg.speed_perturb) {
    fail("speed_perturb", "reserved flag, not implemented; set it off");
  }
  if (cfg.fusion_tap != "post" && cfg.fusion_tap != "pre") {
    fail("fusion_tap", "expected post|pre, got '" + cfg.fusion_tap + "'");
  }
  if (cfg.input_dim < 1) fail("input_dim", "must be >= 1");
  if (cfg.reduction < 1) fail("reduction", "must be >= 1");
  if (cfg.fusion_reduction < 1) fail("fusion_reduction", "must be >= 1");
  if (cfg.vocab_size < 0) fail("vocab", "must be >= 0");

  const std::size_t n = cfg.rows.size();
  if (cfg.rows[0].name != "C1") fail("row 1", "first row must be C1");
  if (cfg.rows[n - 3].name != "C2" || cfg.rows[n - 2].name != "C3" ||
      cfg.rows[n - 1].name != "C4") {
    fail("rows", "last three rows must be C2, C3, C4 in order");
  }
  for (std::size_t i = 1; i + 3 < n; ++i) {
    const std::string want = "B" + std::to_string(i);
    if (cfg.rows[i].name != want) {
      fail("row " + std::to_string(i + 1),
           "expected group " + want + ", got '" + cfg.rows[i].name + "'");
    }
  }

  if (!cfg.multi_res_on) {
    for (auto& r : cfg.rows) r.stride_set = {1};
  }

  for (auto& r : cfg.rows) {
    const std::string where = "row " + r.name;
    const bool head_1x1 = (r.name == "C3" || r.name == "C4");
    const bool b_row = is_b_row(r);
    if (r.repeat < 1) fail(where, "repeat must be >= 1");
    if (r.modules < 1) fail(where, "modules must be >= 1");
    if (!b_row && (r.repeat != 1 || r.modules != 1)) {
      fail(where, "C rows are single modules (repeat = modules = 1)");
    }
    if (r.channels < 1 && !r.channels_from_vocab) {
      fail(where, "channels must be >= 1");
    }
    if (r.channels_from_vocab && r.name != "C4") {
      fail(where, "only C4 may take channels from the vocabulary");
    }
    if (head_1x1) {
      if (r.kernel != 1) fail(where, "kernel must be 1");
    } else {
      if (r.kernel < 1 || r.kernel % 2 == 0) {
        fail(where, "kernel must be odd for centered same-padding, got " +
                        std::to_string(r.kernel));
      }
    }
    if (r.stride_set.empty()) fail(where, "stride_set missing");
    if (!b_row && r.stride_set != std::vector<int>{1}) {
      fail(where, "C rows use stride_set = 1");
    }
    for (std::size_t i = 0; i < r.stride_set.size(); ++i) {
      if (r.stride_set[i] < 1) fail(where, "stride entries must be >= 1");
      if (i > 0 && r.stride_set[i] <= r.stride_set[i - 1]) {
        fail(where, "stride_set must be strictly ascending");
      }
    }
    if (b_row && cfg.attention_on && r.channels % cfg.reduction != 0) {
      fail(where, "channels " + std::to_string(r.channels) +
                      " not divisible by reduction " +
                      std::to_string(cfg.reduction));
    }
  }

  if (cfg.vocab_size > 0) {
    const RowConfig& c4 = cfg.row("C4");
    if (!c4.channels_from_vocab && c4.channels != cfg.vocab_size + 1) {
      fail("row C4", "channels must equal vocab + 1 (blank), expected " +
                         std::to_string(cfg.vocab_size + 1) + ", got " +
                         std::to_string(c4.channels));
    }
  }
  if (cfg.fusion_on) {
    const int fused = cfg.fused_channels();
    if (fused % cfg.fusion_reduction != 0) {
      fail("fusion", "summed group channels " + std::to_string(fused) +
                         " not divisible by fusion_reduction " +
                         std::to_string(cfg.fusion_reduction));
    }
  }
}

}  // namespace mq
