// src/optim.cc

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

#include "mq/optim.h"

#include <cmath>
#include <stdexcept>

namespace mq {

Novograd::Novograd(const std::vector<NamedTensor>& params,
                   const NovogradOptions& opts)
    : opts_(opts) {
  for (const auto& p : params) {
    if (!p.trainable) continue;
    if (!p.tensor.requires_grad()) {
      throw std::invalid_argument("novograd: trainable parameter " + p.name +
                                  " has no gradient buffer");
    }
    params_.push_back(p);
    Slot s;
    s.name = p.name;
    s.m.assign(static_cast<std::size_t>(p.tensor.numel()), 0.0);
    slots_.push_back(std::move(s));
  }
}

void Novograd::step(double lr) {
  if (lr < 0.0) throw std::invalid_argument("novograd: negative lr");
  for (const auto& p : params_) {
    const double* g = p.tensor.grad();
    for (std::int64_t i = 0; i < p.tensor.numel(); ++i) {
      if (!std::isfinite(g[i])) {
        throw std::runtime_error("novograd: non-finite gradient in " +
                                 p.name + "; step rejected");
      }
    }
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor t = params_[k].tensor;
    Slot& s = slots_[k];
    const double* g = t.grad();
    double* w = t.data();
    const std::int64_t n = t.numel();

    double sq = 0.0;
    for (std::int64_t i = 0; i < n; ++i) sq += g[i] * g[i];
    s.v = s.initialized ? opts_.beta2 * s.v + (1.0 - opts_.beta2) * sq : sq;
    s.initialized = true;

    const double denom = std::sqrt(s.v) + opts_.eps;
    for (std::int64_t i = 0; i < n; ++i) {
      s.m[i] = opts_.beta1 * s.m[i] +
               (g[i] / denom + opts_.weight_decay * w[i]);
      w[i] -= lr * s.m[i];
    }
  }
}

void Novograd::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

double lr_at(const ScheduleConfig& s, int step) {
  if (s.warmup_steps <= 0 || s.total_steps <= s.warmup_steps) {
    throw std::invalid_argument(
        "lr_at: need 0 < warmup_steps < total_steps, got warmup=" +
        std::to_string(s.warmup_steps) + " total=" +
        std::to_string(s.total_steps));
  }
  if (step < 0 || step > s.total_steps) {
    throw std::invalid_argument("lr_at: step " + std::to_string(step) +
                                " outside [0," +
                                std::to_string(s.total_steps) + "]");
  }
  if (step < s.warmup_steps) {
    return s.lr_max * static_cast<double>(step) /
           static_cast<double>(s.warmup_steps);
  }
  // Exact anchors: the junction peaks at lr_max and the end lands on
  // lr_min, with no one-ulp drift from the cosine arithmetic.
  if (step == s.warmup_steps) return s.lr_max;
  if (step == s.total_steps) return s.lr_min;
  const double u = static_cast<double>(step - s.warmup_steps) /
                   static_cast<double>(s.total_steps - s.warmup_steps);
  const double pi = std::acos(-1.0);
  return s.lr_min + 0.5 * (s.lr_max - s.lr_min) * (1.0 + std::cos(pi * u));
}

}  // namespace mq
