// include/mq/optim.h

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

#ifndef MQ_OPTIM_H_
#define MQ_OPTIM_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mq/model.h"

namespace mq {

struct NovogradOptions {
  double beta1 = 0.95;
  double beta2 = 0.5;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// Layer-wise normalized momentum optimizer. One "layer" is one named
// parameter tensor: each keeps a scalar second moment of its gradient norm
//   v_t = beta2 * v_{t-1} + (1 - beta2) * ||g_t||^2   (v_1 = ||g_1||^2)
// and a first-moment buffer
//   m_t = beta1 * m_{t-1} + (g_t / (sqrt(v_t) + eps) + lambda * w)
// applied as w <- w - lr * m_t.
class Novograd {
 public:
  struct Slot {
    std::string name;
    double v = 0.0;
    std::vector<double> m;
    bool initialized = false;  // false until the first step seeds v
  };

  explicit Novograd(const std::vector<NamedTensor>& params,
                    const NovogradOptions& opts = {});

  // Applies one update from the gradients currently stored on the trainable
  // parameters. Rejects the whole step (state untouched) if any gradient
  // entry is non-finite.
  void step(double lr);

  void zero_grad();

  const NovogradOptions& options() const { return opts_; }
  const std::vector<Slot>& slots() const { return slots_; }
  std::vector<Slot>& slots() { return slots_; }

 private:
  std::vector<NamedTensor> params_;  // trainable entries only
  std::vector<Slot> slots_;          // parallel to params_
  NovogradOptions opts_;
};

struct ScheduleConfig {
  int warmup_steps = 8000;
  int total_steps = 0;
  double lr_max = 0.01;
  double lr_min = 0.0;
};

// Linear warmup into cosine annealing:
//   step < warmup:  lr_max * step / warmup
//   else:           lr_min + (lr_max - lr_min)/2 * (1 + cos(pi * u)),
//                   u = (step - warmup) / (total - warmup)
// Requires 0 < warmup < total and 0 <= step <= total.
double lr_at(const ScheduleConfig& s, int step);

}  // namespace mq

#endif  // MQ_OPTIM_H_
