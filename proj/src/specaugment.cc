// src/specaugment.cc

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

#include "mq/specaugment.h"

#include <random>
#include <stdexcept>

namespace mq {

FeatureMatrix spec_augment(const FeatureMatrix& features,
                           const SpecAugmentPolicy& policy) {
  if (policy.max_freq_width > features.num_coeffs ||
      policy.max_time_width > features.num_frames) {
    throw std::invalid_argument("spec_augment mask widths exceed the matrix");
  }
  FeatureMatrix out = features;
  std::mt19937_64 rng(policy.rng_seed);

  auto draw = [&rng](int lo, int hi) {  // inclusive bounds
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };

  for (int i = 0; i < policy.num_freq_masks; ++i) {
    if (policy.max_freq_width <= 0) break;
    const int width = draw(0, policy.max_freq_width);
    if (width == 0) continue;
    const int start = draw(0, features.num_coeffs - width);
    for (int t = 0; t < out.num_frames; ++t) {
      for (int f = start; f < start + width; ++f) out.at(t, f) = 0.0;
    }
  }
  for (int i = 0; i < policy.num_time_masks; ++i) {
    if (policy.max_time_width <= 0) break;
    const int width = draw(0, policy.max_time_width);
    if (width == 0) continue;
    const int start = draw(0, features.num_frames - width);
    for (int t = start; t < start + width; ++t) {
      for (int f = 0; f < out.num_coeffs; ++f) out.at(t, f) = 0.0;
    }
  }
  return out;
}

}  // namespace mq
