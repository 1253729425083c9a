// include/mq/specaugment.h

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

#ifndef MQ_SPECAUGMENT_H_
#define MQ_SPECAUGMENT_H_

#include <cstdint>

#include "mq/mfcc.h"

namespace mq {

// Masking policy; width-0 masks are the identity. Defaults are mild,
// suitable for small corpora.
struct SpecAugmentPolicy {
  int num_freq_masks = 1;
  int max_freq_width = 8;
  int num_time_masks = 1;
  int max_time_width = 10;
  std::uint64_t rng_seed = 0;

  bool is_identity() const {
    return (num_freq_masks <= 0 || max_freq_width <= 0) &&
           (num_time_masks <= 0 || max_time_width <= 0);
  }
};

// Zeroes randomly placed frequency bands and time spans. Pure function:
// the input is copied, and the same seed always selects the same masks.
FeatureMatrix spec_augment(const FeatureMatrix& features,
                           const SpecAugmentPolicy& policy);

}  // namespace mq

#endif  // MQ_SPECAUGMENT_H_
