// include/mq/wav.h

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

#ifndef MQ_WAV_H_
#define MQ_WAV_H_

#include <string>
#include <vector>

namespace mq {

inline constexpr int kSampleRate = 16000;

// Mono 16 kHz audio; samples are the 16-bit PCM payload scaled by 1/32768,
// so every value lies in [-1, 1) and the original integers are recoverable.
struct AudioSample {
  std::vector<double> samples;
  std::string utt_id;
  int sample_rate = kSampleRate;
};

// Reads a RIFF/WAVE file that must be PCM, 16-bit, mono, 16 kHz. Any other
// header is rejected with the offending field named.
AudioSample load_wav(const std::string& path);

// Writes the canonical 16-bit mono 16 kHz encoding (samples clipped to the
// int16 range). load_wav(save_wav(a)) reproduces the integer payload exactly.
void save_wav(const std::string& path, const AudioSample& audio);

}  // namespace mq

#endif  // MQ_WAV_H_
