// include/mq/mfcc.h

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

#ifndef MQ_MFCC_H_
#define MQ_MFCC_H_

#include <string>
#include <vector>

#include "mq/wav.h"

namespace mq {

// 20 ms / 10 ms framing at 16 kHz.
inline constexpr int kFrameLength = 320;
inline constexpr int kFrameShift = 160;
inline constexpr int kFftSize = 512;

// T x F acoustic features, row-major, one row per frame.
struct FeatureMatrix {
  int num_frames = 0;
  int num_coeffs = 0;
  std::vector<double> values;
  std::string utt_id;
  int frame_shift_ms = 10;
  int frame_length_ms = 20;

  double at(int t, int f) const {
    return values[static_cast<std::size_t>(t) * num_coeffs + f];
  }
  double& at(int t, int f) {
    return values[static_cast<std::size_t>(t) * num_coeffs + f];
  }
};

struct MfccOptions {
  int num_coeffs = 64;
  int num_mel = 64;
  double preemphasis = 0.97;
  double low_freq = 0.0;
  double high_freq = 8000.0;
  // Per-utterance mean/variance normalization per coefficient. Zero-variance
  // coefficients keep unit scale.
  bool normalize = true;
};

// Pre-emphasis -> Hann window -> 512-point magnitude FFT -> triangular mel
// filterbank -> log(. + 1e-10) -> orthonormal DCT-II truncated to num_coeffs,
// then optional per-utterance normalization. Audio must span at least one
// full analysis window.
FeatureMatrix mfcc(const AudioSample& audio, const MfccOptions& opts = {});

int num_frames_for(std::size_t num_samples);

// Mel scale helpers, exposed for tests that reason about filter placement.
double hz_to_mel(double hz);
double mel_to_hz(double mel);
// Band edges (num_mel + 2 points) between low_freq and high_freq.
std::vector<double> mel_band_edges(int num_mel, double low_freq,
                                   double high_freq);
// Raw per-frame mel filterbank energies (before log/DCT), for analysis.
std::vector<std::vector<double>> mel_energies(const AudioSample& audio,
                                              const MfccOptions& opts = {});

// Feature cache file: magic "MQFT", u32 T, u32 F, T*F little-endian float64
// row-major.
void save_features(const std::string& path, const FeatureMatrix& f);
FeatureMatrix load_features(const std::string& path);

// In-place radix-2 FFT on interleaved (re, im) pairs; n must be a power of
// two. Exposed for the DFT oracle test.
void fft_radix2(std::vector<double>& re, std::vector<double>& im);

}  // namespace mq

#endif  // MQ_MFCC_H_
