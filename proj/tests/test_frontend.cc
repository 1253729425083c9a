// tests/test_frontend.cc

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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "mq/mfcc.h"
#include "mq/specaugment.h"
#include "mq/wav.h"

using namespace mq;

namespace {

AudioSample tone(double freq, double seconds, double offset_samples = 0.0) {
  AudioSample a;
  const int n = static_cast<int>(seconds * kSampleRate);
  for (int t = 0; t < n; ++t) {
    a.samples.push_back(
        0.5 * std::sin(2.0 * std::acos(-1.0) * freq * (t + offset_samples) /
                       kSampleRate));
  }
  return a;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE("frontend") {

TEST_CASE("wav round-trip preserves the integer payload") {
  AudioSample a = tone(440.0, 0.05);
  a.samples.push_back(0.999);
  a.samples.push_back(-1.0);
  a.utt_id = "roundtrip";
  const std::string path = temp_path("mq_wav_rt.wav");
  save_wav(path, a);
  AudioSample b = load_wav(path);
  REQUIRE(b.samples.size() == a.samples.size());
  CHECK(b.sample_rate == kSampleRate);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    // Writing quantizes to int16; a second round-trip must be exact.
    const double q = b.samples[i];
    CHECK(std::abs(q - a.samples[i]) <= 1.0 / 32768.0 + 1e-12);
  }
  save_wav(path, b);
  AudioSample c = load_wav(path);
  CHECK(c.samples == b.samples);
  std::remove(path.c_str());
}

TEST_CASE("wav loader rejects malformed headers") {
  const std::string path = temp_path("mq_wav_bad.wav");
  std::ofstream(path, std::ios::binary) << "RIFFxxxxNOPE";
  CHECK_THROWS(load_wav(path));
  std::remove(path.c_str());
  CHECK_THROWS(load_wav(temp_path("mq_wav_missing.wav")));
}

TEST_CASE("frame count arithmetic") {
  // 20 ms window = 320 samples, 10 ms shift = 160 samples.
  CHECK(num_frames_for(319) == 0);
  CHECK(num_frames_for(320) == 1);
  CHECK(num_frames_for(479) == 1);
  CHECK(num_frames_for(480) == 2);
  CHECK(num_frames_for(16000) == 99);
}

TEST_CASE("fft matches a naive dft") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 64;
  std::vector<double> re(n), im(n), re0, im0;
  for (int i = 0; i < n; ++i) {
    re[i] = u(rng);
    im[i] = u(rng);
  }
  re0 = re;
  im0 = im;
  fft_radix2(re, im);
  const double pi = std::acos(-1.0);
  for (int k = 0; k < n; ++k) {
    double sr = 0.0, si = 0.0;
    for (int t = 0; t < n; ++t) {
      const double ang = -2.0 * pi * k * t / n;
      sr += re0[t] * std::cos(ang) - im0[t] * std::sin(ang);
      si += re0[t] * std::sin(ang) + im0[t] * std::cos(ang);
    }
    CHECK(re[k] == doctest::Approx(sr).epsilon(1e-9));
    CHECK(im[k] == doctest::Approx(si).epsilon(1e-9));
  }
  std::vector<double> bad(12, 0.0), badi(12, 0.0);
  CHECK_THROWS(fft_radix2(bad, badi));
}

TEST_CASE("mel scale helpers invert and band edges are monotone") {
  for (double hz : {100.0, 440.0, 4000.0, 7999.0}) {
    CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz).epsilon(1e-9));
  }
  const std::vector<double> edges = mel_band_edges(64, 0.0, 8000.0);
  REQUIRE(edges.size() == 66);
  CHECK(edges.front() == doctest::Approx(0.0));
  CHECK(edges.back() == doctest::Approx(8000.0));
  for (std::size_t i = 1; i < edges.size(); ++i) CHECK(edges[i] > edges[i - 1]);
}

TEST_CASE("mfcc shape, finiteness, and normalization") {
  AudioSample a = tone(523.0, 0.5);
  FeatureMatrix f = mfcc(a);
  CHECK(f.num_frames == num_frames_for(a.samples.size()));
  CHECK(f.num_coeffs == 64);
  for (int c = 0; c < f.num_coeffs; ++c) {
    double mean = 0.0;
    for (int t = 0; t < f.num_frames; ++t) {
      CHECK(std::isfinite(f.at(t, c)));
      mean += f.at(t, c);
    }
    mean /= f.num_frames;
    CHECK(std::abs(mean) < 1e-9);  // per-utterance normalization
  }
  CHECK_THROWS(mfcc(tone(523.0, 0.005)));  // shorter than one window
}

TEST_CASE("mfcc distinguishes tones and is deterministic") {
  MfccOptions opts;
  FeatureMatrix lo = mfcc(tone(300.0, 0.2), opts);
  FeatureMatrix hi = mfcc(tone(2400.0, 0.2), opts);
  FeatureMatrix lo2 = mfcc(tone(300.0, 0.2), opts);
  CHECK(lo.values == lo2.values);
  double diff = 0.0;
  for (std::size_t i = 0; i < lo.values.size(); ++i) {
    diff += std::abs(lo.values[i] - hi.values[i]);
  }
  CHECK(diff / lo.values.size() > 0.05);
}

TEST_CASE("mfcc shifts with its input when unnormalized") {
  MfccOptions opts;
  opts.normalize = false;
  // b prepends exactly one frame shift (160 samples) of the same tone, so
  // frame t+1 of b sees the identical sample window as frame t of a.
  AudioSample a = tone(700.0, 0.3);
  AudioSample b = tone(700.0, 0.31, -160.0);
  FeatureMatrix fa = mfcc(a, opts);
  FeatureMatrix fb = mfcc(b, opts);
  REQUIRE(fb.num_frames >= fa.num_frames);
  for (int t = 5; t < fa.num_frames - 5; ++t) {
    for (int c = 0; c < fa.num_coeffs; ++c) {
      CHECK(fb.at(t + 1, c) == doctest::Approx(fa.at(t, c)).epsilon(1e-6));
    }
  }
}

TEST_CASE("spec_augment identity policy and zero widths") {
  FeatureMatrix f = mfcc(tone(400.0, 0.2));
  SpecAugmentPolicy off;
  off.max_freq_width = 0;
  off.max_time_width = 0;
  CHECK(off.is_identity());
  CHECK(spec_augment(f, off).values == f.values);
}

TEST_CASE("spec_augment masks bounded regions deterministically") {
  FeatureMatrix f = mfcc(tone(400.0, 0.3));
  for (auto& v : f.values) v += 10.0;  // keep natural zeros out of the count

  SpecAugmentPolicy policy;
  policy.num_freq_masks = 1;
  policy.max_freq_width = 8;
  policy.num_time_masks = 1;
  policy.max_time_width = 10;
  policy.rng_seed = 99;

  FeatureMatrix g = spec_augment(f, policy);
  FeatureMatrix g2 = spec_augment(f, policy);
  CHECK(g.values == g2.values);

  int zero_cols = 0;
  for (int c = 0; c < g.num_coeffs; ++c) {
    bool all = true;
    for (int t = 0; t < g.num_frames && all; ++t) all = g.at(t, c) == 0.0;
    zero_cols += all;
  }
  int zero_rows = 0;
  for (int t = 0; t < g.num_frames; ++t) {
    bool all = true;
    for (int c = 0; c < g.num_coeffs && all; ++c) all = g.at(t, c) == 0.0;
    zero_rows += all;
  }
  CHECK(zero_cols <= policy.max_freq_width);
  CHECK(zero_rows <= policy.max_time_width);

  // Unmasked cells are untouched.
  int changed = 0;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    if (g.values[i] != f.values[i]) {
      ++changed;
      CHECK(g.values[i] == 0.0);
    }
  }
  CHECK(changed > 0);

  SpecAugmentPolicy other = policy;
  other.rng_seed = 100;
  CHECK(spec_augment(f, other).values != g.values);

  SpecAugmentPolicy too_wide = policy;
  too_wide.max_time_width = f.num_frames + 1;
  CHECK_THROWS(spec_augment(f, too_wide));
}

TEST_CASE("feature file round-trip") {
  FeatureMatrix f = mfcc(tone(640.0, 0.2));
  f.utt_id = "probe";
  const std::string path = temp_path("mq_feat_rt.mqft");
  save_features(path, f);
  FeatureMatrix g = load_features(path);
  CHECK(g.num_frames == f.num_frames);
  CHECK(g.num_coeffs == f.num_coeffs);
  CHECK(g.values == f.values);
  std::remove(path.c_str());
  CHECK_THROWS(load_features(path));
}

}  // TEST_SUITE
