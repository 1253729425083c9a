// src/mfcc.cc

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

#include "mq/mfcc.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "mq/util.h"

namespace mq {

namespace {

constexpr double kLogFloor = 1e-10;

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

// filters[m][bin] triangular weights over the one-sided spectrum.
std::vector<std::vector<double>> mel_filterbank(int num_mel, double low,
                                                double high) {
  const int bins = kFftSize / 2 + 1;
  const double bin_hz = static_cast<double>(kSampleRate) / kFftSize;
  const std::vector<double> edges = mel_band_edges(num_mel, low, high);
  std::vector<std::vector<double>> filters(num_mel,
                                           std::vector<double>(bins, 0.0));
  for (int m = 0; m < num_mel; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int b = 0; b < bins; ++b) {
      const double f = b * bin_hz;
      if (f <= left || f >= right) continue;
      filters[m][b] = f <= center ? (f - left) / (center - left)
                                  : (right - f) / (right - center);
    }
  }
  return filters;
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> mel_band_edges(int num_mel, double low_freq,
                                   double high_freq) {
  std::vector<double> edges(num_mel + 2);
  const double lo = hz_to_mel(low_freq), hi = hz_to_mel(high_freq);
  for (int i = 0; i < num_mel + 2; ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * i / (num_mel + 1));
  }
  return edges;
}

int num_frames_for(std::size_t num_samples) {
  if (num_samples < kFrameLength) return 0;
  return static_cast<int>((num_samples - kFrameLength) / kFrameShift) + 1;
}

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  if (n == 0 || (n & (n - 1)) != 0 || im.size() != n) {
    throw std::invalid_argument("fft size must be a power of two");
  }
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::size_t a = i + k, b = i + k + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

std::vector<std::vector<double>> mel_energies(const AudioSample& audio,
                                              const MfccOptions& opts) {
  if (audio.sample_rate != kSampleRate) {
    throw std::invalid_argument("mfcc expects 16 kHz audio");
  }
  const int frames = num_frames_for(audio.samples.size());
  if (frames < 1) {
    throw std::invalid_argument(
        "audio shorter than one analysis window (need >= 320 samples, got " +
        std::to_string(audio.samples.size()) + ")");
  }

  // Global pre-emphasis; the first sample keeps its value so a hop-aligned
  // shift leaves interior frames untouched.
  std::vector<double> emph(audio.samples.size());
  emph[0] = audio.samples[0];
  for (std::size_t i = 1; i < emph.size(); ++i) {
    emph[i] = audio.samples[i] - opts.preemphasis * audio.samples[i - 1];
  }

  static const std::vector<double> window = hann_window(kFrameLength);
  const auto filters = mel_filterbank(opts.num_mel, opts.low_freq,
                                      opts.high_freq);
  const int bins = kFftSize / 2 + 1;

  std::vector<std::vector<double>> energies(
      frames, std::vector<double>(opts.num_mel, 0.0));
  std::vector<double> re(kFftSize), im(kFftSize), mag(bins);
  for (int t = 0; t < frames; ++t) {
    const double* src = emph.data() + static_cast<std::size_t>(t) * kFrameShift;
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    for (int i = 0; i < kFrameLength; ++i) re[i] = src[i] * window[i];
    fft_radix2(re, im);
    for (int b = 0; b < bins; ++b) mag[b] = std::hypot(re[b], im[b]);
    for (int m = 0; m < opts.num_mel; ++m) {
      double acc = 0.0;
      const auto& filt = filters[m];
      for (int b = 0; b < bins; ++b) acc += filt[b] * mag[b];
      energies[t][m] = acc;
    }
  }
  return energies;
}

FeatureMatrix mfcc(const AudioSample& audio, const MfccOptions& opts) {
  if (opts.num_coeffs > opts.num_mel) {
    throw std::invalid_argument("num_coeffs must not exceed num_mel");
  }
  if (opts.num_mel > kFftSize / 2 + 1) {
    throw std::invalid_argument("num_mel exceeds FFT bin count");
  }
  const auto energies = mel_energies(audio, opts);
  const int frames = static_cast<int>(energies.size());
  const int n_mel = opts.num_mel, n_out = opts.num_coeffs;

  // Orthonormal DCT-II basis.
  std::vector<double> dct(static_cast<std::size_t>(n_out) * n_mel);
  for (int k = 0; k < n_out; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n_mel);
    for (int n = 0; n < n_mel; ++n) {
      dct[static_cast<std::size_t>(k) * n_mel + n] =
          scale * std::cos(std::numbers::pi * (2 * n + 1) * k / (2.0 * n_mel));
    }
  }

  FeatureMatrix out;
  out.num_frames = frames;
  out.num_coeffs = n_out;
  out.utt_id = audio.utt_id;
  out.values.resize(static_cast<std::size_t>(frames) * n_out);
  std::vector<double> logmel(n_mel);
  for (int t = 0; t < frames; ++t) {
    for (int m = 0; m < n_mel; ++m) {
      logmel[m] = std::log(energies[t][m] + kLogFloor);
    }
    for (int k = 0; k < n_out; ++k) {
      double acc = 0.0;
      const double* row = dct.data() + static_cast<std::size_t>(k) * n_mel;
      for (int m = 0; m < n_mel; ++m) acc += row[m] * logmel[m];
      out.at(t, k) = acc;
    }
  }

  if (opts.normalize) {
    for (int k = 0; k < n_out; ++k) {
      double mean = 0.0;
      for (int t = 0; t < frames; ++t) mean += out.at(t, k);
      mean /= frames;
      double var = 0.0;
      for (int t = 0; t < frames; ++t) {
        const double d = out.at(t, k) - mean;
        var += d * d;
      }
      var /= frames;
      const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
      for (int t = 0; t < frames; ++t) {
        out.at(t, k) = (out.at(t, k) - mean) * scale;
      }
    }
  }
  return out;
}

void save_features(const std::string& path, const FeatureMatrix& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write("MQFT", 4);
  write_u32(os, static_cast<std::uint32_t>(f.num_frames));
  write_u32(os, static_cast<std::uint32_t>(f.num_coeffs));
  write_f64_array(os, f.values.data(), f.values.size());
  if (!os) throw std::runtime_error("write failed: " + path);
}

FeatureMatrix load_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "MQFT", 4) != 0) {
    throw std::runtime_error(path + ": not a MQFT feature file");
  }
  FeatureMatrix f;
  f.num_frames = static_cast<int>(read_u32(is));
  f.num_coeffs = static_cast<int>(read_u32(is));
  f.values.resize(static_cast<std::size_t>(f.num_frames) * f.num_coeffs);
  read_f64_array(is, f.values.data(), f.values.size());
  f.utt_id = std::filesystem::path(path).stem().string();
  return f;
}

}  // namespace mq
