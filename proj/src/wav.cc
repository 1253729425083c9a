// src/wav.cc

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

#include "mq/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace mq {

namespace {

constexpr double kScale = 32768.0;

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

[[noreturn]] void reject(const std::string& path, const std::string& field,
                         const std::string& detail) {
  throw std::runtime_error("load_wav(" + path + "): bad " + field + " (" +
                           detail + ")");
}

}  // namespace

AudioSample load_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_wav(" + path + "): cannot open file");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0) {
    reject(path, "riff_header", "missing RIFF tag");
  }
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    reject(path, "wave_header", "missing WAVE tag");
  }

  bool have_fmt = false;
  std::size_t data_off = 0, data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t len = le32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) reject(path, "chunk_size", "truncated chunk");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (len < 16) reject(path, "fmt_chunk", "chunk too short");
      const unsigned char* f = bytes.data() + body;
      const std::uint16_t audio_format = le16(f + 0);
      const std::uint16_t channels = le16(f + 2);
      const std::uint32_t sample_rate = le32(f + 4);
      const std::uint16_t bits = le16(f + 14);
      if (audio_format != 1) {
        reject(path, "audio_format",
               "got " + std::to_string(audio_format) + ", expected PCM (1)");
      }
      if (channels != 1) {
        reject(path, "channels",
               "got " + std::to_string(channels) + ", expected mono (1)");
      }
      if (sample_rate != kSampleRate) {
        reject(path, "sample_rate", "got " + std::to_string(sample_rate) +
                                        ", expected 16000");
      }
      if (bits != 16) {
        reject(path, "bits_per_sample",
               "got " + std::to_string(bits) + ", expected 16");
      }
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data_off = body;
      data_len = len;
    }
    pos = body + len + (len & 1);  // chunks are word-aligned
  }
  if (!have_fmt) reject(path, "fmt_chunk", "missing");
  if (data_off == 0) reject(path, "data_chunk", "missing");

  AudioSample out;
  out.utt_id = std::filesystem::path(path).stem().string();
  out.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const std::int16_t v = static_cast<std::int16_t>(
        le16(bytes.data() + data_off + 2 * i));
    out.samples[i] = static_cast<double>(v) / kScale;
  }
  return out;
}

void save_wav(const std::string& path, const AudioSample& audio) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_wav(" + path + "): cannot open file");

  const std::uint32_t n = static_cast<std::uint32_t>(audio.samples.size());
  const std::uint32_t data_bytes = n * 2;
  const std::uint32_t riff_len = 36 + data_bytes;
  const std::uint32_t rate = kSampleRate;
  const std::uint32_t byte_rate = rate * 2;

  auto put32 = [&os](std::uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
                 static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
    os.write(b, 4);
  };
  auto put16 = [&os](std::uint16_t v) {
    char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
    os.write(b, 2);
  };

  os.write("RIFF", 4);
  put32(riff_len);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put32(16);
  put16(1);   // PCM
  put16(1);   // mono
  put32(rate);
  put32(byte_rate);
  put16(2);   // block align
  put16(16);  // bits per sample
  os.write("data", 4);
  put32(data_bytes);
  for (double s : audio.samples) {
    const double scaled = s * kScale;
    const long long q = std::llround(scaled);
    const std::int16_t v = static_cast<std::int16_t>(
        std::clamp<long long>(q, -32768, 32767));
    put16(static_cast<std::uint16_t>(v));
  }
  if (!os) throw std::runtime_error("save_wav(" + path + "): write failed");
}

}  // namespace mq
