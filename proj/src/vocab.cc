// src/vocab.cc

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

#include "mq/vocab.h"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mq/util.h"

namespace mq {

std::vector<std::string> utf8_split(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    if (lead < 0x80) len = 1;
    else if ((lead & 0xE0) == 0xC0) len = 2;
    else if ((lead & 0xF0) == 0xE0) len = 3;
    else if ((lead & 0xF8) == 0xF0) len = 4;
    else {
      throw std::runtime_error("utf8_split: bad lead byte at offset " +
                               std::to_string(i));
    }
    if (i + len > text.size()) {
      throw std::runtime_error("utf8_split: truncated sequence at offset " +
                               std::to_string(i));
    }
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        throw std::runtime_error(
            "utf8_split: bad continuation byte at offset " +
            std::to_string(i + k));
      }
    }
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

Vocabulary Vocabulary::from_corpus(
    const std::vector<std::string>& transcripts) {
  std::set<std::string> uniq;
  for (const auto& line : transcripts) {
    for (auto& ch : utf8_split(line)) uniq.insert(std::move(ch));
  }
  return from_chars(std::vector<std::string>(uniq.begin(), uniq.end()));
}

Vocabulary Vocabulary::from_chars(const std::vector<std::string>& chars) {
  Vocabulary v;
  for (const auto& ch : chars) {
    if (ch.empty() || utf8_split(ch).size() != 1) {
      throw std::invalid_argument("vocabulary: entry '" + ch +
                                  "' is not a single character");
    }
    if (v.ids_.count(ch)) {
      throw std::invalid_argument("vocabulary: duplicate character '" + ch +
                                  "'");
    }
    v.ids_.emplace(ch, static_cast<int>(v.chars_.size()));
    v.chars_.push_back(ch);
  }
  return v;
}

bool Vocabulary::contains(const std::string& ch) const {
  return ids_.count(ch) != 0;
}

int Vocabulary::id_of(const std::string& ch) const {
  const auto it = ids_.find(ch);
  if (it == ids_.end()) {
    throw std::invalid_argument("vocabulary: unknown character '" + ch + "'");
  }
  return it->second;
}

const std::string& Vocabulary::char_of(int id) const {
  if (id < 0 || id >= size()) {
    throw std::invalid_argument("vocabulary: id " + std::to_string(id) +
                                " out of range [0," + std::to_string(size()) +
                                ")");
  }
  return chars_[id];
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
  std::vector<int> out;
  for (const auto& ch : utf8_split(text)) out.push_back(id_of(ch));
  return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) out += char_of(id);
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::string body;
  for (const auto& ch : chars_) {
    body += ch;
    body += '\n';
  }
  write_text_file(path, body);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::string> chars;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    chars.push_back(line);
  }
  return from_chars(chars);
}

}  // namespace mq
