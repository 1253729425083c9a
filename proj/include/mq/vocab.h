// include/mq/vocab.h

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

#ifndef MQ_VOCAB_H_
#define MQ_VOCAB_H_

#include <string>
#include <unordered_map>
#include <vector>

namespace mq {

// Splits UTF-8 text into codepoint strings. Throws std::runtime_error with
// the byte offset on malformed input.
std::vector<std::string> utf8_split(const std::string& text);

// Ordered character inventory. Ids cover [0, V); the CTC blank is id V by
// convention and is not a character.
class Vocabulary {
 public:
  Vocabulary() = default;

  // Unique characters across all transcripts, sorted bytewise.
  static Vocabulary from_corpus(const std::vector<std::string>& transcripts);
  static Vocabulary from_chars(const std::vector<std::string>& chars);

  int size() const { return static_cast<int>(chars_.size()); }
  int blank_id() const { return size(); }
  bool contains(const std::string& ch) const;
  int id_of(const std::string& ch) const;        // throws on unknown chars
  const std::string& char_of(int id) const;      // throws on bad id

  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  // One character per line, line order defining the id order.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> chars_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace mq

#endif  // MQ_VOCAB_H_
