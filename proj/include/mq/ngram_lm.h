// include/mq/ngram_lm.h

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

#ifndef MQ_NGRAM_LM_H_
#define MQ_NGRAM_LM_H_

#include <map>
#include <string>
#include <vector>

#include "mq/vocab.h"

namespace mq {

// Character n-gram model with interpolated absolute discounting.
//
// Event space: the vocabulary characters plus one end-of-sentence symbol;
// contexts are left-padded with a start symbol that is never predicted.
// Probabilities are exact by construction: for every context the event
// probabilities sum to 1, and no event has zero probability (the recursion
// bottoms out at a uniform distribution over the V+1 events).
class NGramLM {
 public:
  // Context-only start marker and predicted end marker in id space; start is
  // fixed, end depends on the vocabulary size.
  static constexpr int kStartId = -1;
  int end_id() const { return vocab_size_; }

  NGramLM() = default;

  // Counts all n-grams of orders 1..order over the padded transcripts and
  // compiles interpolated absolute-discounted probabilities. Rejects
  // out-of-vocabulary characters naming the offending line.
  static NGramLM train(const std::vector<std::string>& transcripts,
                       const Vocabulary& vocab, int order = 4,
                       double discount = 0.75);

  // Natural-log probability of `event` (char id or end_id()) given up to
  // order-1 trailing context ids (kStartId allowed). Never -infinity.
  double logprob(const std::vector<int>& context, int event) const;

  // Score used for decoding: sum of per-character terms with start padding.
  // The end-of-sentence term is not included, so a sequence never scores
  // above its own prefix; the empty sequence scores 0.
  double sequence_logprob(const std::vector<int>& seq) const;

  // Full sentence probability including the end term (normalization checks).
  double sentence_logprob(const std::vector<int>& seq) const;

  int order() const { return order_; }
  int vocab_size() const { return vocab_size_; }
  double discount() const { return discount_; }

  // ARPA-style text serialization (log10 probabilities and back-off
  // weights). Characters containing whitespace cannot be serialized.
  void save(const std::string& path, const Vocabulary& vocab) const;
  static NGramLM load(const std::string& path, const Vocabulary& vocab);

 private:
  // log10 of the interpolated probability per stored n-gram (context +
  // event), and log10 of the back-off weight per stored context.
  std::vector<std::map<std::vector<int>, double>> probs_;     // [n-1]
  std::vector<std::map<std::vector<int>, double>> backoffs_;  // [ctx len]
  int order_ = 0;
  int vocab_size_ = 0;
  double discount_ = 0.75;
};

}  // namespace mq

#endif  // MQ_NGRAM_LM_H_
