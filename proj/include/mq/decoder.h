// include/mq/decoder.h

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

#ifndef MQ_DECODER_H_
#define MQ_DECODER_H_

#include <limits>
#include <string>
#include <vector>

#include "mq/ctc.h"
#include "mq/ngram_lm.h"

namespace mq {

struct DecodeOptions {
  double alpha = 1.8;  // language-model weight
  double beta = 3.5;   // per-character length bonus
  int beam = 200;
  // The bonus counts characters: the target language has no whitespace word
  // segmentation, so a word count degenerates to sequence length.
};

inline constexpr int kInfiniteBeam = std::numeric_limits<int>::max();

// Prefix beam search over the frame posteriors, tracking blank/non-blank
// endings per prefix, with shallow LM fusion applied at each character
// extension. Hypotheses are ranked by
//   Q = log p(prefix|x) + alpha * log p_lm(prefix) + beta * |prefix|
// and ties break lexicographically. `lm` may be null (no fusion term).
// Requires normalized rows and beam >= 1.
std::vector<int> beam_search(const LogProbMatrix& log_probs,
                             const NGramLM* lm, const DecodeOptions& opts);

// Reference decoder: scores Q for every label sequence of length <= T by
// exact lattice marginalization and returns the maximizer (lexicographic
// tie-break). Throws when the candidate count exceeds 1e6.
std::vector<int> exhaustive_search(const LogProbMatrix& log_probs,
                                   const NGramLM* lm,
                                   const DecodeOptions& opts);

// Character error rate: unit-cost Levenshtein distance over UTF-8
// codepoints, divided by the reference length. Rejects empty references.
double cer(const std::string& ref, const std::string& hyp);

}  // namespace mq

#endif  // MQ_DECODER_H_
