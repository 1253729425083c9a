// include/mq/trainer.h

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

#ifndef MQ_TRAINER_H_
#define MQ_TRAINER_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mq/decoder.h"
#include "mq/mfcc.h"
#include "mq/model.h"
#include "mq/ngram_lm.h"
#include "mq/optim.h"
#include "mq/specaugment.h"
#include "mq/vocab.h"

namespace mq {

struct TrainExample {
  std::string utt_id;
  FeatureMatrix features;
  std::vector<int> labels;
};

struct TrainOptions {
  int steps = 2000;       // schedule total; training runs to this step
  int batch_size = 8;     // gradient accumulation width
  double lr = 0.01;
  double lr_min = 0.0;
  int warmup_steps = 8000;
  double weight_decay = 1e-4;
  double beta1 = 0.95;
  double beta2 = 0.5;
  double eps = 1e-8;
  std::uint64_t seed = 1;
  bool augment_on = true;
  int augment_freq_width = 8;   // max width per frequency mask
  int augment_time_width = 10;  // max width per time mask
  // From this step on, forward passes run with frozen batch-norm statistics
  // (inference mode), so the late phase optimizes exactly the function that
  // evaluation will run. Small corpora need this: with per-utterance batch
  // statistics the optimizer can otherwise learn solutions that no single
  // set of population statistics reproduces. 0 never freezes.
  int bn_freeze_step = 0;
  int checkpoint_every = 0;     // 0: only at the end
  std::string checkpoint_path;  // empty: no checkpoints written
  std::string metrics_path;     // empty: no metrics file
  std::string resume_from;      // checkpoint to continue from
};

struct TrainResult {
  std::uint64_t final_step = 0;
  double final_loss = 0.0;
  int skipped_utterances = 0;       // CTC-infeasible, warned and counted
  std::vector<double> step_losses;  // batch mean loss per executed step
};

// Deterministic training loop. Steps are numbered 1..steps; batch sampling
// and augmentation randomness are pure functions of (seed, step, lane), so a
// resumed run continues bitwise-identically to an uninterrupted one.
// Per step: sample batch -> SpecAugment -> forward -> CTC loss (batch mean)
// -> backward -> Novograd at lr_at(step). Metrics: one JSON line per step
// {"step":..,"lr":..,"loss":..}.
TrainResult train(Model& model, const std::vector<TrainExample>& corpus,
                  const TrainOptions& opts);

struct EvalUtterance {
  std::string utt_id;
  std::string ref;
  std::string greedy_hyp;
  std::string beam_hyp;
  double greedy_cer = 0.0;
  double beam_cer = 0.0;
};

struct EvalReport {
  std::vector<EvalUtterance> utterances;
  std::vector<std::string> missing;  // ids lacking features or transcript
  double corpus_greedy_cer = 0.0;    // edit-distance pooled over references
  double corpus_beam_cer = 0.0;
  std::string to_json() const;
};

// Greedy and beam+LM decoding over a test set. `features` and `transcripts`
// are matched by utterance id; unpaired ids are reported, not dropped
// silently. Rejects an empty intersection.
EvalReport evaluate(Model& model,
                    const std::vector<FeatureMatrix>& features,
                    const std::map<std::string, std::string>& transcripts,
                    const Vocabulary& vocab, const NGramLM* lm,
                    const DecodeOptions& opts);

// Gate probes on one utterance: one CSV per stream of the last B group's
// final conv module (channel,weight rows) named
// attention_<group>_stream<dilation>.csv, plus fusion_weights.csv
// (block,channel,weight) when fusion is enabled. Returns written paths.
std::vector<std::string> dump_weights(Model& model,
                                      const FeatureMatrix& features,
                                      const std::string& out_dir);

// Synthetic corpus: each character maps to a fixed sine tone, utterances
// are short random character strings. Writes <dir>/<utt>.wav files and
// <dir>/transcripts.tsv (utt_id<TAB>text). Returns the transcript path.
std::string make_toy_corpus(const std::string& dir, int num_utterances,
                            std::uint64_t seed);

// utt_id<TAB>text lines; blank lines ignored. Throws on malformed lines.
std::map<std::string, std::string> load_transcripts(const std::string& path);
void save_transcripts(const std::string& path,
                      const std::map<std::string, std::string>& transcripts);

}  // namespace mq

#endif  // MQ_TRAINER_H_
