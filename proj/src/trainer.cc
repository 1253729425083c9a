// src/trainer.cc

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

#include "mq/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mq/checkpoint.h"
#include "mq/ctc.h"
#include "mq/util.h"
#include "mq/wav.h"
#include "json.hpp"

namespace mq {

namespace {

// Distinct salt so augmentation masks never correlate with batch sampling.
constexpr std::uint64_t kAugmentSalt = 0x9e3779b97f4a7c15ULL;

Tensor features_to_tensor(const FeatureMatrix& f) {
  return Tensor::from_data({f.num_frames, f.num_coeffs}, f.values);
}

void validate_corpus(const Model& model,
                     const std::vector<TrainExample>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
  const int input_dim = model.config().input_dim;
  const int vocab = model.config().vocab_size;
  for (const TrainExample& ex : corpus) {
    if (ex.features.num_coeffs != input_dim) {
      throw std::invalid_argument("train: utterance '" + ex.utt_id + "' has " +
                                  std::to_string(ex.features.num_coeffs) +
                                  " coefficients, model expects " +
                                  std::to_string(input_dim));
    }
    for (int l : ex.labels) {
      if (l < 0 || l >= vocab) {
        throw std::invalid_argument("train: utterance '" + ex.utt_id +
                                    "' has label " + std::to_string(l) +
                                    " outside vocabulary of size " +
                                    std::to_string(vocab));
      }
    }
  }
}

}  // namespace

TrainResult train(Model& model, const std::vector<TrainExample>& corpus,
                  const TrainOptions& opts) {
  validate_corpus(model, corpus);
  if (opts.steps < 1) throw std::invalid_argument("train: steps must be >= 1");
  if (opts.batch_size < 1) {
    throw std::invalid_argument("train: batch_size must be >= 1");
  }

  ScheduleConfig sched;
  sched.warmup_steps = opts.warmup_steps;
  sched.total_steps = opts.steps;
  sched.lr_max = opts.lr;
  sched.lr_min = opts.lr_min;
  lr_at(sched, 0);  // surfaces schedule misconfiguration before any work

  NovogradOptions nopts;
  nopts.beta1 = opts.beta1;
  nopts.beta2 = opts.beta2;
  nopts.eps = opts.eps;
  nopts.weight_decay = opts.weight_decay;
  Novograd optimizer(model.parameters(), nopts);

  std::uint64_t start_step = 0;
  if (!opts.resume_from.empty()) {
    start_step = load_checkpoint(opts.resume_from, model, &optimizer);
    if (start_step >= static_cast<std::uint64_t>(opts.steps)) {
      throw std::invalid_argument(
          "train: checkpoint step " + std::to_string(start_step) +
          " is not before the requested total of " +
          std::to_string(opts.steps));
    }
  }

  std::ofstream metrics;
  if (!opts.metrics_path.empty()) {
    metrics.open(opts.metrics_path, start_step > 0 ? std::ios::app
                                                   : std::ios::trunc);
    if (!metrics) {
      throw std::runtime_error("train: cannot open metrics file " +
                               opts.metrics_path);
    }
  }

  const int blank = model.config().vocab_size;
  const std::size_t n = corpus.size();
  TrainResult result;
  result.final_step = start_step;

  for (int step = static_cast<int>(start_step) + 1; step <= opts.steps;
       ++step) {
    const double lr = lr_at(sched, step);

    // Batch membership is a pure function of (seed, step, lane), so resumed
    // runs replay the identical sample sequence.
    std::vector<const TrainExample*> batch;
    std::vector<FeatureMatrix> feats;
    for (int lane = 0; lane < opts.batch_size; ++lane) {
      const std::uint64_t pick =
          mix_seed(opts.seed, static_cast<std::uint64_t>(step),
                   static_cast<std::uint64_t>(lane));
      const TrainExample& ex = corpus[pick % n];
      if (ctc_min_frames(ex.labels) > ex.features.num_frames) {
        ++result.skipped_utterances;
        if (result.skipped_utterances <= 10) {
          std::fprintf(stderr,
                       "warning: step %d: skipping '%s' (%d frames, label "
                       "sequence needs %d)\n",
                       step, ex.utt_id.c_str(), ex.features.num_frames,
                       ctc_min_frames(ex.labels));
        }
        continue;
      }
      batch.push_back(&ex);
      if (opts.augment_on) {
        SpecAugmentPolicy policy;
        policy.max_freq_width = opts.augment_freq_width;
        policy.max_time_width = opts.augment_time_width;
        policy.rng_seed =
            mix_seed(opts.seed ^ kAugmentSalt, static_cast<std::uint64_t>(step),
                     static_cast<std::uint64_t>(lane));
        feats.push_back(spec_augment(ex.features, policy));
      } else {
        feats.push_back(ex.features);
      }
    }
    if (batch.empty()) {
      std::fprintf(stderr, "warning: step %d: no feasible utterances, skipped\n",
                   step);
      result.final_step = static_cast<std::uint64_t>(step);
      continue;
    }

    optimizer.zero_grad();
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Tape tape;
      TapeScope scope(tape);
      Tensor x = features_to_tensor(feats[i]);
      Tensor log_probs = model.forward(x, /*training=*/true);
      Tensor loss = ctc_loss_op(log_probs, batch[i]->labels, blank);
      loss_sum += loss.value();
      // Scaling the root (not the seed) keeps each utterance's contribution
      // at 1/B so gradients match a monolithic batch objective.
      Tensor scaled = mul(loss, Tensor::scalar(inv_batch));
      tape.backward(scaled);
    }
    const double mean_loss = loss_sum * inv_batch;

    optimizer.step(lr);

    result.final_step = static_cast<std::uint64_t>(step);
    result.final_loss = mean_loss;
    result.step_losses.push_back(mean_loss);
    if (metrics.is_open()) {
      metrics << "{\"step\":" << step << ",\"lr\":" << format_double(lr)
              << ",\"loss\":" << format_double(mean_loss) << "}\n";
      metrics.flush();
    }
    if (!opts.checkpoint_path.empty() && opts.checkpoint_every > 0 &&
        step % opts.checkpoint_every == 0 && step != opts.steps) {
      // Step-tagged snapshots; the bare path is reserved for the final
      // state so interrupted runs can resume from any kept step.
      save_checkpoint(opts.checkpoint_path + ".step" + std::to_string(step),
                      model, static_cast<std::uint64_t>(step), &optimizer);
    }
  }

  if (!opts.checkpoint_path.empty()) {
    save_checkpoint(opts.checkpoint_path, model,
                    static_cast<std::uint64_t>(opts.steps), &optimizer);
  }
  return result;
}

EvalReport evaluate(Model& model, const std::vector<FeatureMatrix>& features,
                    const std::map<std::string, std::string>& transcripts,
                    const Vocabulary& vocab, const NGramLM* lm,
                    const DecodeOptions& opts) {
  EvalReport report;
  std::map<std::string, const FeatureMatrix*> by_id;
  for (const FeatureMatrix& f : features) {
    if (f.utt_id.empty()) {
      throw std::invalid_argument("evaluate: feature matrix without utt_id");
    }
    by_id[f.utt_id] = &f;
  }
  for (const auto& [id, f] : by_id) {
    if (transcripts.find(id) == transcripts.end()) {
      report.missing.push_back(id + " (no transcript)");
    }
  }
  for (const auto& [id, text] : transcripts) {
    if (by_id.find(id) == by_id.end()) {
      report.missing.push_back(id + " (no features)");
    }
  }

  const int blank = model.config().vocab_size;
  double greedy_dist = 0.0, beam_dist = 0.0, ref_len = 0.0;
  for (const auto& [id, text] : transcripts) {
    auto it = by_id.find(id);
    if (it == by_id.end()) continue;
    Tensor x = features_to_tensor(*it->second);
    Tensor log_probs = model.forward(x, /*training=*/false);
    LogProbMatrix lp = log_prob_matrix_from_tensor(log_probs, id);

    EvalUtterance utt;
    utt.utt_id = id;
    utt.ref = text;
    utt.greedy_hyp = vocab.decode(greedy_decode(lp, blank));
    utt.beam_hyp = vocab.decode(beam_search(lp, lm, opts));
    utt.greedy_cer = cer(utt.ref, utt.greedy_hyp);
    utt.beam_cer = cer(utt.ref, utt.beam_hyp);
    report.utterances.push_back(utt);

    const double len = static_cast<double>(utf8_split(text).size());
    greedy_dist += utt.greedy_cer * len;
    beam_dist += utt.beam_cer * len;
    ref_len += len;
  }
  if (report.utterances.empty()) {
    throw std::invalid_argument(
        "evaluate: no utterance has both features and a transcript");
  }
  report.corpus_greedy_cer = greedy_dist / ref_len;
  report.corpus_beam_cer = beam_dist / ref_len;
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["corpus_greedy_cer"] = corpus_greedy_cer;
  j["corpus_beam_cer"] = corpus_beam_cer;
  j["missing"] = missing;
  j["utterances"] = nlohmann::json::array();
  for (const EvalUtterance& u : utterances) {
    j["utterances"].push_back({{"utt_id", u.utt_id},
                               {"ref", u.ref},
                               {"greedy_hyp", u.greedy_hyp},
                               {"beam_hyp", u.beam_hyp},
                               {"greedy_cer", u.greedy_cer},
                               {"beam_cer", u.beam_cer}});
  }
  return j.dump(2);
}

std::vector<std::string> dump_weights(Model& model,
                                      const FeatureMatrix& features,
                                      const std::string& out_dir) {
  const ModelConfig& cfg = model.config();
  if (!cfg.attention_on && !cfg.fusion_on) {
    throw std::invalid_argument(
        "dump-weights: model has neither channel attention nor fusion gates");
  }
  std::filesystem::create_directories(out_dir);

  ForwardTrace trace;
  Tensor x = features_to_tensor(features);
  model.forward(x, /*training=*/false, &trace);

  std::vector<std::string> written;
  if (cfg.attention_on) {
    // Gates are traced in network order; the probe target is the last conv
    // module of the last B row, i.e. the final S entries (C rows carry no
    // gates).
    const RowConfig* last_b = nullptr;
    for (const RowConfig& r : cfg.rows) {
      if (r.name[0] == 'B') last_b = &r;
    }
    const std::size_t streams = last_b->stride_set.size();
    if (trace.attention_gates.size() < streams) {
      throw std::runtime_error("dump-weights: trace has too few gates");
    }
    for (std::size_t s = 0; s < streams; ++s) {
      const Tensor& gate =
          trace.attention_gates[trace.attention_gates.size() - streams + s];
      std::ostringstream csv;
      csv << "channel,weight\n";
      for (int c = 0; c < gate.dim(0); ++c) {
        csv << c << "," << format_double(gate(c)) << "\n";
      }
      std::string path = out_dir + "/attention_" + last_b->name + "_stream" +
                         std::to_string(last_b->stride_set[s]) + ".csv";
      write_text_file(path, csv.str());
      written.push_back(path);
    }
  }
  if (cfg.fusion_on) {
    std::ostringstream csv;
    csv << "block,channel,weight\n";
    int offset = 0;
    for (const RowConfig& r : cfg.rows) {
      if (r.name[0] != 'B') continue;
      for (int c = 0; c < r.channels; ++c) {
        csv << r.name << "," << c << ","
            << format_double(trace.fusion_gate(offset + c)) << "\n";
      }
      offset += r.channels;
    }
    std::string path = out_dir + "/fusion_weights.csv";
    write_text_file(path, csv.str());
    written.push_back(path);
  }
  return written;
}

std::string make_toy_corpus(const std::string& dir, int num_utterances,
                            std::uint64_t seed) {
  if (num_utterances < 1) {
    throw std::invalid_argument("make_toy_corpus: need at least 1 utterance");
  }
  std::filesystem::create_directories(dir);

  // Each character is a pure tone; frequencies are spread far apart so the
  // mel footprint of every character is distinct. Every utterance is a
  // permutation of the whole alphabet riding on a low broadband noise
  // floor: batch-norm inference relies on running statistics, so the corpus
  // keeps per-utterance spectra statistically identical (the same symbol
  // histogram and duration everywhere, differing only in order).
  const std::string chars = "abcde";
  const double freqs[] = {320.0, 540.0, 910.0, 1530.0, 2580.0};
  const int tone_samples = kSampleRate / 5;  // 200 ms per character
  const int gap_samples = kSampleRate / 20;  // 50 ms between tones
  const double noise_amp = 0.05;             // tones sit well above the bed

  std::map<std::string, std::string> transcripts;
  for (int u = 0; u < num_utterances; ++u) {
    std::uint64_t state = mix_seed(seed, static_cast<std::uint64_t>(u), 0);
    auto next = [&state] { return state = splitmix64(state); };
    auto noise = [&] {
      // 52 mantissa bits mapped onto [-1, 1); no library distribution, so
      // the byte stream is identical on every platform.
      return noise_amp *
             ((next() >> 11) * (1.0 / 4503599627370496.0) - 1.0);
    };

    std::string text = chars;
    for (int i = static_cast<int>(text.size()) - 1; i > 0; --i) {
      std::swap(text[static_cast<std::size_t>(i)],
                text[next() % static_cast<std::uint64_t>(i + 1)]);
    }

    AudioSample audio;
    for (char ch : text) {
      const int ci = static_cast<int>(chars.find(ch));
      for (int t = 0; t < tone_samples; ++t) {
        const double phase =
            2.0 * std::acos(-1.0) * freqs[ci] * t / kSampleRate;
        // Hann envelope avoids clicks at tone boundaries.
        const double env =
            0.5 * (1.0 - std::cos(2.0 * std::acos(-1.0) * t / tone_samples));
        audio.samples.push_back(0.4 * env * std::sin(phase) + noise());
      }
      for (int t = 0; t < gap_samples; ++t) audio.samples.push_back(noise());
    }
    char name[32];
    std::snprintf(name, sizeof(name), "toy%04d", u);
    audio.utt_id = name;
    save_wav(dir + "/" + name + ".wav", audio);
    transcripts[name] = text;
  }
  const std::string path = dir + "/transcripts.tsv";
  save_transcripts(path, transcripts);
  return path;
}

std::map<std::string, std::string> load_transcripts(const std::string& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected utt_id<TAB>text");
    }
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

void save_transcripts(const std::string& path,
                      const std::map<std::string, std::string>& transcripts) {
  std::ostringstream out;
  for (const auto& [id, text] : transcripts) out << id << "\t" << text << "\n";
  write_text_file(path, out.str());
}

}  // namespace mq
