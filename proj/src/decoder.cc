// src/decoder.cc

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

#include "mq/decoder.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "mq/util.h"
#include "mq/vocab.h"

namespace mq {

namespace {

// Blank/non-blank ending mass and accumulated LM score of one prefix.
struct Cell {
  double pb = kLogZero;
  double pnb = kLogZero;
  double lm = 0.0;
};

double cell_score(const std::vector<int>& prefix, const Cell& c,
                  const DecodeOptions& opts, bool with_lm) {
  double q = log_add(c.pb, c.pnb);
  if (with_lm) q += opts.alpha * c.lm;
  return q + opts.beta * static_cast<double>(prefix.size());
}

void validate_rows(const LogProbMatrix& lp, const char* who) {
  for (int t = 0; t < lp.num_frames; ++t) {
    double total = kLogZero;
    for (int v = 0; v < lp.num_symbols; ++v) total = log_add(total, lp.at(t, v));
    if (std::abs(total) > 1e-6) {
      throw std::invalid_argument(std::string(who) + ": row " +
                                  std::to_string(t) +
                                  " is not log-normalized (log-sum = " +
                                  format_double(total) + ")");
    }
  }
}

}  // namespace

std::vector<int> beam_search(const LogProbMatrix& log_probs,
                             const NGramLM* lm, const DecodeOptions& opts) {
  if (opts.beam < 1) {
    throw std::invalid_argument("beam_search: beam must be >= 1, got " +
                                std::to_string(opts.beam));
  }
  if (log_probs.num_symbols < 2) {
    throw std::invalid_argument(
        "beam_search: need at least one character class plus blank");
  }
  validate_rows(log_probs, "beam_search");
  const int blank = log_probs.num_symbols - 1;
  const int num_chars = log_probs.num_symbols - 1;

  // map keys give deterministic lexicographic iteration, which is also the
  // tie-break order everywhere below.
  std::map<std::vector<int>, Cell> beam;
  beam[{}] = Cell{0.0, kLogZero, 0.0};

  for (int t = 0; t < log_probs.num_frames; ++t) {
    std::map<std::vector<int>, Cell> next;
    for (const auto& [prefix, cell] : beam) {
      const double p_total = log_add(cell.pb, cell.pnb);

      // Blank keeps the prefix and moves all mass to the blank ending.
      {
        Cell& ncell = next[prefix];
        ncell.pb = log_add(ncell.pb, log_probs.at(t, blank) + p_total);
        ncell.lm = cell.lm;
      }
      // Repeating the final character without a separating blank also keeps
      // the prefix.
      if (!prefix.empty()) {
        Cell& ncell = next[prefix];
        ncell.pnb = log_add(ncell.pnb,
                            log_probs.at(t, prefix.back()) + cell.pnb);
      }
      for (int c = 0; c < num_chars; ++c) {
        std::vector<int> ext = prefix;
        ext.push_back(c);
        // A repeated character only extends from the blank ending; anything
        // else merges with the same-prefix repeat case above.
        const double src = (!prefix.empty() && c == prefix.back())
                               ? cell.pb
                               : p_total;
        if (src == kLogZero) continue;
        Cell& ncell = next[ext];
        const bool fresh = (ncell.pb == kLogZero && ncell.pnb == kLogZero);
        ncell.pnb = log_add(ncell.pnb, log_probs.at(t, c) + src);
        if (fresh && lm != nullptr) {
          // Start-padded context, matching NGramLM::sequence_logprob.
          std::vector<int> ctx(static_cast<std::size_t>(lm->order() - 1),
                               NGramLM::kStartId);
          ctx.insert(ctx.end(), prefix.begin(), prefix.end());
          ncell.lm = cell.lm + lm->logprob(ctx, c);
        } else if (fresh) {
          ncell.lm = cell.lm;
        }
      }
    }

    if (opts.beam != kInfiniteBeam &&
        next.size() > static_cast<std::size_t>(opts.beam)) {
      std::vector<std::pair<double, const std::vector<int>*>> ranked;
      ranked.reserve(next.size());
      for (const auto& [prefix, cell] : next) {
        ranked.emplace_back(cell_score(prefix, cell, opts, lm != nullptr),
                            &prefix);
      }
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) {
                         return a.first > b.first;
                       });
      std::map<std::vector<int>, Cell> pruned;
      for (int k = 0; k < opts.beam; ++k) {
        pruned.emplace(*ranked[k].second, next.at(*ranked[k].second));
      }
      next = std::move(pruned);
    }
    beam = std::move(next);
  }

  const std::vector<int>* best = nullptr;
  double best_q = 0.0;
  for (const auto& [prefix, cell] : beam) {
    const double q = cell_score(prefix, cell, opts, lm != nullptr);
    if (best == nullptr || q > best_q) {
      best = &prefix;
      best_q = q;
    }
  }
  return best != nullptr ? *best : std::vector<int>{};
}

std::vector<int> exhaustive_search(const LogProbMatrix& log_probs,
                                   const NGramLM* lm,
                                   const DecodeOptions& opts) {
  validate_rows(log_probs, "exhaustive_search");
  const int t_len = log_probs.num_frames;
  const int num_chars = log_probs.num_symbols - 1;
  const int blank = log_probs.num_symbols - 1;

  double candidates = 0.0;
  for (int len = 0; len <= t_len; ++len) {
    candidates += std::pow(static_cast<double>(num_chars), len);
    if (candidates > 1e6) {
      throw std::invalid_argument(
          "exhaustive_search: candidate sequence count exceeds 1e6");
    }
  }

  std::vector<int> best;
  double best_q = kLogZero;
  bool have_best = false;
  std::vector<int> seq;

  // Depth-first over sequences in lexicographic order, shorter prefixes
  // first, so the first strict maximum seen is also the tie-break winner.
  auto visit = [&](auto&& self) -> void {
    if (ctc_min_frames(seq) <= t_len) {
      const double logp = -ctc_loss(log_probs, seq, blank);
      double q = logp + opts.beta * static_cast<double>(seq.size());
      if (lm != nullptr) q += opts.alpha * lm->sequence_logprob(seq);
      if (!have_best || q > best_q) {
        best = seq;
        best_q = q;
        have_best = true;
      }
    }
    if (static_cast<int>(seq.size()) == t_len) return;
    for (int c = 0; c < num_chars; ++c) {
      seq.push_back(c);
      self(self);
      seq.pop_back();
    }
  };
  visit(visit);
  return best;
}

double cer(const std::string& ref, const std::string& hyp) {
  const std::vector<std::string> r = utf8_split(ref);
  const std::vector<std::string> h = utf8_split(hyp);
  if (r.empty()) {
    throw std::invalid_argument("cer: reference text is empty");
  }
  std::vector<std::size_t> prev(h.size() + 1), cur(h.size() + 1);
  for (std::size_t j = 0; j <= h.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= r.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= h.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (r[i - 1] == h[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[h.size()]) / static_cast<double>(r.size());
}

}  // namespace mq
