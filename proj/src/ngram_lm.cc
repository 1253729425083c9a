// src/ngram_lm.cc

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

#include "mq/ngram_lm.h"

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "mq/util.h"

namespace mq {

namespace {

constexpr double kLn10 = 2.302585092994045684;
// Conventional ARPA marker for tokens listed only to carry a back-off.
constexpr double kDummyLog10Prob = -99.0;

std::vector<int> tail(const std::vector<int>& v, std::size_t n) {
  if (v.size() <= n) return v;
  return std::vector<int>(v.end() - static_cast<std::ptrdiff_t>(n), v.end());
}

}  // namespace

NGramLM NGramLM::train(const std::vector<std::string>& transcripts,
                       const Vocabulary& vocab, int order, double discount) {
  if (transcripts.empty()) {
    throw std::invalid_argument("train_lm: transcript list is empty");
  }
  if (vocab.size() < 1) {
    throw std::invalid_argument("train_lm: empty vocabulary");
  }
  if (order < 1) throw std::invalid_argument("train_lm: order must be >= 1");
  if (discount <= 0.0 || discount >= 1.0) {
    throw std::invalid_argument("train_lm: discount must lie in (0,1)");
  }

  NGramLM lm;
  lm.order_ = order;
  lm.vocab_size_ = vocab.size();
  lm.discount_ = discount;
  const int end = lm.end_id();

  // Raw event counts per order. Every event position contributes one n-gram
  // of each order 1..order, so a seen n-gram always has its suffix seen at
  // the next order down.
  std::vector<std::map<std::vector<int>, std::int64_t>> counts(order);
  for (std::size_t line = 0; line < transcripts.size(); ++line) {
    std::vector<int> ids;
    try {
      ids = vocab.encode(transcripts[line]);
    } catch (const std::exception& e) {
      throw std::invalid_argument("train_lm: line " +
                                  std::to_string(line + 1) + ": " + e.what());
    }
    std::vector<int> padded(order - 1, kStartId);
    padded.insert(padded.end(), ids.begin(), ids.end());
    padded.push_back(end);
    for (std::size_t p = order - 1; p < padded.size(); ++p) {
      for (int n = 1; n <= order; ++n) {
        counts[n - 1][std::vector<int>(padded.begin() + (p - n + 1),
                                       padded.begin() + p + 1)] += 1;
      }
    }
  }

  // Compile in linear space, lowest order first; the base case is uniform
  // over the V+1 events. Seen-gram probabilities keep the discounted direct
  // mass plus the context's back-off weight times the lower-order value.
  const double p0 = 1.0 / (vocab.size() + 1);
  std::vector<std::map<std::vector<int>, double>> linear(order);
  lm.probs_.resize(order);
  lm.backoffs_.resize(order);

  for (int n = 1; n <= order; ++n) {
    const auto& cnt = counts[n - 1];
    auto it = cnt.begin();
    while (it != cnt.end()) {
      const std::vector<int> ctx(it->first.begin(), it->first.end() - 1);
      std::int64_t total = 0;
      std::int64_t distinct = 0;
      auto run = it;
      for (; run != cnt.end(); ++run) {
        if (!std::equal(ctx.begin(), ctx.end(), run->first.begin())) break;
        total += run->second;
        ++distinct;
      }
      const double lambda = discount * static_cast<double>(distinct) /
                            static_cast<double>(total);
      if (!ctx.empty()) {
        lm.backoffs_[ctx.size()][ctx] = std::log10(lambda);
      }
      for (; it != run; ++it) {
        const int event = it->first.back();
        double lower = p0;
        if (n > 1) {
          std::vector<int> sub(ctx.begin() + 1, ctx.end());
          sub.push_back(event);
          lower = linear[n - 2].at(sub);
        }
        const double p =
            (static_cast<double>(it->second) - discount) /
                static_cast<double>(total) +
            lambda * lower;
        linear[n - 1][it->first] = p;
      }
      if (n == 1) {
        // Complete the unigram table over the whole event space so queries
        // never fall off the bottom.
        for (int e = 0; e <= end; ++e) {
          auto& cell = linear[0][{e}];
          if (cell == 0.0) cell = lambda * p0;
        }
      }
    }
    for (const auto& [gram, p] : linear[n - 1]) {
      lm.probs_[n - 1][gram] = std::log10(p);
    }
  }
  return lm;
}

double NGramLM::logprob(const std::vector<int>& context, int event) const {
  if (order_ < 1) throw std::runtime_error("ngram lm: model is untrained");
  if (event < 0 || event > end_id()) {
    throw std::invalid_argument("ngram lm: event id " +
                                std::to_string(event) + " out of range");
  }
  std::vector<int> ctx = tail(context, static_cast<std::size_t>(order_ - 1));
  for (int c : ctx) {
    if (c != kStartId && (c < 0 || c >= vocab_size_)) {
      throw std::invalid_argument("ngram lm: context id " +
                                  std::to_string(c) + " out of range");
    }
  }
  double log10_total = 0.0;
  while (true) {
    std::vector<int> gram = ctx;
    gram.push_back(event);
    const auto& table = probs_[ctx.size()];
    const auto it = table.find(gram);
    if (it != table.end()) return kLn10 * (log10_total + it->second);
    if (ctx.empty()) {
      throw std::runtime_error("ngram lm: incomplete unigram table");
    }
    const auto& bos = backoffs_[ctx.size()];
    const auto bo = bos.find(ctx);
    // Unseen context: back off with weight 1.
    if (bo != bos.end()) log10_total += bo->second;
    ctx.erase(ctx.begin());
  }
}

double NGramLM::sequence_logprob(const std::vector<int>& seq) const {
  if (order_ < 1) throw std::runtime_error("ngram lm: model is untrained");
  std::vector<int> ctx(static_cast<std::size_t>(order_ - 1), kStartId);
  double total = 0.0;
  for (int id : seq) {
    total += logprob(ctx, id);
    ctx.push_back(id);
    ctx.erase(ctx.begin());
  }
  return total;
}

double NGramLM::sentence_logprob(const std::vector<int>& seq) const {
  if (order_ < 1) throw std::runtime_error("ngram lm: model is untrained");
  std::vector<int> ctx(static_cast<std::size_t>(order_ - 1), kStartId);
  for (int id : seq) {
    ctx.push_back(id);
    ctx.erase(ctx.begin());
  }
  return sequence_logprob(seq) + logprob(ctx, end_id());
}

namespace {

std::string render_token(int id, const Vocabulary& vocab) {
  if (id == NGramLM::kStartId) return "<s>";
  if (id == vocab.size()) return "</s>";
  const std::string& ch = vocab.char_of(id);
  for (char b : ch) {
    if (static_cast<unsigned char>(b) <= 0x20) {
      throw std::invalid_argument(
          "ngram lm: character with whitespace/control bytes cannot be "
          "serialized");
    }
  }
  return ch;
}

int parse_token(const std::string& tok, const Vocabulary& vocab) {
  if (tok == "<s>") return NGramLM::kStartId;
  if (tok == "</s>") return vocab.size();
  return vocab.id_of(tok);
}

}  // namespace

void NGramLM::save(const std::string& path, const Vocabulary& vocab) const {
  if (vocab.size() != vocab_size_) {
    throw std::invalid_argument("ngram lm save: vocabulary size mismatch");
  }
  // Merge per-order grams with back-off-only contexts (pure start runs).
  struct Line {
    std::optional<double> prob;
    std::optional<double> backoff;
  };
  std::vector<std::map<std::vector<int>, Line>> sections(order_);
  for (int n = 1; n <= order_; ++n) {
    for (const auto& [gram, p] : probs_[n - 1]) sections[n - 1][gram].prob = p;
  }
  for (std::size_t len = 1; len < backoffs_.size(); ++len) {
    for (const auto& [ctx, b] : backoffs_[len]) {
      sections[len - 1][ctx].backoff = b;
    }
  }

  std::ostringstream out;
  out << "\\data\\\n";
  for (int n = 1; n <= order_; ++n) {
    out << "ngram " << n << "=" << sections[n - 1].size() << "\n";
  }
  for (int n = 1; n <= order_; ++n) {
    out << "\n\\" << n << "-grams:\n";
    for (const auto& [gram, line] : sections[n - 1]) {
      out << format_double(line.prob.value_or(kDummyLog10Prob)) << "\t";
      for (std::size_t i = 0; i < gram.size(); ++i) {
        if (i) out << " ";
        out << render_token(gram[i], vocab);
      }
      if (line.backoff.has_value()) {
        out << "\t" << format_double(*line.backoff);
      }
      out << "\n";
    }
  }
  out << "\n\\end\\\n";
  write_text_file(path, out.str());
}

NGramLM NGramLM::load(const std::string& path, const Vocabulary& vocab) {
  std::istringstream in(read_text_file(path));
  std::string line;
  auto next_line = [&](std::string& s) {
    while (std::getline(in, s)) {
      if (!s.empty() && s.back() == '\r') s.pop_back();
      if (!s.empty()) return true;
    }
    return false;
  };

  if (!next_line(line) || line != "\\data\\") {
    throw std::runtime_error("ngram lm load: missing \\data\\ header in " +
                             path);
  }
  std::vector<std::size_t> ngram_counts;
  while (next_line(line) && line.rfind("ngram ", 0) == 0) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("ngram lm load: bad count line: " + line);
    }
    ngram_counts.push_back(std::stoull(line.substr(eq + 1)));
  }
  if (ngram_counts.empty()) {
    throw std::runtime_error("ngram lm load: no ngram counts in " + path);
  }

  NGramLM lm;
  lm.order_ = static_cast<int>(ngram_counts.size());
  lm.vocab_size_ = vocab.size();
  lm.probs_.resize(lm.order_);
  // One extra slot tolerates foreign files carrying a top-order back-off.
  lm.backoffs_.resize(lm.order_ + 1);

  for (int n = 1; n <= lm.order_; ++n) {
    const std::string header = "\\" + std::to_string(n) + "-grams:";
    if (line != header) {
      throw std::runtime_error("ngram lm load: expected " + header +
                               ", got '" + line + "'");
    }
    for (std::size_t k = 0; k < ngram_counts[n - 1]; ++k) {
      if (!next_line(line)) {
        throw std::runtime_error("ngram lm load: truncated " + header);
      }
      std::istringstream fields(line);
      std::vector<std::string> toks;
      std::string tok;
      while (fields >> tok) toks.push_back(tok);
      if (toks.size() != static_cast<std::size_t>(n) + 1 &&
          toks.size() != static_cast<std::size_t>(n) + 2) {
        throw std::runtime_error("ngram lm load: bad line: " + line);
      }
      std::vector<int> gram;
      for (int i = 0; i < n; ++i) gram.push_back(parse_token(toks[i + 1], vocab));
      const double prob = std::stod(toks[0]);
      if (prob != kDummyLog10Prob) lm.probs_[n - 1][gram] = prob;
      if (toks.size() == static_cast<std::size_t>(n) + 2) {
        lm.backoffs_[n][gram] = std::stod(toks.back());
      }
    }
    if (n < lm.order_ && !next_line(line)) {
      throw std::runtime_error("ngram lm load: truncated body in " + path);
    }
  }
  if (line != "\\end\\" && (!next_line(line) || line != "\\end\\")) {
    throw std::runtime_error("ngram lm load: missing \\end\\ in " + path);
  }
  return lm;
}

}  // namespace mq
