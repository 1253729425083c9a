// tests/test_lm.cc

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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mq/ngram_lm.h"
#include "mq/util.h"
#include "mq/vocab.h"

using namespace mq;

namespace {

Vocabulary ab_vocab() { return Vocabulary::from_chars({"a", "b"}); }

std::vector<std::string> training_set() {
  return {"abab", "aabba", "b", "babb", "aa"};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("lm") {

TEST_CASE("unigram probabilities on 'aab' match hand arithmetic") {
  // Events of "aab": a, a, b, end -> counts a:2 b:1 end:1 of 4 total.
  // Absolute discount 0.75 over 3 distinct events interpolates with the
  // uniform floor 1/3: lambda = 0.75 * 3 / 4.
  NGramLM lm = NGramLM::train({"aab"}, ab_vocab(), /*order=*/1);
  CHECK(lm.order() == 1);
  CHECK(lm.vocab_size() == 2);
  CHECK(lm.end_id() == 2);
  CHECK(std::exp(lm.logprob({}, 0)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::exp(lm.logprob({}, 1)) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(std::exp(lm.logprob({}, 2)) == doctest::Approx(0.25).epsilon(1e-12));
  // Order-1 ignores context.
  CHECK(lm.logprob({1, 0}, 0) == lm.logprob({}, 0));
}

TEST_CASE("every context distribution sums to one") {
  NGramLM lm = NGramLM::train(training_set(), ab_vocab(), /*order=*/4);
  std::vector<std::vector<int>> contexts = {
      {},
      {NGramLM::kStartId},
      {NGramLM::kStartId, 0},
      {0},
      {1},
      {0, 0},
      {0, 1, 0},
      {1, 1, 1},  // unseen trigram context
      {NGramLM::kStartId, NGramLM::kStartId, 0},
  };
  for (const auto& ctx : contexts) {
    CAPTURE(ctx.size());
    double total = 0;
    for (int e = 0; e <= lm.vocab_size(); ++e) {
      const double lp = lm.logprob(ctx, e);
      CHECK(std::isfinite(lp));
      CHECK(lp < 0.0);
      total += std::exp(lp);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("training is deterministic") {
  NGramLM a = NGramLM::train(training_set(), ab_vocab(), 3);
  NGramLM b = NGramLM::train(training_set(), ab_vocab(), 3);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pick(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> ctx;
    for (int i = 0, n = trial % 3; i < n; ++i) ctx.push_back(pick(rng));
    for (int e = 0; e <= 2; ++e) {
      CHECK(a.logprob(ctx, e) == b.logprob(ctx, e));
    }
  }
}

TEST_CASE("sequence scores never exceed their prefixes") {
  NGramLM lm = NGramLM::train(training_set(), ab_vocab(), 4);
  CHECK(lm.sequence_logprob({}) == 0.0);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pick(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> seq;
    double prev = 0.0;
    for (int i = 0; i < 6; ++i) {
      seq.push_back(pick(rng));
      const double cur = lm.sequence_logprob(seq);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
    // The sentence score adds exactly one end-of-sentence term.
    std::vector<int> ctx = seq;
    const double end_term = lm.logprob(ctx, lm.end_id());
    CHECK(lm.sentence_logprob(seq) ==
          doctest::Approx(lm.sequence_logprob(seq) + end_term)
              .epsilon(1e-12));
  }
}

TEST_CASE("total sentence mass over short strings stays below one") {
  // Exact normalization means sum over all sentences of length <= 4 of
  // P(sentence) < 1, approaching 1 as the bound grows.
  NGramLM lm = NGramLM::train(training_set(), ab_vocab(), 2);
  double mass = 0;
  for (int len = 0; len <= 4; ++len) {
    for (int bits = 0; bits < (1 << len); ++bits) {
      std::vector<int> seq;
      for (int i = 0; i < len; ++i) seq.push_back((bits >> i) & 1);
      mass += std::exp(lm.sentence_logprob(seq));
    }
  }
  CHECK(mass > 0.5);
  CHECK(mass < 1.0);
}

TEST_CASE("arpa files round-trip the distribution exactly") {
  Vocabulary vocab = ab_vocab();
  NGramLM lm = NGramLM::train(training_set(), vocab, 3);
  const std::string path = "lm_roundtrip.arpa";
  lm.save(path, vocab);
  NGramLM loaded = NGramLM::load(path, vocab);
  CHECK(loaded.order() == lm.order());
  std::vector<std::vector<int>> contexts = {
      {}, {0}, {1}, {0, 1}, {1, 1}, {NGramLM::kStartId}};
  for (const auto& ctx : contexts) {
    for (int e = 0; e <= 2; ++e) {
      CHECK(loaded.logprob(ctx, e) ==
            doctest::Approx(lm.logprob(ctx, e)).epsilon(1e-12));
    }
  }
  // Saving the loaded model reproduces the file byte for byte.
  const std::string again = "lm_roundtrip2.arpa";
  loaded.save(again, vocab);
  CHECK(slurp(path) == slurp(again));
  const std::string text = slurp(path);
  CHECK(text.find("\\data\\") != std::string::npos);
  CHECK(text.find("ngram 1=") != std::string::npos);
  CHECK(text.find("\\end\\") != std::string::npos);
  std::remove(path.c_str());
  std::remove(again.c_str());
  CHECK_THROWS(NGramLM::load("missing.arpa", vocab));
}

TEST_CASE("out-of-vocabulary input is rejected with its line") {
  try {
    NGramLM::train({"ab", "axb"}, ab_vocab(), 2);
    FAIL("expected a training error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("construction guards") {
  NGramLM blank;
  CHECK_THROWS(blank.logprob({}, 0));
  CHECK_THROWS(blank.sequence_logprob({0}));
  CHECK_THROWS(NGramLM::train({}, ab_vocab(), 2));
  CHECK_THROWS(NGramLM::train({"ab"}, ab_vocab(), 0));
  CHECK_THROWS(NGramLM::train({"ab"}, ab_vocab(), 2, 0.0));
  CHECK_THROWS(NGramLM::train({"ab"}, ab_vocab(), 2, 1.0));
  NGramLM lm = NGramLM::train({"ab"}, ab_vocab(), 2);
  CHECK_THROWS(lm.logprob({}, 3));    // beyond end id
  CHECK_THROWS(lm.logprob({}, -1));   // start is context-only
  CHECK_THROWS(lm.logprob({7}, 0));   // bad context id
}

TEST_CASE("higher order fits the training text at least as well") {
  const std::vector<std::string> corpus = training_set();
  Vocabulary vocab = ab_vocab();
  NGramLM uni = NGramLM::train(corpus, vocab, 1);
  NGramLM four = NGramLM::train(corpus, vocab, 4);
  double ll1 = 0, ll4 = 0;
  for (const auto& s : corpus) {
    std::vector<int> ids = vocab.encode(s);
    ll1 += uni.sentence_logprob(ids);
    ll4 += four.sentence_logprob(ids);
  }
  CHECK(ll4 > ll1);
}

}  // TEST_SUITE
