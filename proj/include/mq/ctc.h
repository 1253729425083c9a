// include/mq/ctc.h

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

#ifndef MQ_CTC_H_
#define MQ_CTC_H_

#include <string>
#include <vector>

#include "mq/tensor.h"

namespace mq {

// Per-frame label posteriors in log space. Rows are frames, columns are the
// output classes; the blank class occupies the last column by convention
// throughout this codebase.
struct LogProbMatrix {
  int num_frames = 0;
  int num_symbols = 0;
  std::vector<double> values;  // row-major, num_frames * num_symbols
  std::string utt_id;

  double at(int t, int v) const {
    return values[static_cast<std::size_t>(t) * num_symbols + v];
  }
  double& at(int t, int v) {
    return values[static_cast<std::size_t>(t) * num_symbols + v];
  }
};

LogProbMatrix log_prob_matrix_from_tensor(const Tensor& t,
                                          const std::string& utt_id = "");

void save_log_probs(const std::string& path, const LogProbMatrix& m);
LogProbMatrix load_log_probs(const std::string& path);

// Number of frames a label sequence needs at minimum: one frame per label
// plus one separating blank per adjacent repeated pair.
int ctc_min_frames(const std::vector<int>& labels);

// Negative log likelihood of `labels` under the alignment lattice, computed
// with the log-space forward-backward recursion. `grad`, when non-null, is
// resized to num_frames * num_symbols and filled with d loss / d log_prob.
// Throws std::invalid_argument when the label sequence cannot fit in
// num_frames or contains out-of-range ids.
double ctc_loss(const LogProbMatrix& log_probs, const std::vector<int>& labels,
                int blank, std::vector<double>* grad = nullptr);

// Tape-recorded version of ctc_loss; `log_probs` is a T x S tensor of
// log-probabilities (typically the output of log_softmax_rows).
Tensor ctc_loss_op(const Tensor& log_probs, const std::vector<int>& labels,
                   int blank);

// Reference implementation that enumerates every length-T frame labelling,
// collapses it, and sums the probability of those matching `labels`.
// Exponential in T; throws std::invalid_argument when S^T exceeds 1e6.
// Returns +infinity when no path collapses to the labels.
double brute_force_ctc(const LogProbMatrix& log_probs,
                       const std::vector<int>& labels, int blank);

// Best path decoding: per-frame argmax (lowest index wins ties), collapse
// repeats, drop blanks.
std::vector<int> greedy_decode(const LogProbMatrix& log_probs, int blank);

}  // namespace mq

#endif  // MQ_CTC_H_
