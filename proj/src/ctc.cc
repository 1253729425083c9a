// src/ctc.cc

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

#include "mq/ctc.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "mq/util.h"

namespace mq {

namespace {

void validate_labels(const std::vector<int>& labels, int num_symbols,
                     int blank) {
  if (blank < 0 || blank >= num_symbols) {
    throw std::invalid_argument("ctc: blank id " + std::to_string(blank) +
                                " out of range for " +
                                std::to_string(num_symbols) + " symbols");
  }
  for (int l : labels) {
    if (l < 0 || l >= num_symbols || l == blank) {
      throw std::invalid_argument("ctc: label id " + std::to_string(l) +
                                  " out of range (blank=" +
                                  std::to_string(blank) + ", S=" +
                                  std::to_string(num_symbols) + ")");
    }
  }
}

// Extended sequence: blank, l1, blank, l2, ..., lL, blank.
std::vector<int> extend_with_blanks(const std::vector<int>& labels,
                                    int blank) {
  std::vector<int> ext(2 * labels.size() + 1, blank);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  return ext;
}

}  // namespace

LogProbMatrix log_prob_matrix_from_tensor(const Tensor& t,
                                          const std::string& utt_id) {
  if (t.rank() != 2) {
    throw std::invalid_argument(
        "log_prob_matrix_from_tensor: expected rank-2 tensor, got " +
        t.shape_str());
  }
  LogProbMatrix m;
  m.num_frames = t.dim(0);
  m.num_symbols = t.dim(1);
  m.values.assign(t.data(), t.data() + t.numel());
  m.utt_id = utt_id;
  return m;
}

void save_log_probs(const std::string& path, const LogProbMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_log_probs: cannot open " + path);
  out.write("MQLP", 4);
  write_u32(out, static_cast<std::uint32_t>(m.num_frames));
  write_u32(out, static_cast<std::uint32_t>(m.num_symbols));
  write_f64_array(out, m.values.data(), m.values.size());
  if (!out) throw std::runtime_error("save_log_probs: write failed: " + path);
}

LogProbMatrix load_log_probs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_log_probs: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "MQLP") {
    throw std::runtime_error("load_log_probs: bad magic in " + path);
  }
  LogProbMatrix m;
  m.num_frames = static_cast<int>(read_u32(in));
  m.num_symbols = static_cast<int>(read_u32(in));
  m.values.resize(static_cast<std::size_t>(m.num_frames) * m.num_symbols);
  read_f64_array(in, m.values.data(), m.values.size());
  if (!in) throw std::runtime_error("load_log_probs: truncated file " + path);
  // The file stores only the matrix; the utterance id rides on the filename.
  m.utt_id = std::filesystem::path(path).stem().string();
  return m;
}

int ctc_min_frames(const std::vector<int>& labels) {
  int repeats = 0;
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++repeats;
  return static_cast<int>(labels.size()) + repeats;
}

double ctc_loss(const LogProbMatrix& log_probs, const std::vector<int>& labels,
                int blank, std::vector<double>* grad) {
  const int t_len = log_probs.num_frames;
  const int s_sym = log_probs.num_symbols;
  validate_labels(labels, s_sym, blank);
  const int need = ctc_min_frames(labels);
  if (t_len < need) {
    throw std::invalid_argument(
        "ctc_loss: label sequence needs at least " + std::to_string(need) +
        " frames, got " + std::to_string(t_len));
  }

  const std::vector<int> ext = extend_with_blanks(labels, blank);
  const int n_ext = static_cast<int>(ext.size());
  auto idx = [n_ext](int t, int s) {
    return static_cast<std::size_t>(t) * n_ext + s;
  };

  // alpha(t,s) includes the frame-t emission; beta(t,s) excludes it, so
  // alpha + beta sums to log P(labels) along any time slice.
  std::vector<double> alpha(static_cast<std::size_t>(t_len) * n_ext,
                            kLogZero);
  std::vector<double> beta(alpha.size(), kLogZero);

  alpha[idx(0, 0)] = log_probs.at(0, ext[0]);
  if (n_ext > 1) alpha[idx(0, 1)] = log_probs.at(0, ext[1]);
  for (int t = 1; t < t_len; ++t) {
    for (int s = 0; s < n_ext; ++s) {
      double a = alpha[idx(t - 1, s)];
      if (s >= 1) a = log_add(a, alpha[idx(t - 1, s - 1)]);
      if (s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]) {
        a = log_add(a, alpha[idx(t - 1, s - 2)]);
      }
      if (a > kLogZero) alpha[idx(t, s)] = a + log_probs.at(t, ext[s]);
    }
  }

  beta[idx(t_len - 1, n_ext - 1)] = 0.0;
  if (n_ext > 1) beta[idx(t_len - 1, n_ext - 2)] = 0.0;
  for (int t = t_len - 2; t >= 0; --t) {
    for (int s = 0; s < n_ext; ++s) {
      double b = beta[idx(t + 1, s)] + log_probs.at(t + 1, ext[s]);
      if (s + 1 < n_ext) {
        b = log_add(b, beta[idx(t + 1, s + 1)] +
                           log_probs.at(t + 1, ext[s + 1]));
      }
      if (s + 2 < n_ext && ext[s + 2] != blank && ext[s + 2] != ext[s]) {
        b = log_add(b, beta[idx(t + 1, s + 2)] +
                           log_probs.at(t + 1, ext[s + 2]));
      }
      beta[idx(t, s)] = b;
    }
  }

  const double log_p =
      log_add(alpha[idx(t_len - 1, n_ext - 1)],
              n_ext > 1 ? alpha[idx(t_len - 1, n_ext - 2)] : kLogZero);
  if (!(log_p > kLogZero)) {
    throw std::runtime_error("ctc_loss: zero-probability lattice");
  }

  if (grad != nullptr) {
    grad->assign(static_cast<std::size_t>(t_len) * s_sym, 0.0);
    for (int t = 0; t < t_len; ++t) {
      for (int s = 0; s < n_ext; ++s) {
        const double ab = alpha[idx(t, s)] + beta[idx(t, s)];
        if (ab <= kLogZero) continue;
        (*grad)[static_cast<std::size_t>(t) * s_sym + ext[s]] -=
            std::exp(ab - log_p);
      }
    }
  }
  return -log_p;
}

Tensor ctc_loss_op(const Tensor& log_probs, const std::vector<int>& labels,
                   int blank) {
  if (log_probs.rank() != 2) {
    throw std::invalid_argument("ctc_loss_op: expected T x S tensor, got " +
                                log_probs.shape_str());
  }
  LogProbMatrix m = log_prob_matrix_from_tensor(log_probs);
  auto grad = std::make_shared<std::vector<double>>();
  const double loss = ctc_loss(m, labels, blank, grad.get());

  Tensor out = Tensor::scalar(loss);
  Tensor tx = log_probs, to = out;
  record_custom_op({log_probs}, out, [tx, to, grad]() mutable {
    if (!tx.requires_grad()) return;
    const double g = to.grad()[0];
    double* gx = tx.grad();
    const auto& d = *grad;
    for (std::size_t i = 0; i < d.size(); ++i) gx[i] += g * d[i];
  });
  return out;
}

double brute_force_ctc(const LogProbMatrix& log_probs,
                       const std::vector<int>& labels, int blank) {
  const int t_len = log_probs.num_frames;
  const int s_sym = log_probs.num_symbols;
  validate_labels(labels, s_sym, blank);
  double paths = std::pow(static_cast<double>(s_sym), t_len);
  if (paths > 1e6) {
    throw std::invalid_argument(
        "brute_force_ctc: S^T = " + std::to_string(paths) +
        " exceeds the 1e6 enumeration budget");
  }

  std::vector<int> path(t_len, 0);
  std::vector<int> collapsed;
  collapsed.reserve(t_len);
  double total = kLogZero;
  while (true) {
    collapsed.clear();
    int prev = -1;
    for (int t = 0; t < t_len; ++t) {
      if (path[t] != prev && path[t] != blank) collapsed.push_back(path[t]);
      prev = path[t];
    }
    if (collapsed == labels) {
      double lp = 0.0;
      for (int t = 0; t < t_len; ++t) lp += log_probs.at(t, path[t]);
      total = log_add(total, lp);
    }
    int pos = t_len - 1;
    while (pos >= 0 && path[pos] == s_sym - 1) path[pos--] = 0;
    if (pos < 0) break;
    ++path[pos];
  }
  if (total <= kLogZero) return std::numeric_limits<double>::infinity();
  return -total;
}

std::vector<int> greedy_decode(const LogProbMatrix& log_probs, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int t = 0; t < log_probs.num_frames; ++t) {
    int best = 0;
    double best_lp = log_probs.at(t, 0);
    for (int v = 1; v < log_probs.num_symbols; ++v) {
      if (log_probs.at(t, v) > best_lp) {
        best = v;
        best_lp = log_probs.at(t, v);
      }
    }
    if (best != prev && best != blank) out.push_back(best);
    prev = best;
  }
  return out;
}

}  // namespace mq
