// include/mq/tensor.h

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

#ifndef MQ_TENSOR_H_
#define MQ_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace mq {

// Dense row-major tensor of doubles, rank 1 to 3. A Tensor is a cheap handle
// onto shared storage; copies alias the same buffer. Values are immutable by
// convention once an op has consumed them, the grad buffer is the only part
// mutated afterwards. The grad buffer exists iff requires_grad is set and
// always matches the data shape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value,
                     bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  // Fan-in style init: entries i.i.d. uniform on [lo, hi).
  static Tensor uniform(std::vector<int> shape, double lo, double hi,
                        std::mt19937_64& rng, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int rank() const;
  int dim(int i) const;
  std::int64_t numel() const;

  double* data();
  const double* data() const;
  double* grad();
  const double* grad() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  void zero_grad();

  // Scalar read; requires numel() == 1.
  double value() const;

  double operator()(int i) const;
  double& operator()(int i);
  double operator()(int i, int j) const;
  double& operator()(int i, int j);

  // Identity of the underlying storage, used for tape bookkeeping.
  const void* id() const { return impl_.get(); }

  std::string shape_str() const;

 private:
  struct Impl {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };

  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  Impl& m();
  const Impl& m() const;

  std::shared_ptr<Impl> impl_;
};

// Records the backward rule of every differentiable op executed while the
// tape is active (see TapeScope). backward() replays the rules in reverse
// execution order, which is a reverse topological order of the graph, so
// every recorded op runs exactly once and gradients accumulate additively.
//
// Gradients are never cleared implicitly: call zero_grads() (or zero_grad()
// on individual tensors) between backward passes.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Seeds d(sum of root)/d(root) = 1 into root's grad and replays the tape.
  void backward(const Tensor& root);

  // Zeroes the grad buffer of every tensor the tape has seen.
  void zero_grads();

  void clear();
  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  void record(std::function<void()> backward_rule);
  void track(const Tensor& t);

  static Tape* active();

 private:
  std::vector<std::function<void()>> nodes_;
  std::vector<Tensor> tracked_;
  friend class TapeScope;
};

// RAII activation of a tape on the current thread. Ops executed inside the
// scope record onto it when any input requires grad.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

enum class Elementwise { kAdd, kMul, kRelu, kSigmoid };
enum class Reduce { kMeanOverTime, kMaxOverTime, kSum };

// Elementwise ops. Binary kinds accept equal shapes, or a rank-1 b of length
// C broadcast across the rows of a rank-2 a of shape T x C.
Tensor elementwise(Elementwise kind, const Tensor& a,
                   const Tensor& b = Tensor());
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor matmul(const Tensor& a, const Tensor& b);

// Per-channel reductions over the time axis of a T x C input (kSum reduces
// everything to a scalar). Max routes its gradient to the earliest arg-max
// frame of each channel.
Tensor reduce(Reduce kind, const Tensor& x);
Tensor mean_over_time(const Tensor& x);
Tensor max_over_time(const Tensor& x);
Tensor sum(const Tensor& x);

Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor transpose(const Tensor& x);
Tensor concat(const std::vector<Tensor>& parts);
Tensor slice(const Tensor& x, int start, int length);
Tensor log_softmax_rows(const Tensor& x);

// For custom op authors: when a tape is active and any input requires grad,
// marks out differentiable, registers the involved tensors, records rule, and
// returns true. Otherwise leaves out as a plain value.
bool record_custom_op(const std::vector<Tensor>& inputs, Tensor& out,
                      std::function<void()> rule);

// Throws if any entry of t is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);

// Max over coordinates of |analytic - central difference| scaled by
// max(1, |analytic|, |numeric|). f must map x to a scalar tensor and be
// evaluated at parameter points where it is twice differentiable;
// eps must lie in [1e-7, 1e-3].
double check_gradient(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                      double eps);

}  // namespace mq

#endif  // MQ_TENSOR_H_
