// src/tensor.cc

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

#include "mq/tensor.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace mq {

namespace {

std::int64_t product(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

void validate_shape(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw std::invalid_argument("tensor rank must be 1..3, got rank " +
                                std::to_string(shape.size()));
  }
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor extents must be positive");
  }
}

thread_local Tape* g_active_tape = nullptr;

}  // namespace

Tensor::Impl& Tensor::m() {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return *impl_;
}

const Tensor::Impl& Tensor::m() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return *impl_;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  validate_shape(shape);
  auto impl = std::make_shared<Impl>();
  impl->data.assign(static_cast<std::size_t>(product(shape)), 0.0);
  impl->shape = std::move(shape);
  Tensor t(std::move(impl));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.m().data.begin(), t.m().data.end(), value);
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool requires_grad) {
  validate_shape(shape);
  if (product(shape) != static_cast<std::int64_t>(data.size())) {
    throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                " does not match shape product " +
                                std::to_string(product(shape)));
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  Tensor t(std::move(impl));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::uniform(std::vector<int> shape, double lo, double hi,
                       std::mt19937_64& rng, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.m().data) v = dist(rng);
  return t;
}

const std::vector<int>& Tensor::shape() const { return m().shape; }
int Tensor::rank() const { return static_cast<int>(m().shape.size()); }

int Tensor::dim(int i) const {
  const auto& s = m().shape;
  if (i < 0 || i >= static_cast<int>(s.size())) {
    throw std::out_of_range("dim index out of range");
  }
  return s[i];
}

std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(m().data.size());
}

double* Tensor::data() { return m().data.data(); }
const double* Tensor::data() const { return m().data.data(); }

double* Tensor::grad() {
  if (!m().requires_grad) {
    throw std::logic_error("grad requested on tensor without requires_grad");
  }
  return m().grad.data();
}

const double* Tensor::grad() const {
  if (!m().requires_grad) {
    throw std::logic_error("grad requested on tensor without requires_grad");
  }
  return m().grad.data();
}

bool Tensor::requires_grad() const { return m().requires_grad; }

void Tensor::set_requires_grad(bool on) {
  auto& impl = m();
  impl.requires_grad = on;
  if (on) {
    impl.grad.assign(impl.data.size(), 0.0);
  } else {
    impl.grad.clear();
    impl.grad.shrink_to_fit();
  }
}

void Tensor::zero_grad() {
  auto& impl = m();
  if (impl.requires_grad) std::fill(impl.grad.begin(), impl.grad.end(), 0.0);
}

double Tensor::value() const {
  if (numel() != 1) {
    throw std::logic_error("value() on non-scalar tensor " + shape_str());
  }
  return m().data[0];
}

double Tensor::operator()(int i) const { return m().data[i]; }
double& Tensor::operator()(int i) { return m().data[i]; }

double Tensor::operator()(int i, int j) const {
  return m().data[static_cast<std::size_t>(i) * m().shape.back() + j];
}

double& Tensor::operator()(int i, int j) {
  return m().data[static_cast<std::size_t>(i) * m().shape.back() + j];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  const auto& s = m().shape;
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

// ---------------------------------------------------------------------------
// Tape

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::function<void()> backward_rule) {
  nodes_.push_back(std::move(backward_rule));
}

void Tape::track(const Tensor& t) { tracked_.push_back(t); }

void Tape::backward(const Tensor& root) {
  if (!root.requires_grad()) {
    throw std::logic_error(
        "backward root does not require grad (was it computed on this tape?)");
  }
  Tensor seed = root;  // same storage
  double* g = seed.grad();
  for (std::int64_t i = 0; i < seed.numel(); ++i) g[i] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

void Tape::zero_grads() {
  std::unordered_set<const void*> seen;
  for (auto& t : tracked_) {
    if (seen.insert(t.id()).second && t.requires_grad()) t.zero_grad();
  }
}

void Tape::clear() {
  nodes_.clear();
  tracked_.clear();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

TapeScope::~TapeScope() { g_active_tape = previous_; }

// ---------------------------------------------------------------------------
// Op helpers

namespace {

bool want_grad(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

// Marks the output differentiable and registers the rule plus all involved
// tensors with the active tape.
void record(std::initializer_list<Tensor> involved, Tensor& out,
            std::function<void()> rule) {
  out.set_requires_grad(true);
  Tape* tape = g_active_tape;
  for (const Tensor& t : involved) tape->track(t);
  tape->track(out);
  tape->record(std::move(rule));
}

bool broadcasts_over_rows(const Tensor& a, const Tensor& b) {
  return a.rank() == 2 && b.rank() == 1 && b.dim(0) == a.dim(1);
}

}  // namespace

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b) {
  const bool binary = kind == Elementwise::kAdd || kind == Elementwise::kMul;
  if (binary) {
    if (!b.defined()) {
      throw std::invalid_argument("binary elementwise op needs two operands");
    }
    if (a.shape() != b.shape() && !broadcasts_over_rows(a, b)) {
      throw std::invalid_argument("elementwise shape mismatch: " +
                                  a.shape_str() + " vs " + b.shape_str());
    }
  }

  Tensor out = Tensor::zeros(a.shape());
  const std::int64_t n = a.numel();
  const int cols = a.rank() == 2 ? a.dim(1) : 0;
  const bool bcast = binary && a.shape() != b.shape();

  const double* pa = a.data();
  double* po = out.data();
  switch (kind) {
    case Elementwise::kAdd: {
      const double* pb = b.data();
      for (std::int64_t i = 0; i < n; ++i)
        po[i] = pa[i] + (bcast ? pb[i % cols] : pb[i]);
      break;
    }
    case Elementwise::kMul: {
      const double* pb = b.data();
      for (std::int64_t i = 0; i < n; ++i)
        po[i] = pa[i] * (bcast ? pb[i % cols] : pb[i]);
      break;
    }
    case Elementwise::kRelu:
      for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] > 0.0 ? pa[i] : 0.0;
      break;
    case Elementwise::kSigmoid:
      for (std::int64_t i = 0; i < n; ++i) po[i] = 1.0 / (1.0 + std::exp(-pa[i]));
      break;
  }

  if (binary ? want_grad({&a, &b}) : want_grad({&a})) {
    Tensor ta = a, tb = b, to = out;
    std::function<void()> rule;
    switch (kind) {
      case Elementwise::kAdd:
        rule = [ta, tb, to, n, cols, bcast]() mutable {
          const double* go = to.grad();
          if (ta.requires_grad()) {
            double* ga = ta.grad();
            for (std::int64_t i = 0; i < n; ++i) ga[i] += go[i];
          }
          if (tb.requires_grad()) {
            double* gb = tb.grad();
            for (std::int64_t i = 0; i < n; ++i)
              gb[bcast ? i % cols : i] += go[i];
          }
        };
        break;
      case Elementwise::kMul:
        rule = [ta, tb, to, n, cols, bcast]() mutable {
          const double* go = to.grad();
          const double* pa = ta.data();
          const double* pb = tb.data();
          if (ta.requires_grad()) {
            double* ga = ta.grad();
            for (std::int64_t i = 0; i < n; ++i)
              ga[i] += go[i] * (bcast ? pb[i % cols] : pb[i]);
          }
          if (tb.requires_grad()) {
            double* gb = tb.grad();
            for (std::int64_t i = 0; i < n; ++i)
              gb[bcast ? i % cols : i] += go[i] * pa[i];
          }
        };
        break;
      case Elementwise::kRelu:
        rule = [ta, to, n]() mutable {
          if (!ta.requires_grad()) return;
          const double* go = to.grad();
          const double* pa = ta.data();
          double* ga = ta.grad();
          for (std::int64_t i = 0; i < n; ++i)
            if (pa[i] > 0.0) ga[i] += go[i];
        };
        break;
      case Elementwise::kSigmoid:
        rule = [ta, to, n]() mutable {
          if (!ta.requires_grad()) return;
          const double* go = to.grad();
          const double* py = to.data();
          double* ga = ta.grad();
          for (std::int64_t i = 0; i < n; ++i)
            ga[i] += go[i] * py[i] * (1.0 - py[i]);
        };
        break;
    }
    if (binary) {
      record({a, b, out}, out, std::move(rule));
    } else {
      record({a, out}, out, std::move(rule));
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise(Elementwise::kAdd, a, b);
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise(Elementwise::kMul, a, b);
}
Tensor relu(const Tensor& x) { return elementwise(Elementwise::kRelu, x); }
Tensor sigmoid(const Tensor& x) {
  return elementwise(Elementwise::kSigmoid, x);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument("matmul expects rank-2 operands, got " +
                                a.shape_str() + " and " + b.shape_str());
  }
  if (a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul inner dimension mismatch: " +
                                a.shape_str() + " vs " + b.shape_str());
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i) {
    for (int l = 0; l < k; ++l) {
      const double av = pa[static_cast<std::size_t>(i) * k + l];
      if (av == 0.0) continue;
      const double* brow = pb + static_cast<std::size_t>(l) * n;
      double* orow = po + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }

  if (want_grad({&a, &b})) {
    Tensor ta = a, tb = b, to = out;
    record({a, b, out}, out, [ta, tb, to, m, k, n]() mutable {
      const double* go = to.grad();
      if (ta.requires_grad()) {
        // dA = dY * B^T
        double* ga = ta.grad();
        const double* pb = tb.data();
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < k; ++l) {
            double acc = 0.0;
            const double* grow = go + static_cast<std::size_t>(i) * n;
            const double* brow = pb + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
            ga[static_cast<std::size_t>(i) * k + l] += acc;
          }
      }
      if (tb.requires_grad()) {
        // dB = A^T * dY
        double* gb = tb.grad();
        const double* pa = ta.data();
        for (int l = 0; l < k; ++l)
          for (int i = 0; i < m; ++i) {
            const double av = pa[static_cast<std::size_t>(i) * k + l];
            if (av == 0.0) continue;
            const double* grow = go + static_cast<std::size_t>(i) * n;
            double* brow = gb + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
          }
      }
    });
  }
  return out;
}

Tensor reduce(Reduce kind, const Tensor& x) {
  if (kind == Reduce::kSum) {
    double acc = 0.0;
    const double* px = x.data();
    for (std::int64_t i = 0; i < x.numel(); ++i) acc += px[i];
    Tensor out = Tensor::scalar(acc);
    if (want_grad({&x})) {
      Tensor tx = x, to = out;
      record({x, out}, out, [tx, to]() mutable {
        if (!tx.requires_grad()) return;
        const double g = to.grad()[0];
        double* gx = tx.grad();
        for (std::int64_t i = 0; i < tx.numel(); ++i) gx[i] += g;
      });
    }
    return out;
  }

  if (x.rank() != 2) {
    throw std::invalid_argument("time reduction expects a T x C input, got " +
                                x.shape_str());
  }
  const int t_len = x.dim(0), c_len = x.dim(1);
  if (t_len < 1) throw std::invalid_argument("empty time axis");

  Tensor out = Tensor::zeros({c_len});
  const double* px = x.data();
  double* po = out.data();
  std::vector<int> argmax(kind == Reduce::kMaxOverTime ? c_len : 0, 0);
  if (kind == Reduce::kMeanOverTime) {
    for (int t = 0; t < t_len; ++t)
      for (int c = 0; c < c_len; ++c)
        po[c] += px[static_cast<std::size_t>(t) * c_len + c];
    for (int c = 0; c < c_len; ++c) po[c] /= t_len;
  } else {
    for (int c = 0; c < c_len; ++c) po[c] = px[c];
    for (int t = 1; t < t_len; ++t)
      for (int c = 0; c < c_len; ++c) {
        const double v = px[static_cast<std::size_t>(t) * c_len + c];
        if (v > po[c]) {  // strict: ties stay at the earliest frame
          po[c] = v;
          argmax[c] = t;
        }
      }
  }

  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    if (kind == Reduce::kMeanOverTime) {
      record({x, out}, out, [tx, to, t_len, c_len]() mutable {
        if (!tx.requires_grad()) return;
        const double* go = to.grad();
        double* gx = tx.grad();
        for (int t = 0; t < t_len; ++t)
          for (int c = 0; c < c_len; ++c)
            gx[static_cast<std::size_t>(t) * c_len + c] += go[c] / t_len;
      });
    } else {
      record({x, out}, out, [tx, to, argmax, c_len]() mutable {
        if (!tx.requires_grad()) return;
        const double* go = to.grad();
        double* gx = tx.grad();
        for (int c = 0; c < c_len; ++c)
          gx[static_cast<std::size_t>(argmax[c]) * c_len + c] += go[c];
      });
    }
  }
  return out;
}

Tensor mean_over_time(const Tensor& x) {
  return reduce(Reduce::kMeanOverTime, x);
}
Tensor max_over_time(const Tensor& x) { return reduce(Reduce::kMaxOverTime, x); }
Tensor sum(const Tensor& x) { return reduce(Reduce::kSum, x); }

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  Tensor out = Tensor::from_data(
      std::move(shape), std::vector<double>(x.data(), x.data() + x.numel()));
  if (out.numel() != x.numel()) {
    throw std::invalid_argument("reshape changes element count");
  }
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    record({x, out}, out, [tx, to]() mutable {
      if (!tx.requires_grad()) return;
      const double* go = to.grad();
      double* gx = tx.grad();
      for (std::int64_t i = 0; i < tx.numel(); ++i) gx[i] += go[i];
    });
  }
  return out;
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) {
    throw std::invalid_argument("transpose expects rank-2 input");
  }
  const int r = x.dim(0), c = x.dim(1);
  Tensor out = Tensor::zeros({c, r});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out(j, i) = x(i, j);
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    record({x, out}, out, [tx, to, r, c]() mutable {
      if (!tx.requires_grad()) return;
      double* gx = tx.grad();
      const double* go = to.grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          gx[static_cast<std::size_t>(i) * c + j] +=
              go[static_cast<std::size_t>(j) * r + i];
    });
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
  std::vector<double> data;
  bool any_grad = false;
  for (const auto& p : parts) {
    if (p.rank() != 1) {
      throw std::invalid_argument("concat expects rank-1 parts");
    }
    data.insert(data.end(), p.data(), p.data() + p.numel());
    any_grad = any_grad || p.requires_grad();
  }
  const int total = static_cast<int>(data.size());
  Tensor out = Tensor::from_data({total}, std::move(data));
  if (g_active_tape != nullptr && any_grad) {
    std::vector<Tensor> held = parts;
    Tensor to = out;
    out.set_requires_grad(true);
    for (const auto& p : parts) g_active_tape->track(p);
    g_active_tape->track(out);
    g_active_tape->record([held, to]() mutable {
      const double* go = to.grad();
      std::size_t offset = 0;
      for (auto& p : held) {
        if (p.requires_grad()) {
          double* gp = p.grad();
          for (std::int64_t i = 0; i < p.numel(); ++i) gp[i] += go[offset + i];
        }
        offset += static_cast<std::size_t>(p.numel());
      }
    });
  }
  return out;
}

Tensor slice(const Tensor& x, int start, int length) {
  if (x.rank() != 1) throw std::invalid_argument("slice expects rank-1 input");
  if (start < 0 || length <= 0 || start + length > x.dim(0)) {
    throw std::invalid_argument("slice range out of bounds");
  }
  Tensor out = Tensor::from_data(
      {length}, std::vector<double>(x.data() + start, x.data() + start + length));
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    record({x, out}, out, [tx, to, start, length]() mutable {
      if (!tx.requires_grad()) return;
      const double* go = to.grad();
      double* gx = tx.grad();
      for (int i = 0; i < length; ++i) gx[start + i] += go[i];
    });
  }
  return out;
}

Tensor log_softmax_rows(const Tensor& x) {
  if (x.rank() != 2) {
    throw std::invalid_argument("log_softmax_rows expects rank-2 input");
  }
  const int rows = x.dim(0), cols = x.dim(1);
  Tensor out = Tensor::zeros({rows, cols});
  for (int i = 0; i < rows; ++i) {
    const double* row = x.data() + static_cast<std::size_t>(i) * cols;
    double mx = row[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    double lse = 0.0;
    for (int j = 0; j < cols; ++j) lse += std::exp(row[j] - mx);
    lse = mx + std::log(lse);
    double* orow = out.data() + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) orow[j] = row[j] - lse;
  }
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    record({x, out}, out, [tx, to, rows, cols]() mutable {
      if (!tx.requires_grad()) return;
      const double* go = to.grad();
      const double* py = to.data();
      double* gx = tx.grad();
      for (int i = 0; i < rows; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * cols;
        double gsum = 0.0;
        for (int j = 0; j < cols; ++j) gsum += go[off + j];
        for (int j = 0; j < cols; ++j)
          gx[off + j] += go[off + j] - std::exp(py[off + j]) * gsum;
      }
    });
  }
  return out;
}

bool record_custom_op(const std::vector<Tensor>& inputs, Tensor& out,
                      std::function<void()> rule) {
  Tape* tape = g_active_tape;
  if (tape == nullptr) return false;
  bool any = false;
  for (const Tensor& t : inputs) any = any || (t.defined() && t.requires_grad());
  if (!any) return false;
  out.set_requires_grad(true);
  for (const Tensor& t : inputs) tape->track(t);
  tape->track(out);
  tape->record(std::move(rule));
  return true;
}

void check_finite(const Tensor& t, const std::string& what) {
  const double* p = t.data();
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    if (!std::isfinite(p[i])) {
      throw std::runtime_error(what + ": non-finite value at flat index " +
                               std::to_string(i));
    }
  }
}

double check_gradient(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                      double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw std::invalid_argument("check_gradient eps must lie in [1e-7, 1e-3]");
  }
  x.set_requires_grad(true);
  x.zero_grad();

  std::vector<double> analytic(x.numel());
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor y = f(x);
    if (y.numel() != 1) {
      throw std::invalid_argument("check_gradient needs a scalar-valued f");
    }
    tape.backward(y);
    std::copy(x.grad(), x.grad() + x.numel(), analytic.begin());
  }

  // Numeric probing must not record anywhere, even when the caller holds an
  // active tape.
  Tape* saved = g_active_tape;
  g_active_tape = nullptr;

  double worst = 0.0;
  double* px = x.data();
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const double keep = px[i];
    px[i] = keep + eps;
    const double up = f(x).value();
    px[i] = keep - eps;
    const double down = f(x).value();
    px[i] = keep;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      g_active_tape = saved;
      throw std::runtime_error("check_gradient: non-finite f at coordinate " +
                               std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double denom =
        std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  g_active_tape = saved;
  return worst;
}

}  // namespace mq
