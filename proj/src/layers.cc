// src/layers.cc

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

#include "mq/layers.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mq {

namespace {

void require_channels(const Tensor& x, int channels, const char* who) {
  if (x.rank() != 2) {
    throw std::invalid_argument(std::string(who) +
                                ": expected a T x C input, got " +
                                x.shape_str());
  }
  if (x.dim(1) != channels) {
    throw std::invalid_argument(std::string(who) + ": channel mismatch, got " +
                                x.shape_str() + " but layer has C=" +
                                std::to_string(channels));
  }
}

double init_bound(std::int64_t fan_in) {
  return 1.0 / std::sqrt(static_cast<double>(fan_in));
}

}  // namespace

// ---------------------------------------------------------------------------
// DepthwiseConv1d

DepthwiseConv1d::DepthwiseConv1d(int kernel_size, int channels, int dilation,
                                 std::mt19937_64& rng)
    : kernel_size_(kernel_size), channels_(channels), dilation_(dilation) {
  if (kernel_size <= 0 || kernel_size % 2 == 0) {
    throw std::invalid_argument("depthwise kernel size must be odd, got " +
                                std::to_string(kernel_size));
  }
  if (dilation < 1) throw std::invalid_argument("dilation must be positive");
  const double b = init_bound(kernel_size);
  kernel_ = Tensor::uniform({kernel_size, channels}, -b, b, rng,
                            /*requires_grad=*/true);
}

std::int64_t DepthwiseConv1d::param_count() const {
  return static_cast<std::int64_t>(kernel_size_) * channels_;
}

Tensor DepthwiseConv1d::forward(const Tensor& x) const {
  require_channels(x, channels_, "depthwise_forward");
  const int t_len = x.dim(0), c_len = channels_, k_len = kernel_size_;
  const int half = (k_len - 1) / 2, d = dilation_;

  Tensor out = Tensor::zeros({t_len, c_len});
  const double* px = x.data();
  const double* pw = kernel_.data();
  double* po = out.data();
  for (int t = 0; t < t_len; ++t) {
    for (int k = 0; k < k_len; ++k) {
      const int src = t + d * (k - half);
      if (src < 0 || src >= t_len) continue;
      const double* xrow = px + static_cast<std::size_t>(src) * c_len;
      const double* wrow = pw + static_cast<std::size_t>(k) * c_len;
      double* orow = po + static_cast<std::size_t>(t) * c_len;
      for (int c = 0; c < c_len; ++c) orow[c] += wrow[c] * xrow[c];
    }
  }

  Tensor tx = x, tw = kernel_, to = out;
  record_custom_op({x, kernel_}, out, [tx, tw, to, t_len, c_len, k_len, half,
                                       d]() mutable {
    const double* go = to.grad();
    if (tw.requires_grad()) {
      double* gw = tw.grad();
      const double* px = tx.data();
      for (int k = 0; k < k_len; ++k) {
        double* gwrow = gw + static_cast<std::size_t>(k) * c_len;
        for (int t = 0; t < t_len; ++t) {
          const int src = t + d * (k - half);
          if (src < 0 || src >= t_len) continue;
          const double* xrow = px + static_cast<std::size_t>(src) * c_len;
          const double* grow = go + static_cast<std::size_t>(t) * c_len;
          for (int c = 0; c < c_len; ++c) gwrow[c] += grow[c] * xrow[c];
        }
      }
    }
    if (tx.requires_grad()) {
      double* gx = tx.grad();
      const double* pw = tw.data();
      for (int t = 0; t < t_len; ++t) {
        const double* grow = go + static_cast<std::size_t>(t) * c_len;
        for (int k = 0; k < k_len; ++k) {
          const int src = t + d * (k - half);
          if (src < 0 || src >= t_len) continue;
          const double* wrow = pw + static_cast<std::size_t>(k) * c_len;
          double* gxrow = gx + static_cast<std::size_t>(src) * c_len;
          for (int c = 0; c < c_len; ++c) gxrow[c] += grow[c] * wrow[c];
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// PointwiseConv1d

PointwiseConv1d::PointwiseConv1d(int in_channels, int out_channels,
                                 bool with_bias, std::mt19937_64& rng)
    : in_channels_(in_channels), out_channels_(out_channels) {
  const double b = init_bound(in_channels);
  weight_ = Tensor::uniform({out_channels, in_channels}, -b, b, rng,
                            /*requires_grad=*/true);
  if (with_bias) {
    bias_ = Tensor::zeros({out_channels}, /*requires_grad=*/true);
  }
}

std::int64_t PointwiseConv1d::param_count() const {
  std::int64_t n = static_cast<std::int64_t>(in_channels_) * out_channels_;
  if (bias_.defined()) n += out_channels_;
  return n;
}

Tensor PointwiseConv1d::forward(const Tensor& x) const {
  require_channels(x, in_channels_, "pointwise_forward");
  Tensor y = matmul(x, transpose(weight_));
  if (bias_.defined()) y = add(y, bias_);
  return y;
}

// ---------------------------------------------------------------------------
// BatchNorm1d

BatchNorm1d::BatchNorm1d(int channels) : channels_(channels) {
  gamma_ = Tensor::full({channels}, 1.0, /*requires_grad=*/true);
  beta_ = Tensor::zeros({channels}, /*requires_grad=*/true);
  running_mean_ = Tensor::zeros({channels});
  running_var_ = Tensor::full({channels}, 1.0);
}

Tensor BatchNorm1d::forward(const Tensor& x, bool training) {
  require_channels(x, channels_, "batchnorm_forward");
  const int t_len = x.dim(0), c_len = channels_;
  if (training && t_len < 2) {
    throw std::invalid_argument(
        "batchnorm_forward: train mode needs T >= 2 for a defined variance");
  }

  std::vector<double> mean(c_len), var(c_len);
  if (training) {
    for (int c = 0; c < c_len; ++c) mean[c] = 0.0;
    for (int t = 0; t < t_len; ++t)
      for (int c = 0; c < c_len; ++c) mean[c] += x(t, c);
    for (int c = 0; c < c_len; ++c) mean[c] /= t_len;
    for (int t = 0; t < t_len; ++t)
      for (int c = 0; c < c_len; ++c) {
        const double d = x(t, c) - mean[c];
        var[c] += d * d;
      }
    for (int c = 0; c < c_len; ++c) var[c] /= t_len;
    for (int c = 0; c < c_len; ++c) {
      running_mean_(c) = (1.0 - momentum_) * running_mean_(c) +
                         momentum_ * mean[c];
      running_var_(c) = (1.0 - momentum_) * running_var_(c) +
                        momentum_ * var[c];
    }
  } else {
    for (int c = 0; c < c_len; ++c) {
      mean[c] = running_mean_(c);
      var[c] = running_var_(c);
    }
  }

  Tensor out = Tensor::zeros({t_len, c_len});
  std::vector<double> inv_std(c_len);
  for (int c = 0; c < c_len; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps_);
  // xhat is retained for the backward rule.
  auto xhat = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(t_len) * c_len);
  for (int t = 0; t < t_len; ++t)
    for (int c = 0; c < c_len; ++c) {
      const double h = (x(t, c) - mean[c]) * inv_std[c];
      (*xhat)[static_cast<std::size_t>(t) * c_len + c] = h;
      out(t, c) = gamma_(c) * h + beta_(c);
    }

  Tensor tx = x, tg = gamma_, tb = beta_, to = out;
  record_custom_op(
      {x, gamma_, beta_}, out,
      [tx, tg, tb, to, xhat, inv_std, t_len, c_len, training]() mutable {
        const double* go = to.grad();
        const auto& h = *xhat;
        if (tb.requires_grad()) {
          double* gb = tb.grad();
          for (int t = 0; t < t_len; ++t)
            for (int c = 0; c < c_len; ++c)
              gb[c] += go[static_cast<std::size_t>(t) * c_len + c];
        }
        if (tg.requires_grad()) {
          double* gg = tg.grad();
          for (int t = 0; t < t_len; ++t)
            for (int c = 0; c < c_len; ++c) {
              const std::size_t i = static_cast<std::size_t>(t) * c_len + c;
              gg[c] += go[i] * h[i];
            }
        }
        if (tx.requires_grad()) {
          double* gx = tx.grad();
          const double* gamma = tg.data();
          if (training) {
            // Batch statistics depend on x, so the gradient removes the
            // per-channel mean components.
            std::vector<double> m_go(c_len, 0.0), m_goh(c_len, 0.0);
            for (int t = 0; t < t_len; ++t)
              for (int c = 0; c < c_len; ++c) {
                const std::size_t i = static_cast<std::size_t>(t) * c_len + c;
                m_go[c] += go[i];
                m_goh[c] += go[i] * h[i];
              }
            for (int c = 0; c < c_len; ++c) {
              m_go[c] /= t_len;
              m_goh[c] /= t_len;
            }
            for (int t = 0; t < t_len; ++t)
              for (int c = 0; c < c_len; ++c) {
                const std::size_t i = static_cast<std::size_t>(t) * c_len + c;
                gx[i] += gamma[c] * inv_std[c] *
                         (go[i] - m_go[c] - h[i] * m_goh[c]);
              }
          } else {
            for (int t = 0; t < t_len; ++t)
              for (int c = 0; c < c_len; ++c) {
                const std::size_t i = static_cast<std::size_t>(t) * c_len + c;
                gx[i] += gamma[c] * inv_std[c] * go[i];
              }
          }
        }
      });
  return out;
}

// ---------------------------------------------------------------------------
// PlainConv1d

PlainConv1d::PlainConv1d(int in_channels, int out_channels, int kernel_size,
                         int stride, bool with_bias, std::mt19937_64& rng)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_size_(kernel_size),
      stride_(stride) {
  if (kernel_size < 1) throw std::invalid_argument("kernel size must be >= 1");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  const double b =
      init_bound(static_cast<std::int64_t>(in_channels) * kernel_size);
  weight_ = Tensor::uniform({out_channels, in_channels, kernel_size}, -b, b,
                            rng, /*requires_grad=*/true);
  if (with_bias) {
    bias_ = Tensor::zeros({out_channels}, /*requires_grad=*/true);
  }
}

std::int64_t PlainConv1d::param_count() const {
  std::int64_t n = static_cast<std::int64_t>(out_channels_) * in_channels_ *
                   kernel_size_;
  if (bias_.defined()) n += out_channels_;
  return n;
}

Tensor PlainConv1d::forward(const Tensor& x) const {
  require_channels(x, in_channels_, "plain_conv_forward");
  const int t_in = x.dim(0);
  const int t_out = (t_in + stride_ - 1) / stride_;
  const int pad_total =
      std::max((t_out - 1) * stride_ + kernel_size_ - t_in, 0);
  const int pad_left = pad_total / 2;
  const int ci = in_channels_, co = out_channels_, k_len = kernel_size_;
  const int stride = stride_;

  Tensor out = Tensor::zeros({t_out, co});
  const double* px = x.data();
  const double* pw = weight_.data();
  double* po = out.data();
  for (int t = 0; t < t_out; ++t) {
    double* orow = po + static_cast<std::size_t>(t) * co;
    for (int k = 0; k < k_len; ++k) {
      const int src = t * stride + k - pad_left;
      if (src < 0 || src >= t_in) continue;
      const double* xrow = px + static_cast<std::size_t>(src) * ci;
      for (int o = 0; o < co; ++o) {
        const double* wrow =
            pw + (static_cast<std::size_t>(o) * ci) * k_len + k;
        double acc = 0.0;
        for (int c = 0; c < ci; ++c)
          acc += wrow[static_cast<std::size_t>(c) * k_len] * xrow[c];
        orow[o] += acc;
      }
    }
  }
  if (bias_.defined()) {
    for (int t = 0; t < t_out; ++t)
      for (int o = 0; o < co; ++o) out(t, o) += bias_(o);
  }

  std::vector<Tensor> inputs = {x, weight_};
  if (bias_.defined()) inputs.push_back(bias_);
  Tensor tx = x, tw = weight_, tb = bias_, to = out;
  record_custom_op(inputs, out, [tx, tw, tb, to, t_in, t_out, ci, co, k_len,
                                 stride, pad_left]() mutable {
    const double* go = to.grad();
    if (tb.defined() && tb.requires_grad()) {
      double* gb = tb.grad();
      for (int t = 0; t < t_out; ++t)
        for (int o = 0; o < co; ++o)
          gb[o] += go[static_cast<std::size_t>(t) * co + o];
    }
    if (tw.requires_grad()) {
      double* gw = tw.grad();
      const double* px = tx.data();
      for (int t = 0; t < t_out; ++t) {
        const double* grow = go + static_cast<std::size_t>(t) * co;
        for (int k = 0; k < k_len; ++k) {
          const int src = t * stride + k - pad_left;
          if (src < 0 || src >= t_in) continue;
          const double* xrow = px + static_cast<std::size_t>(src) * ci;
          for (int o = 0; o < co; ++o) {
            double* wrow = gw + (static_cast<std::size_t>(o) * ci) * k_len + k;
            const double g = grow[o];
            for (int c = 0; c < ci; ++c)
              wrow[static_cast<std::size_t>(c) * k_len] += g * xrow[c];
          }
        }
      }
    }
    if (tx.requires_grad()) {
      double* gx = tx.grad();
      const double* pw = tw.data();
      for (int t = 0; t < t_out; ++t) {
        const double* grow = go + static_cast<std::size_t>(t) * co;
        for (int k = 0; k < k_len; ++k) {
          const int src = t * stride + k - pad_left;
          if (src < 0 || src >= t_in) continue;
          double* gxrow = gx + static_cast<std::size_t>(src) * ci;
          for (int o = 0; o < co; ++o) {
            const double* wrow =
                pw + (static_cast<std::size_t>(o) * ci) * k_len + k;
            const double g = grow[o];
            for (int c = 0; c < ci; ++c)
              gxrow[c] += g * wrow[static_cast<std::size_t>(c) * k_len];
          }
        }
      }
    }
  });
  return out;
}

}  // namespace mq
