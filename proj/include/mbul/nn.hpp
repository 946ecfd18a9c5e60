// A small neural-network engine: batched tensors, layers with explicit
// forward/backward passes, and the Adam optimiser.
//
// Batches hold n samples in channel-major (CHW) order, one sample per
// column, so convolutions reduce to one im2col plus one GEMM per layer per
// batch. Everything is templated on the scalar type: training runs in
// float, gradient checks in double. All computation is single-threaded and
// deterministic given the weight state and input. Inference passes
// (want_grad = false) write no layer state, so read-only use is safe;
// concurrent callers should own separate network instances.
#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mbul/common.hpp"

namespace mbul {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// n samples of shape c×h×w; column i holds sample i with index ch*(h*w) + p
// where p = y*w + x.
template <typename S>
struct Batch {
  int c = 0, h = 0, w = 0;
  MatX<S> m;

  int n() const { return static_cast<int>(m.cols()); }
  int plane() const { return h * w; }
  static Batch make(int c, int h, int w, int n) {
    Batch b;
    b.c = c;
    b.h = h;
    b.w = w;
    b.m = MatX<S>::Zero(static_cast<long>(c) * h * w, n);
    return b;
  }
};

// A named parameter matrix with its gradient accumulator.
template <typename S>
struct ParamBlob {
  std::string name;
  MatX<S> w;
  MatX<S> g;

  ParamBlob(std::string n, int rows, int cols)
      : name(std::move(n)),
        w(MatX<S>::Zero(rows, cols)),
        g(MatX<S>::Zero(rows, cols)) {}
  void zero_grad() { g.setZero(); }
};

// ---------------------------------------------------------------------------
// Numerically stable scalar activations
// ---------------------------------------------------------------------------

template <typename S>
S sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

template <typename S>
S softplus(S x) {
  return std::max(x, S(0)) + std::log1p(std::exp(-std::abs(x)));
}

// Binary cross-entropy of a {0,1} target against a logit.
template <typename S>
S bce_with_logit(S logit, S target) {
  return std::max(logit, S(0)) - logit * target +
         std::log1p(std::exp(-std::abs(logit)));
}

template <typename S>
S bce_with_logit_grad(S logit, S target) {
  return sigmoid(logit) - target;
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

template <typename S>
struct LayerBase {
  virtual ~LayerBase() = default;
  // want_grad caches whatever backward() needs; inference passes leave the
  // layer untouched.
  virtual Batch<S> forward(const Batch<S>& x, bool want_grad) = 0;
  virtual Batch<S> backward(const Batch<S>& dy) = 0;
  virtual std::vector<ParamBlob<S>*> params() { return {}; }
};

inline int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

template <typename S>
class Conv2D : public LayerBase<S> {
 public:
  Conv2D(std::string name, int in_c, int out_c, int k, int stride, int pad)
      : in_c_(in_c),
        out_c_(out_c),
        k_(k),
        stride_(stride),
        pad_(pad),
        weight_(name + ".w", out_c, in_c * k * k),
        bias_(name + ".b", out_c, 1) {}

  void init_he(Rng& rng) {
    const double std = std::sqrt(2.0 / (in_c_ * k_ * k_));
    for (long i = 0; i < weight_.w.size(); ++i)
      weight_.w.data()[i] = static_cast<S>(rng.normal(0.0, std));
    bias_.w.setZero();
  }

  Batch<S> forward(const Batch<S>& x, bool want_grad) override {
    check(x.c == in_c_, "Conv2D: channel mismatch");
    const int oh = conv_out_extent(x.h, k_, stride_, pad_);
    const int ow = conv_out_extent(x.w, k_, stride_, pad_);
    MatX<S> cols = im2col(x, oh, ow);
    const MatX<S> r = weight_.w * cols;  // out_c × (n· oh·ow)
    Batch<S> y = Batch<S>::make(out_c_, oh, ow, x.n());
    const int p = oh * ow;
    for (int i = 0; i < x.n(); ++i) {
      Eigen::Map<MatX<S>> dst(y.m.col(i).data(), p, out_c_);
      dst = r.middleCols(static_cast<long>(i) * p, p).transpose();
      for (int ch = 0; ch < out_c_; ++ch)
        dst.col(ch).array() += bias_.w(ch, 0);
    }
    if (want_grad) {
      cols_ = std::move(cols);
      in_shape_ = {x.c, x.h, x.w, x.n()};
    }
    return y;
  }

  Batch<S> backward(const Batch<S>& dy) override {
    const int p = dy.plane();
    const int n = dy.n();
    MatX<S> dr(out_c_, static_cast<long>(n) * p);
    for (int i = 0; i < n; ++i) {
      Eigen::Map<const MatX<S>> src(dy.m.col(i).data(), p, out_c_);
      dr.middleCols(static_cast<long>(i) * p, p) = src.transpose();
    }
    weight_.g.noalias() += dr * cols_.transpose();
    bias_.g.col(0) += dr.rowwise().sum();
    const MatX<S> dcols = weight_.w.transpose() * dr;
    return col2im(dcols, dy.h, dy.w);
  }

  std::vector<ParamBlob<S>*> params() override { return {&weight_, &bias_}; }

 private:
  MatX<S> im2col(const Batch<S>& x, int oh, int ow) const {
    const long p = static_cast<long>(oh) * ow;
    MatX<S> cols(in_c_ * k_ * k_, p * x.n());
    const int plane = x.plane();
    for (int i = 0; i < x.n(); ++i) {
      const S* src = x.m.col(i).data();
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          S* dst = cols.col(i * p + oy * ow + ox).data();
          for (int ci = 0; ci < in_c_; ++ci)
            for (int ky = 0; ky < k_; ++ky) {
              const int yy = oy * stride_ + ky - pad_;
              for (int kx = 0; kx < k_; ++kx) {
                const int xx = ox * stride_ + kx - pad_;
                *dst++ = (yy >= 0 && yy < x.h && xx >= 0 && xx < x.w)
                             ? src[ci * plane + yy * x.w + xx]
                             : S(0);
              }
            }
        }
    }
    return cols;
  }

  Batch<S> col2im(const MatX<S>& dcols, int oh, int ow) const {
    const auto [c, h, w, n] = in_shape_;
    Batch<S> dx = Batch<S>::make(c, h, w, n);
    const long p = static_cast<long>(oh) * ow;
    const int plane = h * w;
    for (int i = 0; i < n; ++i) {
      S* dst = dx.m.col(i).data();
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const S* src = dcols.col(i * p + oy * ow + ox).data();
          for (int ci = 0; ci < c; ++ci)
            for (int ky = 0; ky < k_; ++ky) {
              const int yy = oy * stride_ + ky - pad_;
              for (int kx = 0; kx < k_; ++kx) {
                const int xx = ox * stride_ + kx - pad_;
                if (yy >= 0 && yy < h && xx >= 0 && xx < w)
                  dst[ci * plane + yy * w + xx] += *src;
                ++src;
              }
            }
        }
    }
    return dx;
  }

  int in_c_, out_c_, k_, stride_, pad_;
  ParamBlob<S> weight_, bias_;
  MatX<S> cols_;
  std::tuple<int, int, int, int> in_shape_;
};

// One k×k filter per channel (depthwise convolution).
template <typename S>
class DepthwiseConv2D : public LayerBase<S> {
 public:
  DepthwiseConv2D(std::string name, int c, int k, int stride, int pad)
      : c_(c),
        k_(k),
        stride_(stride),
        pad_(pad),
        weight_(name + ".w", c, k * k),
        bias_(name + ".b", c, 1) {}

  void init_he(Rng& rng) {
    const double std = std::sqrt(2.0 / (k_ * k_));
    for (long i = 0; i < weight_.w.size(); ++i)
      weight_.w.data()[i] = static_cast<S>(rng.normal(0.0, std));
    bias_.w.setZero();
  }

  Batch<S> forward(const Batch<S>& x, bool want_grad) override {
    check(x.c == c_, "DepthwiseConv2D: channel mismatch");
    const int oh = conv_out_extent(x.h, k_, stride_, pad_);
    const int ow = conv_out_extent(x.w, k_, stride_, pad_);
    Batch<S> y = Batch<S>::make(c_, oh, ow, x.n());
    const int in_plane = x.plane(), out_plane = oh * ow;
    for (int i = 0; i < x.n(); ++i) {
      const S* src = x.m.col(i).data();
      S* dst = y.m.col(i).data();
      for (int ch = 0; ch < c_; ++ch)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            S acc = bias_.w(ch, 0);
            for (int ky = 0; ky < k_; ++ky) {
              const int yy = oy * stride_ + ky - pad_;
              if (yy < 0 || yy >= x.h) continue;
              for (int kx = 0; kx < k_; ++kx) {
                const int xx = ox * stride_ + kx - pad_;
                if (xx < 0 || xx >= x.w) continue;
                acc += weight_.w(ch, ky * k_ + kx) *
                       src[ch * in_plane + yy * x.w + xx];
              }
            }
            dst[ch * out_plane + oy * ow + ox] = acc;
          }
    }
    if (want_grad) {
      x_ = x;
      out_h_ = oh;
      out_w_ = ow;
    }
    return y;
  }

  Batch<S> backward(const Batch<S>& dy) override {
    Batch<S> dx = Batch<S>::make(x_.c, x_.h, x_.w, x_.n());
    const int in_plane = x_.plane(), out_plane = out_h_ * out_w_;
    for (int i = 0; i < x_.n(); ++i) {
      const S* src = x_.m.col(i).data();
      const S* dyp = dy.m.col(i).data();
      S* dxp = dx.m.col(i).data();
      for (int ch = 0; ch < c_; ++ch)
        for (int oy = 0; oy < out_h_; ++oy)
          for (int ox = 0; ox < out_w_; ++ox) {
            const S g = dyp[ch * out_plane + oy * out_w_ + ox];
            bias_.g(ch, 0) += g;
            for (int ky = 0; ky < k_; ++ky) {
              const int yy = oy * stride_ + ky - pad_;
              if (yy < 0 || yy >= x_.h) continue;
              for (int kx = 0; kx < k_; ++kx) {
                const int xx = ox * stride_ + kx - pad_;
                if (xx < 0 || xx >= x_.w) continue;
                weight_.g(ch, ky * k_ + kx) +=
                    g * src[ch * in_plane + yy * x_.w + xx];
                dxp[ch * in_plane + yy * x_.w + xx] +=
                    g * weight_.w(ch, ky * k_ + kx);
              }
            }
          }
    }
    return dx;
  }

  std::vector<ParamBlob<S>*> params() override { return {&weight_, &bias_}; }

 private:
  int c_, k_, stride_, pad_;
  ParamBlob<S> weight_, bias_;
  Batch<S> x_;
  int out_h_ = 0, out_w_ = 0;
};

template <typename S>
class ReLU : public LayerBase<S> {
 public:
  Batch<S> forward(const Batch<S>& x, bool want_grad) override {
    Batch<S> y = x;
    y.m = y.m.cwiseMax(S(0));
    if (want_grad) mask_ = (x.m.array() > S(0)).template cast<S>();
    return y;
  }
  Batch<S> backward(const Batch<S>& dy) override {
    Batch<S> dx = dy;
    dx.m.array() *= mask_.array();
    return dx;
  }

 private:
  MatX<S> mask_;
};

template <typename S>
class Dense : public LayerBase<S> {
 public:
  Dense(std::string name, int in, int out)
      : in_(in),
        out_(out),
        weight_(name + ".w", out, in),
        bias_(name + ".b", out, 1) {}

  void init_he(Rng& rng) {
    const double std = std::sqrt(2.0 / in_);
    for (long i = 0; i < weight_.w.size(); ++i)
      weight_.w.data()[i] = static_cast<S>(rng.normal(0.0, std));
    bias_.w.setZero();
  }

  Batch<S> forward(const Batch<S>& x, bool want_grad) override {
    check(x.c == in_ && x.h == 1 && x.w == 1, "Dense: shape mismatch");
    Batch<S> y;
    y.c = out_;
    y.h = y.w = 1;
    y.m = weight_.w * x.m;
    y.m.colwise() += bias_.w.col(0);
    if (want_grad) x_ = x.m;
    return y;
  }

  Batch<S> backward(const Batch<S>& dy) override {
    weight_.g.noalias() += dy.m * x_.transpose();
    bias_.g.col(0) += dy.m.rowwise().sum();
    Batch<S> dx;
    dx.c = in_;
    dx.h = dx.w = 1;
    dx.m = weight_.w.transpose() * dy.m;
    return dx;
  }

  std::vector<ParamBlob<S>*> params() override { return {&weight_, &bias_}; }

 private:
  int in_, out_;
  ParamBlob<S> weight_, bias_;
  MatX<S> x_;
};

template <typename S>
class GlobalAvgPool : public LayerBase<S> {
 public:
  Batch<S> forward(const Batch<S>& x, bool want_grad) override {
    Batch<S> y;
    y.c = x.c;
    y.h = y.w = 1;
    y.m.resize(x.c, x.n());
    const int p = x.plane();
    for (int i = 0; i < x.n(); ++i) {
      Eigen::Map<const MatX<S>> planes(x.m.col(i).data(), p, x.c);
      y.m.col(i) = planes.colwise().mean().transpose();
    }
    if (want_grad) in_shape_ = {x.c, x.h, x.w};
    return y;
  }
  Batch<S> backward(const Batch<S>& dy) override {
    const auto [c, h, w] = in_shape_;
    Batch<S> dx = Batch<S>::make(c, h, w, dy.n());
    const int p = h * w;
    const S scale = S(1) / static_cast<S>(p);
    for (int i = 0; i < dy.n(); ++i) {
      Eigen::Map<MatX<S>> planes(dx.m.col(i).data(), p, c);
      planes = (dy.m.col(i) * scale).transpose().replicate(p, 1);
    }
    return dx;
  }

 private:
  std::tuple<int, int, int> in_shape_;
};

// Softmax over a single-channel map followed by the expectation of the cell
// centre coordinates, both normalised to [-0.5, 0.5]. Output channel 0 is
// the horizontal coordinate, channel 1 the vertical one.
template <typename S>
class SoftArgmax2D : public LayerBase<S> {
 public:
  Batch<S> forward(const Batch<S>& x, bool want_grad) override {
    check(x.c == 1, "SoftArgmax2D: expected one channel");
    const int p = x.plane();
    if (gu_.size() != p) build_grids(x.h, x.w);
    MatX<S> prob(p, x.n());
    Batch<S> y;
    y.c = 2;
    y.h = y.w = 1;
    y.m.resize(2, x.n());
    for (int i = 0; i < x.n(); ++i) {
      VecX<S> z = x.m.col(i);
      z.array() -= z.maxCoeff();
      VecX<S> e = z.array().exp();
      prob.col(i) = e / e.sum();
      y.m(0, i) = gu_.dot(prob.col(i));
      y.m(1, i) = gv_.dot(prob.col(i));
    }
    if (want_grad) {
      prob_ = std::move(prob);
      out_ = y.m;
      in_shape_ = {x.h, x.w};
    }
    return y;
  }

  Batch<S> backward(const Batch<S>& dy) override {
    const auto [h, w] = in_shape_;
    Batch<S> dx = Batch<S>::make(1, h, w, dy.n());
    for (int i = 0; i < dy.n(); ++i) {
      const S du = dy.m(0, i), dv = dy.m(1, i);
      dx.m.col(i) = (prob_.col(i).array() *
                     ((gu_.array() - out_(0, i)) * du +
                      (gv_.array() - out_(1, i)) * dv))
                        .matrix();
    }
    return dx;
  }

 private:
  void build_grids(int h, int w) {
    gu_.resize(h * w);
    gv_.resize(h * w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        gu_(y * w + x) = static_cast<S>((x + 0.5) / w - 0.5);
        gv_(y * w + x) = static_cast<S>((y + 0.5) / h - 0.5);
      }
  }

  VecX<S> gu_, gv_;
  MatX<S> prob_;
  MatX<S> out_;
  std::tuple<int, int> in_shape_;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <typename S>
class Adam {
 public:
  explicit Adam(std::vector<ParamBlob<S>*> params, double lr,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (const auto* p : params_) {
      m_.push_back(MatX<S>::Zero(p->w.rows(), p->w.cols()));
      v_.push_back(MatX<S>::Zero(p->w.rows(), p->w.cols()));
    }
  }

  void step() {
    ++t_;
    const S c1 = static_cast<S>(1.0 - std::pow(b1_, t_));
    const S c2 = static_cast<S>(1.0 - std::pow(b2_, t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      m_[i] = static_cast<S>(b1_) * m_[i] + static_cast<S>(1 - b1_) * p.g;
      v_[i] = static_cast<S>(b2_) * v_[i] +
              static_cast<S>(1 - b2_) * p.g.cwiseProduct(p.g);
      p.w.array() -= static_cast<S>(lr_) * (m_[i].array() / c1) /
                     ((v_[i].array() / c2).sqrt() + static_cast<S>(eps_));
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

 private:
  std::vector<ParamBlob<S>*> params_;
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<MatX<S>> m_, v_;
};

}  // namespace mbul
