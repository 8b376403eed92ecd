#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "pushgrasp/nn/tensor.hpp"

namespace pushgrasp::nn {

enum class Mode { inference, train };

template <typename Scalar>
class Conv2d {
 public:
  struct Cache {
    Matrix<Scalar> cols;
    int n = 0, c = 0, h = 0, w = 0;
  };

  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad)
      : weight(Matrix<Scalar>::Zero(out_channels, in_channels * kernel * kernel)),
        weight_grad(Matrix<Scalar>::Zero(out_channels, in_channels * kernel * kernel)),
        bias(Vector<Scalar>::Zero(out_channels)),
        bias_grad(Vector<Scalar>::Zero(out_channels)),
        in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), pad_(pad) {}

  // He-normal initialization (fan-in, ReLU gain).
  void init(std::mt19937_64& rng) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(weight.cols()));
    std::normal_distribution<double> dist(0.0, stddev);
    for (Eigen::Index i = 0; i < weight.size(); ++i) {
      weight.data()[i] = static_cast<Scalar>(dist(rng));
    }
    bias.setZero();
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int output_size(int size) const { return (size + 2 * pad_ - kernel_) / stride_ + 1; }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x, Cache* cache) const {
    const int ho = output_size(x.h);
    const int wo = output_size(x.w);
    Matrix<Scalar> cols = im2col(x, ho, wo);
    FeatureMap<Scalar> y;
    y.n = x.n;
    y.c = out_;
    y.h = ho;
    y.w = wo;
    y.data.noalias() = weight * cols;
    y.data.colwise() += bias;
    if (cache != nullptr) {
      cache->cols = std::move(cols);
      cache->n = x.n;
      cache->c = x.c;
      cache->h = x.h;
      cache->w = x.w;
    }
    return y;
  }

  // Accumulates parameter gradients and returns the input gradient.
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy, const Cache& cache,
                              bool need_input = true) {
    weight_grad.noalias() += dy.data * cache.cols.transpose();
    bias_grad += dy.data.rowwise().sum();
    if (!need_input) return {};
    const Matrix<Scalar> dcols = weight.transpose() * dy.data;
    return col2im(dcols, cache, dy.h, dy.w);
  }

  void collect(std::vector<ParamRef<Scalar>>& params, const std::string& prefix) {
    params.push_back({prefix + ".weight", weight.data(), weight_grad.data(), weight.size()});
    params.push_back({prefix + ".bias", bias.data(), bias_grad.data(), bias.size()});
  }

  Matrix<Scalar> weight;
  Matrix<Scalar> weight_grad;
  Vector<Scalar> bias;
  Vector<Scalar> bias_grad;

 private:
  bool pointwise() const { return kernel_ == 1 && stride_ == 1 && pad_ == 0; }

  Matrix<Scalar> im2col(const FeatureMap<Scalar>& x, int ho, int wo) const {
    if (pointwise()) return x.data;
    const int k = kernel_;
    Matrix<Scalar> cols = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(x.c) * k * k,
                                               static_cast<Eigen::Index>(x.n) * ho * wo);
    for (int img = 0; img < x.n; ++img) {
      for (int ch = 0; ch < x.c; ++ch) {
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            Scalar* row = cols.row((ch * k + ky) * k + kx).data() +
                          static_cast<Eigen::Index>(img) * ho * wo;
            for (int oy = 0; oy < ho; ++oy) {
              const int iy = oy * stride_ - pad_ + ky;
              if (iy < 0 || iy >= x.h) continue;
              for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox * stride_ - pad_ + kx;
                if (ix < 0 || ix >= x.w) continue;
                row[oy * wo + ox] = x.at(img, ch, iy, ix);
              }
            }
          }
        }
      }
    }
    return cols;
  }

  FeatureMap<Scalar> col2im(const Matrix<Scalar>& dcols, const Cache& cache, int ho,
                            int wo) const {
    FeatureMap<Scalar> dx(cache.n, cache.c, cache.h, cache.w);
    if (pointwise()) {
      dx.data = dcols;
      return dx;
    }
    const int k = kernel_;
    for (int img = 0; img < cache.n; ++img) {
      for (int ch = 0; ch < cache.c; ++ch) {
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const Scalar* row = dcols.row((ch * k + ky) * k + kx).data() +
                                static_cast<Eigen::Index>(img) * ho * wo;
            for (int oy = 0; oy < ho; ++oy) {
              const int iy = oy * stride_ - pad_ + ky;
              if (iy < 0 || iy >= cache.h) continue;
              for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox * stride_ - pad_ + kx;
                if (ix < 0 || ix >= cache.w) continue;
                dx.at(img, ch, iy, ix) += row[oy * wo + ox];
              }
            }
          }
        }
      }
    }
    return dx;
  }

  int in_ = 0;
  int out_ = 0;
  int kernel_ = 1;
  int stride_ = 1;
  int pad_ = 0;
};

// Per-channel batch normalization over all images and pixels of the batch.
// Inference uses running statistics; training uses batch statistics.
template <typename Scalar>
class BatchNorm {
 public:
  struct Cache {
    Matrix<Scalar> x_hat;
    Vector<Scalar> inv_std;
    Vector<Scalar> mean;
    Vector<Scalar> var;
    Eigen::Index count = 0;
  };

  BatchNorm() = default;
  explicit BatchNorm(int channels)
      : gamma(Vector<Scalar>::Ones(channels)), beta(Vector<Scalar>::Zero(channels)),
        gamma_grad(Vector<Scalar>::Zero(channels)), beta_grad(Vector<Scalar>::Zero(channels)),
        running_mean(Vector<Scalar>::Zero(channels)),
        running_var(Vector<Scalar>::Ones(channels)) {}

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x, Mode mode, Cache* cache) const {
    FeatureMap<Scalar> y = x;
    if (mode == Mode::inference) {
      const Vector<Scalar> inv = (running_var.array() + eps).rsqrt().matrix();
      const Vector<Scalar> scale = gamma.cwiseProduct(inv);
      const Vector<Scalar> shift = beta - running_mean.cwiseProduct(scale);
      y.data = (x.data.array().colwise() * scale.array()).colwise() + shift.array();
      return y;
    }
    const Eigen::Index count = x.data.cols();
    const Vector<Scalar> mean = x.data.rowwise().mean();
    const Matrix<Scalar> centered = x.data.colwise() - mean;
    const Vector<Scalar> var = centered.array().square().rowwise().mean();
    const Vector<Scalar> inv_std = (var.array() + eps).rsqrt().matrix();
    Matrix<Scalar> x_hat = centered.array().colwise() * inv_std.array();
    y.data = (x_hat.array().colwise() * gamma.array()).colwise() + beta.array();
    if (cache != nullptr) {
      cache->x_hat = std::move(x_hat);
      cache->inv_std = inv_std;
      cache->mean = mean;
      cache->var = var;
      cache->count = count;
    }
    return y;
  }

  void update_running(const Cache& cache) {
    const Scalar n = static_cast<Scalar>(cache.count);
    const Scalar unbias = cache.count > 1 ? n / (n - 1) : Scalar(1);
    running_mean = (1 - momentum) * running_mean + momentum * cache.mean;
    running_var = (1 - momentum) * running_var + momentum * unbias * cache.var;
  }

  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy, const Cache& cache) {
    gamma_grad += dy.data.cwiseProduct(cache.x_hat).rowwise().sum();
    beta_grad += dy.data.rowwise().sum();
    const Scalar n = static_cast<Scalar>(cache.count);
    const Vector<Scalar> sum_dy = dy.data.rowwise().sum();
    const Vector<Scalar> sum_dy_xhat = dy.data.cwiseProduct(cache.x_hat).rowwise().sum();
    FeatureMap<Scalar> dx = dy;
    const Vector<Scalar> scale = gamma.cwiseProduct(cache.inv_std) / n;
    dx.data = ((dy.data * n).colwise() - sum_dy -
               (cache.x_hat.array().colwise() * sum_dy_xhat.array()).matrix())
                  .array()
                  .colwise() *
              scale.array();
    return dx;
  }

  void collect(std::vector<ParamRef<Scalar>>& params, std::vector<ParamRef<Scalar>>& buffers,
               const std::string& prefix) {
    params.push_back({prefix + ".gamma", gamma.data(), gamma_grad.data(), gamma.size()});
    params.push_back({prefix + ".beta", beta.data(), beta_grad.data(), beta.size()});
    buffers.push_back({prefix + ".running_mean", running_mean.data(), nullptr, running_mean.size()});
    buffers.push_back({prefix + ".running_var", running_var.data(), nullptr, running_var.size()});
  }

  Vector<Scalar> gamma;
  Vector<Scalar> beta;
  Vector<Scalar> gamma_grad;
  Vector<Scalar> beta_grad;
  Vector<Scalar> running_mean;
  Vector<Scalar> running_var;
  Scalar momentum = Scalar(0.1);
  Scalar eps = Scalar(1e-5);
};

template <typename Scalar>
FeatureMap<Scalar> relu(const FeatureMap<Scalar>& x) {
  FeatureMap<Scalar> y = x;
  y.data = x.data.cwiseMax(Scalar(0));
  return y;
}

// Gradient of relu given its output.
template <typename Scalar>
FeatureMap<Scalar> relu_backward(const FeatureMap<Scalar>& dy, const FeatureMap<Scalar>& y) {
  FeatureMap<Scalar> dx = dy;
  dx.data = (y.data.array() > Scalar(0)).select(dy.data, Scalar(0));
  return dx;
}

// Bilinear resize with half-pixel centers (align_corners = false), a fixed
// linear map from an h x w grid to an H x W grid.
template <typename Scalar>
class BilinearUpsample {
 public:
  BilinearUpsample() = default;
  BilinearUpsample(int in_h, int in_w, int out_h, int out_w)
      : in_h_(in_h), in_w_(in_w), out_h_(out_h), out_w_(out_w),
        ys_(axis(in_h, out_h)), xs_(axis(in_w, out_w)) {}

  int out_h() const { return out_h_; }
  int out_w() const { return out_w_; }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) const {
    FeatureMap<Scalar> y(x.n, x.c, out_h_, out_w_);
    for (int img = 0; img < x.n; ++img) {
      for (int ch = 0; ch < x.c; ++ch) {
        for (int oy = 0; oy < out_h_; ++oy) {
          const Tap& ty = ys_[static_cast<std::size_t>(oy)];
          for (int ox = 0; ox < out_w_; ++ox) {
            const Tap& tx = xs_[static_cast<std::size_t>(ox)];
            y.at(img, ch, oy, ox) =
                (1 - ty.f) * ((1 - tx.f) * x.at(img, ch, ty.i0, tx.i0) + tx.f * x.at(img, ch, ty.i0, tx.i1)) +
                ty.f * ((1 - tx.f) * x.at(img, ch, ty.i1, tx.i0) + tx.f * x.at(img, ch, ty.i1, tx.i1));
          }
        }
      }
    }
    return y;
  }

  // Value at a single output pixel of image `img`, channel 0.
  Scalar sample(const FeatureMap<Scalar>& x, int img, int oy, int ox) const {
    const Tap& ty = ys_[static_cast<std::size_t>(oy)];
    const Tap& tx = xs_[static_cast<std::size_t>(ox)];
    return (1 - ty.f) * ((1 - tx.f) * x.at(img, 0, ty.i0, tx.i0) + tx.f * x.at(img, 0, ty.i0, tx.i1)) +
           ty.f * ((1 - tx.f) * x.at(img, 0, ty.i1, tx.i0) + tx.f * x.at(img, 0, ty.i1, tx.i1));
  }

  // Gradient w.r.t. the input for an upstream gradient `g` at one output
  // pixel of image `img`, channel 0.
  void scatter(FeatureMap<Scalar>& dx, int img, int oy, int ox, Scalar g) const {
    const Tap& ty = ys_[static_cast<std::size_t>(oy)];
    const Tap& tx = xs_[static_cast<std::size_t>(ox)];
    dx.at(img, 0, ty.i0, tx.i0) += g * (1 - ty.f) * (1 - tx.f);
    dx.at(img, 0, ty.i0, tx.i1) += g * (1 - ty.f) * tx.f;
    dx.at(img, 0, ty.i1, tx.i0) += g * ty.f * (1 - tx.f);
    dx.at(img, 0, ty.i1, tx.i1) += g * ty.f * tx.f;
  }

 private:
  struct Tap {
    int i0 = 0;
    int i1 = 0;
    Scalar f = 0;
  };

  static std::vector<Tap> axis(int in, int out) {
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      const double src = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
      const int i0 = static_cast<int>(std::floor(src));
      Tap& t = taps[static_cast<std::size_t>(o)];
      t.i0 = i0;
      t.i1 = std::min(i0 + 1, in - 1);
      t.f = static_cast<Scalar>(src - i0);
    }
    return taps;
  }

  int in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
  std::vector<Tap> ys_;
  std::vector<Tap> xs_;
};

}  // namespace pushgrasp::nn
