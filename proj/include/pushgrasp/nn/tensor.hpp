#pragma once

#include <cassert>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pushgrasp::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// A batch of n feature maps with c channels of size h x w, stored as a
// c x (n * h * w) matrix: each row is one channel, images laid out back to
// back along the columns.
template <typename Scalar>
struct FeatureMap {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  Matrix<Scalar> data;

  FeatureMap() = default;
  FeatureMap(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(Matrix<Scalar>::Zero(c_, n_ * h_ * w_)) {}

  int plane() const { return h * w; }
  Scalar& at(int img, int ch, int y, int x) { return data(ch, img * plane() + y * w + x); }
  Scalar at(int img, int ch, int y, int x) const { return data(ch, img * plane() + y * w + x); }
};

template <typename Scalar>
FeatureMap<Scalar> concat_channels(const std::vector<const FeatureMap<Scalar>*>& parts) {
  assert(!parts.empty());
  int channels = 0;
  for (const auto* p : parts) channels += p->c;
  FeatureMap<Scalar> out(parts.front()->n, channels, parts.front()->h, parts.front()->w);
  int row = 0;
  for (const auto* p : parts) {
    out.data.middleRows(row, p->c) = p->data;
    row += p->c;
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> slice_channels(const FeatureMap<Scalar>& x, int first, int count) {
  FeatureMap<Scalar> out;
  out.n = x.n;
  out.c = count;
  out.h = x.h;
  out.w = x.w;
  out.data = x.data.middleRows(first, count);
  return out;
}

// View of one learnable (or persistent) tensor: value and gradient storage.
template <typename Scalar>
struct ParamRef {
  std::string name;
  Scalar* value = nullptr;
  Scalar* grad = nullptr;  // null for non-learnable buffers (running stats)
  Eigen::Index size = 0;

  Eigen::Map<Vector<Scalar>> values() const { return {value, size}; }
  Eigen::Map<Vector<Scalar>> grads() const { return {grad, size}; }
};

}  // namespace pushgrasp::nn
