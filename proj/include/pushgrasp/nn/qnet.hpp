#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "pushgrasp/network_config.hpp"
#include "pushgrasp/nn/layers.hpp"
#include "pushgrasp/perception.hpp"

namespace pushgrasp::nn {

// The three tower inputs for a batch of rotated views: color, depth replicated
// to three channels, goal mask replicated to three channels.
template <typename Scalar>
struct TowerInputs {
  FeatureMap<Scalar> color;
  FeatureMap<Scalar> depth;
  FeatureMap<Scalar> mask;
  int n() const { return color.n; }
};

template <typename Scalar>
TowerInputs<Scalar> make_inputs(const std::vector<const RotatedView*>& views) {
  const int n = static_cast<int>(views.size());
  const int h = static_cast<int>(views.front()->depth.rows());
  const int w = static_cast<int>(views.front()->depth.cols());
  TowerInputs<Scalar> in{FeatureMap<Scalar>(n, 3, h, w), FeatureMap<Scalar>(n, 3, h, w),
                         FeatureMap<Scalar>(n, 3, h, w)};
  const int plane = h * w;
  for (int i = 0; i < n; ++i) {
    const RotatedView& v = *views[static_cast<std::size_t>(i)];
    if (v.depth.rows() != h || v.depth.cols() != w) {
      throw ConfigError("rotated views in one batch must share a resolution");
    }
    for (int c = 0; c < 3; ++c) {
      for (int p = 0; p < plane; ++p) {
        in.color.data(c, i * plane + p) = static_cast<Scalar>(v.color[c].data()[p]);
        in.depth.data(c, i * plane + p) = static_cast<Scalar>(v.depth.data()[p]);
        in.mask.data(c, i * plane + p) = static_cast<Scalar>(v.goal_mask.data()[p]);
      }
    }
  }
  return in;
}

// Strided conv stages followed by densely connected conv blocks. Every block
// is conv3x3 -> batch norm -> ReLU.
template <typename Scalar>
class Tower {
 public:
  struct BlockTape {
    typename Conv2d<Scalar>::Cache conv;
    typename BatchNorm<Scalar>::Cache bn;
    FeatureMap<Scalar> out;
  };
  struct Tape {
    std::vector<BlockTape> blocks;
  };

  Tower() = default;
  Tower(int in_channels, const std::vector<int>& widths, int downsample)
      : downsample_(downsample) {
    int channels = in_channels;
    int dense_channels = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const bool strided = static_cast<int>(i) < downsample;
      int block_in = channels;
      if (!strided) {
        if (dense_channels == 0) {
          dense_channels = channels;
          stage_channels_ = channels;
        }
        block_in = dense_channels;
      }
      convs_.emplace_back(block_in, widths[i], 3, strided ? 2 : 1, 1);
      bns_.emplace_back(widths[i]);
      channels = widths[i];
      if (!strided) dense_channels += widths[i];
    }
    out_channels_ = dense_channels == 0 ? channels : dense_channels;
  }

  int out_channels() const { return out_channels_; }
  int output_size(int size) const {
    for (const auto& c : convs_) size = c.output_size(size);
    return size;
  }

  void init(std::mt19937_64& rng) {
    for (auto& c : convs_) c.init(rng);
  }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x, Mode mode, Tape* tape) const {
    if (tape != nullptr) tape->blocks.assign(convs_.size(), {});
    std::vector<FeatureMap<Scalar>> dense;  // features at the final resolution
    FeatureMap<Scalar> cur = x;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      const bool strided = static_cast<int>(i) < downsample_;
      if (!strided && dense.empty()) dense.push_back(cur);
      const FeatureMap<Scalar> in = strided ? cur : concat(dense);
      BlockTape* bt = tape != nullptr ? &tape->blocks[i] : nullptr;
      FeatureMap<Scalar> y = convs_[i].forward(in, bt != nullptr ? &bt->conv : nullptr);
      y = bns_[i].forward(y, mode, bt != nullptr ? &bt->bn : nullptr);
      y = relu(y);
      if (bt != nullptr) bt->out = y;
      if (strided) {
        cur = std::move(y);
      } else {
        dense.push_back(std::move(y));
      }
    }
    return dense.empty() ? cur : concat(dense);
  }

  void commit_running_stats(const Tape& tape) {
    for (std::size_t i = 0; i < bns_.size(); ++i) bns_[i].update_running(tape.blocks[i].bn);
  }

  // Accumulates parameter gradients. The input gradient is not needed (the
  // towers read images) and is not computed past the first block.
  void backward(const FeatureMap<Scalar>& dout, const Tape& tape) {
    const int blocks = static_cast<int>(convs_.size());
    const int first_dense = std::min(downsample_, blocks);
    // Gradients of the dense feature list: entry 0 is the stage input, entry
    // j >= 1 the output of block first_dense + j - 1.
    std::vector<FeatureMap<Scalar>> grads;
    FeatureMap<Scalar> dcur;
    if (first_dense < blocks) {
      int row = 0;
      const int count = blocks - first_dense + 1;
      grads.resize(static_cast<std::size_t>(count));
      for (int j = 0; j < count; ++j) {
        const int c = j == 0 ? dense_input_channels() : convs_[static_cast<std::size_t>(first_dense + j - 1)].out_channels();
        grads[static_cast<std::size_t>(j)] = slice_channels(dout, row, c);
        row += c;
      }
      for (int i = blocks - 1; i >= first_dense; --i) {
        const int j = i - first_dense + 1;
        const FeatureMap<Scalar> din = block_backward(i, grads[static_cast<std::size_t>(j)], tape, true);
        int row_in = 0;
        for (int q = 0; q < j; ++q) {
          auto& g = grads[static_cast<std::size_t>(q)];
          g.data += din.data.middleRows(row_in, g.c);
          row_in += g.c;
        }
      }
      dcur = std::move(grads[0]);
    } else {
      dcur = dout;
    }
    for (int i = first_dense - 1; i >= 0; --i) {
      dcur = block_backward(i, dcur, tape, i > 0);
    }
  }

  void collect(std::vector<ParamRef<Scalar>>& params, std::vector<ParamRef<Scalar>>& buffers,
               const std::string& prefix) {
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      const std::string p = prefix + ".block" + std::to_string(i);
      convs_[i].collect(params, p + ".conv");
      bns_[i].collect(params, buffers, p + ".bn");
    }
  }

 private:
  static FeatureMap<Scalar> concat(const std::vector<FeatureMap<Scalar>>& parts) {
    if (parts.size() == 1) return parts.front();
    std::vector<const FeatureMap<Scalar>*> ptrs;
    for (const auto& p : parts) ptrs.push_back(&p);
    return concat_channels(ptrs);
  }

  int dense_input_channels() const { return stage_channels_; }

  FeatureMap<Scalar> block_backward(int i, const FeatureMap<Scalar>& dy, const Tape& tape,
                                    bool need_input) {
    const BlockTape& bt = tape.blocks[static_cast<std::size_t>(i)];
    FeatureMap<Scalar> g = relu_backward(dy, bt.out);
    g = bns_[static_cast<std::size_t>(i)].backward(g, bt.bn);
    return convs_[static_cast<std::size_t>(i)].backward(g, bt.conv, need_input);
  }

  int downsample_ = 0;
  int out_channels_ = 0;
  int stage_channels_ = 0;
  std::vector<Conv2d<Scalar>> convs_;
  std::vector<BatchNorm<Scalar>> bns_;
};

// Pixel-wise Q-value network: three towers, concatenated features, two
// (batch norm, ReLU, 1x1 conv) stages and a bilinear upsampling back to the
// input resolution. One image of the batch is one rotated view.
template <typename Scalar>
class QNetwork {
 public:
  struct Tape {
    std::array<typename Tower<Scalar>::Tape, 3> towers;
    typename BatchNorm<Scalar>::Cache bn1;
    FeatureMap<Scalar> relu1;
    typename Conv2d<Scalar>::Cache conv1;
    typename BatchNorm<Scalar>::Cache bn2;
    FeatureMap<Scalar> relu2;
    typename Conv2d<Scalar>::Cache conv2;
  };

  QNetwork() = default;
  QNetwork(const NetworkConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    for (auto& t : towers_) t = Tower<Scalar>(3, cfg.tower_width, cfg.tower_depth);
    const int features = 3 * towers_[0].out_channels();
    bn1_ = BatchNorm<Scalar>(features);
    conv1_ = Conv2d<Scalar>(features, cfg.head_channels, 1, 1, 0);
    bn2_ = BatchNorm<Scalar>(cfg.head_channels);
    conv2_ = Conv2d<Scalar>(cfg.head_channels, 1, 1, 1, 0);
    feature_size_ = towers_[0].output_size(cfg.resolution);
    upsample_ = BilinearUpsample<Scalar>(feature_size_, feature_size_, cfg.resolution,
                                         cfg.resolution);
    std::mt19937_64 rng(seed);
    for (auto& t : towers_) t.init(rng);
    conv1_.init(rng);
    conv2_.init(rng);
  }

  const NetworkConfig& config() const { return cfg_; }
  int feature_size() const { return feature_size_; }
  const BilinearUpsample<Scalar>& upsampler() const { return upsample_; }

  // Low-resolution Q map (n x 1 x f x f). `tape` is required in train mode.
  FeatureMap<Scalar> forward_features(const TowerInputs<Scalar>& in, Mode mode,
                                      Tape* tape) const {
    check_input(in.color);
    check_input(in.depth);
    check_input(in.mask);
    const FeatureMap<Scalar>* sources[3] = {&in.color, &in.depth, &in.mask};
    std::array<FeatureMap<Scalar>, 3> outs;
    for (int t = 0; t < 3; ++t) {
      outs[static_cast<std::size_t>(t)] = towers_[static_cast<std::size_t>(t)].forward(
          *sources[t], mode, tape != nullptr ? &tape->towers[static_cast<std::size_t>(t)] : nullptr);
    }
    FeatureMap<Scalar> x = concat_channels<Scalar>({&outs[0], &outs[1], &outs[2]});
    x = bn1_.forward(x, mode, tape != nullptr ? &tape->bn1 : nullptr);
    x = relu(x);
    if (tape != nullptr) tape->relu1 = x;
    x = conv1_.forward(x, tape != nullptr ? &tape->conv1 : nullptr);
    x = bn2_.forward(x, mode, tape != nullptr ? &tape->bn2 : nullptr);
    x = relu(x);
    if (tape != nullptr) tape->relu2 = x;
    return conv2_.forward(x, tape != nullptr ? &tape->conv2 : nullptr);
  }

  // Full-resolution Q maps (n x 1 x H x W), inference mode.
  FeatureMap<Scalar> forward(const TowerInputs<Scalar>& in) const {
    return upsample_.forward(forward_features(in, Mode::inference, nullptr));
  }

  void commit_running_stats(const Tape& tape) {
    for (int t = 0; t < 3; ++t) {
      towers_[static_cast<std::size_t>(t)].commit_running_stats(tape.towers[static_cast<std::size_t>(t)]);
    }
    bn1_.update_running(tape.bn1);
    bn2_.update_running(tape.bn2);
  }

  // Backpropagates a gradient on the low-resolution output, accumulating into
  // the parameter gradients.
  void backward(const FeatureMap<Scalar>& dlow, const Tape& tape) {
    FeatureMap<Scalar> g = conv2_.backward(dlow, tape.conv2, true);
    g = relu_backward(g, tape.relu2);
    g = bn2_.backward(g, tape.bn2);
    g = conv1_.backward(g, tape.conv1, true);
    g = relu_backward(g, tape.relu1);
    g = bn1_.backward(g, tape.bn1);
    int row = 0;
    for (int t = 0; t < 3; ++t) {
      const int c = towers_[static_cast<std::size_t>(t)].out_channels();
      towers_[static_cast<std::size_t>(t)].backward(slice_channels(g, row, c),
                                                    tape.towers[static_cast<std::size_t>(t)]);
      row += c;
    }
  }

  void collect(std::vector<ParamRef<Scalar>>& params, std::vector<ParamRef<Scalar>>& buffers) {
    static const char* kTowerNames[3] = {"color", "depth", "mask"};
    for (int t = 0; t < 3; ++t) {
      towers_[static_cast<std::size_t>(t)].collect(params, buffers,
                                                   std::string("tower_") + kTowerNames[t]);
    }
    bn1_.collect(params, buffers, "head.bn1");
    conv1_.collect(params, "head.conv1");
    bn2_.collect(params, buffers, "head.bn2");
    conv2_.collect(params, "head.conv2");
  }

  std::vector<ParamRef<Scalar>> parameters() {
    std::vector<ParamRef<Scalar>> params, buffers;
    collect(params, buffers);
    return params;
  }

  std::vector<ParamRef<Scalar>> buffers() {
    std::vector<ParamRef<Scalar>> params, buffers;
    collect(params, buffers);
    return buffers;
  }

  // Parameters followed by buffers, in a fixed order.
  std::vector<ParamRef<Scalar>> state() {
    std::vector<ParamRef<Scalar>> params, buffers;
    collect(params, buffers);
    params.insert(params.end(), buffers.begin(), buffers.end());
    return params;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.grads().setZero();
  }

  // FNV-1a over the raw bytes of all parameters and buffers.
  std::uint64_t weight_hash() const {
    auto* self = const_cast<QNetwork*>(this);
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& p : self->state()) {
      const auto* bytes = reinterpret_cast<const unsigned char*>(p.value);
      const std::size_t n = static_cast<std::size_t>(p.size) * sizeof(Scalar);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
      }
    }
    return h;
  }

 private:
  void check_input(const FeatureMap<Scalar>& x) const {
    if (x.c != 3 || x.h != cfg_.resolution || x.w != cfg_.resolution) {
      throw ConfigError("network expects 3 x " + std::to_string(cfg_.resolution) + " x " +
                        std::to_string(cfg_.resolution) + " tower inputs, got " +
                        std::to_string(x.c) + " x " + std::to_string(x.h) + " x " +
                        std::to_string(x.w));
    }
  }

  NetworkConfig cfg_;
  std::array<Tower<Scalar>, 3> towers_;
  BatchNorm<Scalar> bn1_;
  Conv2d<Scalar> conv1_;
  BatchNorm<Scalar> bn2_;
  Conv2d<Scalar> conv2_;
  BilinearUpsample<Scalar> upsample_;
  int feature_size_ = 0;
};

// Huber loss on one value and its derivative w.r.t. the prediction.
template <typename Scalar>
Scalar huber(Scalar prediction, Scalar target, Scalar delta, Scalar* grad) {
  const Scalar e = prediction - target;
  if (std::abs(e) <= delta) {
    if (grad != nullptr) *grad = e;
    return Scalar(0.5) * e * e;
  }
  if (grad != nullptr) *grad = e > 0 ? delta : -delta;
  return delta * (std::abs(e) - Scalar(0.5) * delta);
}

struct ExecutedPixel {
  int image = 0;  // index in the batch
  int u = 0;
  int v = 0;
};

// Mean Huber loss over executed pixels of the upsampled Q map. Writes the
// gradient w.r.t. the low-resolution map into `dlow` (zero elsewhere).
template <typename Scalar>
Scalar executed_pixel_loss(const QNetwork<Scalar>& net, const FeatureMap<Scalar>& low,
                           const std::vector<ExecutedPixel>& pixels,
                           const std::vector<Scalar>& targets, Scalar delta,
                           FeatureMap<Scalar>& dlow, std::vector<Scalar>* predictions = nullptr) {
  dlow = FeatureMap<Scalar>(low.n, low.c, low.h, low.w);
  const Scalar scale = Scalar(1) / static_cast<Scalar>(pixels.size());
  Scalar total = 0;
  if (predictions != nullptr) predictions->clear();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const ExecutedPixel& p = pixels[i];
    const Scalar q = net.upsampler().sample(low, p.image, p.v, p.u);
    if (predictions != nullptr) predictions->push_back(q);
    Scalar g = 0;
    total += huber(q, targets[i], delta, &g);
    net.upsampler().scatter(dlow, p.image, p.v, p.u, g * scale);
  }
  return total * scale;
}

}  // namespace pushgrasp::nn
