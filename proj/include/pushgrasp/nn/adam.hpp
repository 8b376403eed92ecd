#pragma once

#include <cmath>
#include <vector>

#include "pushgrasp/nn/tensor.hpp"

namespace pushgrasp::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // L2 penalty added to the gradient before the moment updates.
  double weight_decay = 2e-4;
};

template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  explicit Adam(const AdamConfig& cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  long long steps() const { return step_; }

  void step(const std::vector<ParamRef<Scalar>>& params) {
    if (m_.size() != params.size()) {
      m_.clear();
      v_.clear();
      for (const auto& p : params) {
        m_.push_back(Vector<Scalar>::Zero(p.size));
        v_.push_back(Vector<Scalar>::Zero(p.size));
      }
    }
    ++step_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const auto b1 = static_cast<Scalar>(cfg_.beta1);
    const auto b2 = static_cast<Scalar>(cfg_.beta2);
    const auto wd = static_cast<Scalar>(cfg_.weight_decay);
    const auto lr = static_cast<Scalar>(cfg_.learning_rate / c1);
    const auto inv_c2 = static_cast<Scalar>(1.0 / c2);
    const auto eps = static_cast<Scalar>(cfg_.epsilon);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto value = params[i].values();
      const Vector<Scalar> g = params[i].grads() + wd * value;
      m_[i] = b1 * m_[i] + (1 - b1) * g;
      v_[i] = b2 * v_[i] + (1 - b2) * g.cwiseProduct(g);
      value.array() -= lr * m_[i].array() / ((v_[i].array() * inv_c2).sqrt() + eps);
    }
  }

  // Moment buffers for checkpointing: m_0, v_0, m_1, v_1, ...
  std::vector<Vector<Scalar>*> moments() {
    std::vector<Vector<Scalar>*> out;
    for (std::size_t i = 0; i < m_.size(); ++i) {
      out.push_back(&m_[i]);
      out.push_back(&v_[i]);
    }
    return out;
  }
  void set_state(long long step, std::vector<Vector<Scalar>> m, std::vector<Vector<Scalar>> v) {
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  AdamConfig cfg_;
  long long step_ = 0;
  std::vector<Vector<Scalar>> m_;
  std::vector<Vector<Scalar>> v_;
};

}  // namespace pushgrasp::nn
