#include "pushgrasp/policy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace pushgrasp {

namespace {

const Mask* mask_of(const RotatedView& view, MaskKind kind) {
  switch (kind) {
    case MaskKind::goal:
      return &view.goal_mask;
    case MaskKind::objects:
      return &view.all_mask;
    case MaskKind::none:
      break;
  }
  return nullptr;
}

}  // namespace

const char* to_string(NetId id) { return id == NetId::grasp ? "grasp" : "push"; }
const char* to_string(Primitive p) { return p == Primitive::grasp ? "grasp" : "push"; }

Primitive primitive_from_string(const std::string& s) {
  if (s == "grasp") return Primitive::grasp;
  if (s == "push") return Primitive::push;
  throw std::invalid_argument("unknown primitive '" + s + "'");
}

bool QMapStack::all_finite() const {
  for (const auto& v : values) {
    if (!v.isFinite().all()) return false;
  }
  return true;
}

QMapStack forward(const QNet& net, NetId id, const RotatedStack& stack) {
  std::vector<const RotatedView*> views;
  for (const auto& v : stack.views) views.push_back(&v);
  const nn::FeatureMap<float> out = net.forward(nn::make_inputs<float>(views));
  QMapStack q;
  q.network_id = id;
  const int plane = out.plane();
  for (int k = 0; k < kRotations; ++k) {
    ImageF img(out.h, out.w);
    std::copy_n(out.data.data() + static_cast<Eigen::Index>(k) * plane, plane, img.data());
    q.values[static_cast<std::size_t>(k)] = std::move(img);
  }
  return q;
}

ActionSpec make_action(Primitive p, int k, int u, int v, const QMapStack& q) {
  const DecodedAction d = decode_action(k, u, v, q.resolution());
  ActionSpec a;
  a.primitive = p;
  a.k = k;
  a.u = u;
  a.v = v;
  a.q_value = q.at(k, u, v);
  a.x = d.position.x();
  a.y = d.position.y();
  a.angle = d.angle;
  return a;
}

double ExplorationSchedule::epsilon(long long actions) const {
  return std::max(floor, epsilon_initial * std::pow(decay, static_cast<double>(actions)));
}

ArgMax masked_argmax(const QMapStack& q, const RotatedStack& stack, MaskKind kind) {
  ArgMax best;
  const int res = q.resolution();
  for (int k = 0; k < kRotations; ++k) {
    const ImageF& values = q.values[static_cast<std::size_t>(k)];
    const Mask* mask = mask_of(stack.views[static_cast<std::size_t>(k)], kind);
    for (int u = 0; u < res; ++u) {
      for (int v = 0; v < res; ++v) {
        if (mask != nullptr && (*mask)(v, u) == 0) continue;
        const float x = values(v, u);
        if (!best.found() || x > best.value) best = {k, u, v, x};
      }
    }
  }
  return best;
}

ArgMax random_in_mask(const QMapStack& q, const RotatedStack& stack, MaskKind kind,
                      std::mt19937_64& rng) {
  const int res = q.resolution();
  std::vector<int> support;
  for (int k = 0; k < kRotations; ++k) {
    const Mask* mask = mask_of(stack.views[static_cast<std::size_t>(k)], kind);
    for (int p = 0; p < res * res; ++p) {
      if (mask == nullptr || mask->data()[p] != 0) support.push_back(k * res * res + p);
    }
  }
  if (support.empty()) return {};
  std::uniform_int_distribution<std::size_t> pick(0, support.size() - 1);
  const int idx = support[pick(rng)];
  const int k = idx / (res * res);
  const int v = (idx % (res * res)) / res;
  const int u = idx % res;
  return {k, u, v, q.at(k, u, v)};
}

double goal_grasp_max(const QMapStack& grasp_q, const RotatedStack& stack) {
  const ArgMax m = masked_argmax(grasp_q, stack, MaskKind::goal);
  return m.found() ? m.value : -std::numeric_limits<double>::infinity();
}

Selection select_action(const QMapStack& grasp_q, const QMapStack& push_q,
                        const RotatedStack& stack, PolicyMode mode, double grasp_threshold,
                        double epsilon, std::mt19937_64& rng) {
  if (!grasp_q.all_finite() || !push_q.all_finite()) {
    throw std::invalid_argument("Q maps contain non-finite values");
  }
  Selection sel;
  const ArgMax goal_best = masked_argmax(grasp_q, stack, MaskKind::goal);
  sel.goal_grasp_q =
      goal_best.found() ? goal_best.value : -std::numeric_limits<double>::infinity();
  const bool grasp = goal_best.found() && goal_best.value > grasp_threshold;
  const Primitive primitive = grasp ? Primitive::grasp : Primitive::push;
  const QMapStack& q = grasp ? grasp_q : push_q;
  const MaskKind support = grasp ? MaskKind::goal : MaskKind::objects;

  if (mode == PolicyMode::test) {
    const ArgMax best = grasp ? goal_best : masked_argmax(push_q, stack, MaskKind::objects);
    if (best.found()) sel.action = make_action(primitive, best.k, best.u, best.v, q);
    return sel;
  }

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    const ArgMax pick = random_in_mask(q, stack, support, rng);
    if (pick.found()) {
      sel.action = make_action(primitive, pick.k, pick.u, pick.v, q);
      sel.action->explored = true;
      return sel;
    }
  }
  const ArgMax best = masked_argmax(q, stack, MaskKind::none);
  sel.action = make_action(primitive, best.k, best.u, best.v, q);
  return sel;
}

}  // namespace pushgrasp
