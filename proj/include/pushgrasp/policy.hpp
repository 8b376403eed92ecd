#pragma once

#include <array>
#include <optional>
#include <random>
#include <string>

#include "pushgrasp/network_config.hpp"
#include "pushgrasp/nn/qnet.hpp"
#include "pushgrasp/perception.hpp"

namespace pushgrasp {

using QNet = nn::QNetwork<float>;

enum class NetId { grasp, push };
enum class Primitive { grasp, push };
enum class PolicyMode { train, test };

const char* to_string(NetId id);
const char* to_string(Primitive p);
Primitive primitive_from_string(const std::string& s);

// One Q value per (rotation, pixel).
struct QMapStack {
  NetId network_id = NetId::grasp;
  std::array<ImageF, kRotations> values;

  int resolution() const { return static_cast<int>(values[0].rows()); }
  float at(int k, int u, int v) const { return values[static_cast<std::size_t>(k)](v, u); }
  bool all_finite() const;
};

// Runs all rotations of `stack` through `net` in one inference batch.
QMapStack forward(const QNet& net, NetId id, const RotatedStack& stack);

struct ActionSpec {
  Primitive primitive = Primitive::grasp;
  int k = 0;
  int u = 0;
  int v = 0;
  double q_value = 0.0;
  // Decoded workspace pose: position and action-axis angle.
  double x = 0.0;
  double y = 0.0;
  double angle = 0.0;
  bool explored = false;  // drawn by epsilon exploration
};

ActionSpec make_action(Primitive p, int k, int u, int v, const QMapStack& q);

struct ExplorationSchedule {
  double epsilon_initial = 0.5;
  double decay = 0.998;
  double floor = 0.1;

  // max(floor, initial * decay^n) after n actions.
  double epsilon(long long actions) const;
};

// Which per-rotation mask restricts a search.
enum class MaskKind { none, goal, objects };

struct ArgMax {
  int k = -1;
  int u = -1;
  int v = -1;
  float value = 0.0f;
  bool found() const { return k >= 0; }
};

// Maximum over pixels where the chosen mask is set, ties broken by the
// lexicographically smallest (k, u, v). Not found when the mask is empty.
ArgMax masked_argmax(const QMapStack& q, const RotatedStack& stack, MaskKind mask);

// Uniform draw from the mask support. Not found when the mask is empty.
ArgMax random_in_mask(const QMapStack& q, const RotatedStack& stack, MaskKind mask,
                      std::mt19937_64& rng);

struct Selection {
  std::optional<ActionSpec> action;  // empty: no action possible
  // Goal-masked maximum of the grasp map (-inf without goal pixels).
  double goal_grasp_q = 0.0;
};

// Grasp-or-push decision. The threshold test always uses the goal-masked
// grasp maximum (strictly greater selects grasp). In test mode the argmax is
// restricted to the goal mask (grasp) or objects mask (push); in train mode
// it is unrestricted and, with probability epsilon, replaced by a uniform
// draw from the primitive's mask support.
Selection select_action(const QMapStack& grasp_q, const QMapStack& push_q,
                        const RotatedStack& stack, PolicyMode mode, double grasp_threshold,
                        double epsilon, std::mt19937_64& rng);

// Goal-masked grasp maximum; -inf when the goal is not visible.
double goal_grasp_max(const QMapStack& grasp_q, const RotatedStack& stack);

}  // namespace pushgrasp
