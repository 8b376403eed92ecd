#include "pushgrasp/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace pushgrasp {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

long long parse_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

struct Entry {
  std::function<std::string(const ConfigBundle&)> get;
  std::function<void(ConfigBundle&, const std::string&)> set;
};

using Registry = std::map<std::string, Entry>;

template <typename Access>
void add_real(Registry& r, const std::string& key, Access access) {
  r[key] = {[access](const ConfigBundle& b) {
              return format_double(access(const_cast<ConfigBundle&>(b)));
            },
            [access, key](ConfigBundle& b, const std::string& v) {
              access(b) = parse_double(key, v);
            }};
}

template <typename Access>
void add_int(Registry& r, const std::string& key, Access access) {
  r[key] = {[access](const ConfigBundle& b) {
              return std::to_string(access(const_cast<ConfigBundle&>(b)));
            },
            [access, key](ConfigBundle& b, const std::string& v) {
              const long long x = parse_integer(key, v);
              if (x < -2147483647LL || x > 2147483647LL) throw ConfigError(key + ": out of range");
              access(b) = static_cast<int>(x);
            }};
}

template <typename Access>
void add_bool(Registry& r, const std::string& key, Access access) {
  r[key] = {[access](const ConfigBundle& b) {
              return std::string(access(const_cast<ConfigBundle&>(b)) ? "true" : "false");
            },
            [access, key](ConfigBundle& b, const std::string& v) {
              access(b) = parse_bool(key, v);
            }};
}

const Registry& registry() {
  static const Registry reg = [] {
    Registry r;
    // Simulation.
    add_real(r, "sim.push_distance", [](ConfigBundle& b) -> double& { return b.sim.push_distance; });
    add_real(r, "sim.pusher_radius", [](ConfigBundle& b) -> double& { return b.sim.pusher_radius; });
    add_real(r, "sim.push_substep", [](ConfigBundle& b) -> double& { return b.sim.push_substep; });
    add_real(r, "sim.contact_tolerance", [](ConfigBundle& b) -> double& { return b.sim.contact_tolerance; });
    add_int(r, "sim.max_resolve_iterations", [](ConfigBundle& b) -> int& { return b.sim.max_resolve_iterations; });
    add_real(r, "sim.jaw_open_width", [](ConfigBundle& b) -> double& { return b.sim.gripper.jaw_open_width; });
    add_real(r, "sim.finger_thickness", [](ConfigBundle& b) -> double& { return b.sim.gripper.finger_thickness; });
    add_real(r, "sim.finger_length", [](ConfigBundle& b) -> double& { return b.sim.gripper.finger_length; });
    add_real(r, "sim.max_object_height", [](ConfigBundle& b) -> double& { return b.sim.max_object_height; });
    add_real(r, "sim.object_height_min", [](ConfigBundle& b) -> double& { return b.sim.object_height.lo; });
    add_real(r, "sim.object_height_max", [](ConfigBundle& b) -> double& { return b.sim.object_height.hi; });
    add_real(r, "sim.square_half_min", [](ConfigBundle& b) -> double& { return b.sim.square_half.lo; });
    add_real(r, "sim.square_half_max", [](ConfigBundle& b) -> double& { return b.sim.square_half.hi; });
    add_real(r, "sim.rect_short_half_min", [](ConfigBundle& b) -> double& { return b.sim.rect_short_half.lo; });
    add_real(r, "sim.rect_short_half_max", [](ConfigBundle& b) -> double& { return b.sim.rect_short_half.hi; });
    add_real(r, "sim.rect_long_half_min", [](ConfigBundle& b) -> double& { return b.sim.rect_long_half.lo; });
    add_real(r, "sim.rect_long_half_max", [](ConfigBundle& b) -> double& { return b.sim.rect_long_half.hi; });
    add_real(r, "sim.disc_radius_min", [](ConfigBundle& b) -> double& { return b.sim.disc_radius.lo; });
    add_real(r, "sim.disc_radius_max", [](ConfigBundle& b) -> double& { return b.sim.disc_radius.hi; });
    add_real(r, "sim.sparse_region_lo", [](ConfigBundle& b) -> double& { return b.sim.sparse_region_lo; });
    add_real(r, "sim.sparse_region_hi", [](ConfigBundle& b) -> double& { return b.sim.sparse_region_hi; });
    add_real(r, "sim.sparse_min_gap", [](ConfigBundle& b) -> double& { return b.sim.sparse_min_gap; });
    add_real(r, "sim.packed_short_half", [](ConfigBundle& b) -> double& { return b.sim.packed_short_half; });
    add_real(r, "sim.packed_long_half", [](ConfigBundle& b) -> double& { return b.sim.packed_long_half; });
    add_real(r, "sim.packed_gap", [](ConfigBundle& b) -> double& { return b.sim.packed_gap; });
    add_real(r, "sim.packed_jitter", [](ConfigBundle& b) -> double& { return b.sim.packed_jitter; });
    add_real(r, "sim.packed_angle_jitter", [](ConfigBundle& b) -> double& { return b.sim.packed_angle_jitter; });
    add_int(r, "sim.packed_max_attempts", [](ConfigBundle& b) -> int& { return b.sim.packed_max_attempts; });
    add_bool(r, "sim.failed_grasp_disturbance", [](ConfigBundle& b) -> bool& { return b.sim.failed_grasp_disturbance; });
    add_real(r, "sim.pile_drop_noise", [](ConfigBundle& b) -> double& { return b.sim.pile_drop_noise; });
    add_real(r, "sim.pile_settle_step", [](ConfigBundle& b) -> double& { return b.sim.pile_settle_step; });
    add_int(r, "sim.change_resolution", [](ConfigBundle& b) -> int& { return b.sim.resolution; });
    add_int(r, "sim.change_window", [](ConfigBundle& b) -> int& { return b.sim.change_window; });
    add_real(r, "sim.change_depth_threshold", [](ConfigBundle& b) -> double& { return b.sim.change_depth_threshold; });
    add_int(r, "sim.change_pixel_threshold", [](ConfigBundle& b) -> int& { return b.sim.change_pixel_threshold; });

    // Perception and networks.
    add_int(r, "perception.resolution", [](ConfigBundle& b) -> int& { return b.net.resolution; });
    add_int(r, "net.tower_depth", [](ConfigBundle& b) -> int& { return b.net.tower_depth; });
    r["net.tower_width"] = {
        [](const ConfigBundle& b) {
          std::string s;
          for (std::size_t i = 0; i < b.net.tower_width.size(); ++i) {
            if (i > 0) s += ",";
            s += std::to_string(b.net.tower_width[i]);
          }
          return s;
        },
        [](ConfigBundle& b, const std::string& v) {
          std::vector<int> widths;
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) {
            widths.push_back(static_cast<int>(parse_integer("net.tower_width", trim(item))));
          }
          if (widths.empty()) throw ConfigError("net.tower_width: expected a comma-separated list");
          b.net.tower_width = widths;
        }};
    add_int(r, "net.head_channels", [](ConfigBundle& b) -> int& { return b.net.head_channels; });
    add_bool(r, "net.pretrained_backbone", [](ConfigBundle& b) -> bool& { return b.net.pretrained_backbone; });
    add_real(r, "net.grasp_threshold", [](ConfigBundle& b) -> double& { return b.net.grasp_threshold; });
    r["net.threshold_calibration"] = {
        [](const ConfigBundle& b) { return b.threshold_calibration; },
        [](ConfigBundle& b, const std::string& v) {
          if (v != "auto" && v != "off") {
            throw ConfigError("net.threshold_calibration: expected auto or off, got '" + v + "'");
          }
          b.threshold_calibration = v;
        }};

    // Learning.
    add_real(r, "learn.learning_rate", [](ConfigBundle& b) -> double& { return b.learn.adam.learning_rate; });
    add_real(r, "learn.beta1", [](ConfigBundle& b) -> double& { return b.learn.adam.beta1; });
    add_real(r, "learn.beta2", [](ConfigBundle& b) -> double& { return b.learn.adam.beta2; });
    add_real(r, "learn.adam_epsilon", [](ConfigBundle& b) -> double& { return b.learn.adam.epsilon; });
    add_real(r, "learn.weight_decay", [](ConfigBundle& b) -> double& { return b.learn.adam.weight_decay; });
    add_real(r, "learn.discount", [](ConfigBundle& b) -> double& { return b.learn.td.discount; });
    add_real(r, "learn.huber_delta", [](ConfigBundle& b) -> double& { return b.learn.td.huber_delta; });
    add_int(r, "learn.batch_size", [](ConfigBundle& b) -> int& { return b.learn.batch_size; });
    add_int(r, "learn.replay_capacity", [](ConfigBundle& b) -> int& { return b.learn.replay_capacity; });
    add_real(r, "learn.epsilon_initial", [](ConfigBundle& b) -> double& { return b.learn.exploration.epsilon_initial; });
    add_real(r, "learn.epsilon_decay", [](ConfigBundle& b) -> double& { return b.learn.exploration.decay; });
    add_real(r, "learn.epsilon_floor", [](ConfigBundle& b) -> double& { return b.learn.exploration.floor; });
    r["learn.push_reward_semantics"] = {
        [](const ConfigBundle& b) { return std::string(to_string(b.learn.rewards.semantics)); },
        [](ConfigBundle& b, const std::string& v) {
          b.learn.rewards.semantics = push_semantics_from_string(v);
        }};
    add_real(r, "learn.q_improvement_threshold", [](ConfigBundle& b) -> double& { return b.learn.rewards.q_improvement_threshold; });
    add_real(r, "learn.push_reward_positive", [](ConfigBundle& b) -> double& { return b.learn.rewards.push_reward_positive; });
    add_real(r, "learn.push_reward_negative", [](ConfigBundle& b) -> double& { return b.learn.rewards.push_reward_negative; });
    add_int(r, "learn.budget_grasp_agnostic", [](ConfigBundle& b) -> int& { return b.learn.budgets[0]; });
    add_int(r, "learn.budget_grasp_explore", [](ConfigBundle& b) -> int& { return b.learn.budgets[1]; });
    add_int(r, "learn.budget_push_training", [](ConfigBundle& b) -> int& { return b.learn.budgets[2]; });
    add_int(r, "learn.budget_alternating", [](ConfigBundle& b) -> int& { return b.learn.budgets[3]; });
    add_int(r, "learn.max_pushes_per_episode", [](ConfigBundle& b) -> int& { return b.learn.max_pushes_per_episode; });
    add_int(r, "learn.alternating_max_actions", [](ConfigBundle& b) -> int& { return b.learn.alternating_max_actions; });
    add_int(r, "learn.checkpoint_every", [](ConfigBundle& b) -> int& { return b.learn.checkpoint_every; });
    add_int(r, "learn.calibration_scenes", [](ConfigBundle& b) -> int& { return b.learn.calibration_scenes; });
    add_real(r, "learn.calibration_precision", [](ConfigBundle& b) -> double& { return b.learn.calibration_precision; });

    // Evaluation protocol.
    add_int(r, "eval.action_cap", [](ConfigBundle& b) -> int& { return b.protocol.action_cap; });
    add_int(r, "eval.max_consecutive_failures", [](ConfigBundle& b) -> int& { return b.protocol.max_consecutive_failures; });

    r["run.seed"] = {[](const ConfigBundle& b) { return std::to_string(b.seed); },
                     [](ConfigBundle& b, const std::string& v) { b.seed = parse_unsigned("run.seed", v); }};
    return r;
  }();
  return reg;
}

const Entry& entry(const std::string& key) {
  const auto& reg = registry();
  const auto it = reg.find(key);
  if (it == reg.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

}  // namespace


void RunConfig::set(const std::string& key, const std::string& value) {
  entry(key).set(bundle_, trim(value));
}

std::string RunConfig::get(const std::string& key) const { return entry(key).get(bundle_); }

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value");
    }
    try {
      set(trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path);
}

std::string RunConfig::env_name(const std::string& key) {
  std::string name = "PUSHGRASP_";
  for (char c : key) {
    name += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return name;
}

void RunConfig::apply_environment() {
  for (const auto& [key, e] : registry()) {
    if (const char* v = std::getenv(env_name(key).c_str())) {
      try {
        set(key, v);
      } catch (const ConfigError& err) {
        throw ConfigError(env_name(key) + ": " + err.what());
      }
    }
  }
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

RunConfig RunConfig::resolve(const std::string& config_file,
                             const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!config_file.empty()) cfg.load_file(config_file);
  cfg.apply_environment();
  for (const auto& o : overrides) cfg.apply_override(o);
  cfg.validate();
  return cfg;
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& [key, e] : registry()) out += key + "=" + e.get(bundle_) + "\n";
  return out;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  cfg.load_text(text, "config snapshot");
  return cfg;
}

std::string RunConfig::hash() const {
  const std::string s = serialize();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> RunConfig::diff(const RunConfig& other) const {
  std::vector<std::string> out;
  for (const auto& [key, e] : registry()) {
    if (e.get(bundle_) != e.get(other.bundle_)) out.push_back(key);
  }
  return out;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, e] : registry()) out.push_back(key);
  return out;
}

EvalEnv RunConfig::eval_env() const {
  EvalEnv env;
  env.sim = bundle_.sim;
  env.resolution = bundle_.net.resolution;
  env.protocol = bundle_.protocol;
  return env;
}

void RunConfig::validate() const {
  bundle_.net.validate();
  const auto& s = bundle_.sim;
  if (s.push_distance < 0 || s.pusher_radius <= 0 || s.push_substep <= 0) {
    throw ConfigError("sim push parameters must be positive");
  }
  if (!(s.gripper.jaw_open_width > s.gripper.finger_thickness && s.gripper.finger_thickness > 0)) {
    throw ConfigError("sim.jaw_open_width must exceed sim.finger_thickness > 0");
  }
  for (const SizeRange* range : {&s.object_height, &s.square_half, &s.rect_short_half,
                                 &s.rect_long_half, &s.disc_radius}) {
    if (!(range->lo > 0 && range->lo <= range->hi)) {
      throw ConfigError("sim size ranges need 0 < min <= max");
    }
  }
  if (s.max_object_height <= 0) throw ConfigError("sim.max_object_height must be positive");
  const auto& l = bundle_.learn;
  if (!(l.td.discount >= 0 && l.td.discount < 1)) {
    throw ConfigError("learn.discount must lie in [0, 1)");
  }
  if (l.batch_size < 0) throw ConfigError("learn.batch_size must be non-negative");
  if (l.replay_capacity < 1) throw ConfigError("learn.replay_capacity must be positive");
  const auto& e = l.exploration;
  if (!(e.floor >= 0 && e.floor <= e.epsilon_initial && e.epsilon_initial <= 1 && e.decay > 0 &&
        e.decay <= 1)) {
    throw ConfigError("epsilon schedule needs 0 <= floor <= initial <= 1 and 0 < decay <= 1");
  }
  for (int b : l.budgets) {
    if (b < 0) throw ConfigError("stage budgets must be non-negative");
  }
  if (bundle_.protocol.action_cap < 1 || bundle_.protocol.max_consecutive_failures < 1) {
    throw ConfigError("eval.action_cap and eval.max_consecutive_failures must be positive");
  }
}

}  // namespace pushgrasp
