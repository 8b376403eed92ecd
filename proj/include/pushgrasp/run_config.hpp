#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pushgrasp/evaluation.hpp"
#include "pushgrasp/learning.hpp"
#include "pushgrasp/network_config.hpp"
#include "pushgrasp/scene.hpp"

namespace pushgrasp {

// Every tunable of a run. Keys are hierarchical (sim.*, perception.*, net.*,
// learn.*, eval.*, run.*) and map onto the module config structs.
struct ConfigBundle {
  SimConfig sim;
  NetworkConfig net;
  LearnConfig learn;
  ProtocolConfig protocol;
  // "auto": calibrate the grasp threshold before push training; "off": use
  // net.grasp_threshold as given.
  std::string threshold_calibration = "auto";
  std::uint64_t seed = 0;
};

class RunConfig {
 public:
  RunConfig() = default;

  // Precedence: defaults < file < environment < explicit overrides.
  static RunConfig resolve(const std::string& config_file,
                           const std::vector<std::string>& overrides);

  // Throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void load_file(const std::string& path);
  void load_text(const std::string& text, const std::string& origin);
  // PUSHGRASP_<KEY> with dots replaced by underscores, upper case.
  void apply_environment();
  // "key=value" override as given on the command line.
  void apply_override(const std::string& assignment);

  // Sorted key=value lines; parse(serialize()) reproduces the config.
  std::string serialize() const;
  static RunConfig parse(const std::string& text);
  std::string hash() const;
  // Keys whose values differ.
  std::vector<std::string> diff(const RunConfig& other) const;

  const ConfigBundle& bundle() const { return bundle_; }
  ConfigBundle& bundle() { return bundle_; }
  EvalEnv eval_env() const;

  static std::vector<std::string> keys();
  static std::string env_name(const std::string& key);

  // Throws ConfigError when values are inconsistent.
  void validate() const;

 private:
  ConfigBundle bundle_;
};

}  // namespace pushgrasp
