#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "pushgrasp/nn/adam.hpp"
#include "pushgrasp/policy.hpp"

namespace pushgrasp {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Both networks with their optimizer state.
struct NetworkPair {
  QNet grasp;
  QNet push;
  nn::Adam<float> grasp_opt;
  nn::Adam<float> push_opt;

  NetworkPair() = default;
  NetworkPair(const NetworkConfig& cfg, const nn::AdamConfig& adam, std::uint64_t seed);

  QNet& net(NetId id) { return id == NetId::grasp ? grasp : push; }
  const QNet& net(NetId id) const { return id == NetId::grasp ? grasp : push; }
  nn::Adam<float>& optimizer(NetId id) { return id == NetId::grasp ? grasp_opt : push_opt; }
};

// Plain-text sidecar written next to the weight blob as `<path>.meta`.
struct CheckpointMeta {
  std::uint32_t version = kCheckpointVersion;
  std::string stage;
  long long step = 0;
  long long episode = 0;
  std::string config_hash;
  std::map<std::string, std::string> extra;
};

std::string meta_path(const std::string& checkpoint_path);

// Writes the weight blob and the sidecar atomically (temp file + rename).
void save_weights(const std::string& path, const NetworkPair& nets, const CheckpointMeta& meta);

// Loads into `nets` only after the whole file validated; on any error `nets`
// is untouched. Returns the sidecar (defaults when the sidecar is missing).
CheckpointMeta load_weights(const std::string& path, NetworkPair& nets);

CheckpointMeta read_meta(const std::string& path);

}  // namespace pushgrasp
