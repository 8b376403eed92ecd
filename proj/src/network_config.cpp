#include "pushgrasp/network_config.hpp"

#include <string>

namespace pushgrasp {

void NetworkConfig::validate() const {
  if (pretrained_backbone) {
    throw ConfigError("pretrained backbones are not available in this build");
  }
  if (rotations != kRotations) {
    throw ConfigError("rotations is fixed at " + std::to_string(kRotations));
  }
  if (resolution < 4) throw ConfigError("resolution must be at least 4");
  if (tower_width.empty()) throw ConfigError("tower_width must list at least one block");
  for (int w : tower_width) {
    if (w < 1) throw ConfigError("tower_width entries must be positive");
  }
  if (tower_depth < 0 || tower_depth > static_cast<int>(tower_width.size())) {
    throw ConfigError("tower_depth must lie in [0, number of tower blocks]");
  }
  if (head_channels < 1) throw ConfigError("head_channels must be positive");
  if (feature_resolution() < 1) throw ConfigError("resolution too small for tower_depth");
}

int NetworkConfig::feature_resolution() const {
  int size = resolution;
  for (int i = 0; i < tower_depth; ++i) size = (size + 2 - 3) / 2 + 1;
  return size;
}

}  // namespace pushgrasp
