#pragma once

#include <vector>

#include "pushgrasp/scene.hpp"

namespace pushgrasp {

// Shared by the grasp and push networks.
struct NetworkConfig {
  // Number of leading stride-2 blocks in each tower. The remaining blocks run
  // at the reduced resolution with dense (concatenating) connectivity.
  int tower_depth = 1;
  std::vector<int> tower_width = {8, 16, 16, 16};
  int head_channels = 32;
  // Full-size pretrained backbones are not bundled; enabling this is rejected.
  bool pretrained_backbone = false;
  int resolution = 64;
  double grasp_threshold = 1.8;
  int rotations = kRotations;

  // Throws ConfigError on inconsistent settings.
  void validate() const;
  // Side length of the feature grid before upsampling.
  int feature_resolution() const;
};

}  // namespace pushgrasp
