#pragma once

#include <stdexcept>
#include <string>

namespace posekit::head {

/// Size of the rotation/translation subnets for a compound scaling factor phi.
struct ScalingConfig {
  int phi = 0;
  int w_bifpn = 64;   // channels of the shared feature network (input)
  int d_iter = 2;     // conv blocks in the refinement module
  int n_iter = 1;     // refinement module applications
  int n_groups = 4;   // group-norm groups, ~16 channels each
};

inline constexpr int kMaxPhi = 7;
inline constexpr int kChannelsPerGroup = 16;

inline ScalingConfig scaling_config(int phi, int w_bifpn) {
  if (phi < 0 || phi > kMaxPhi) {
    throw std::invalid_argument("scaling_config: phi must be in [0, 7], got " + std::to_string(phi));
  }
  if (w_bifpn < kChannelsPerGroup) {
    throw std::invalid_argument("scaling_config: w_bifpn must be at least 16, got " + std::to_string(w_bifpn));
  }
  ScalingConfig cfg;
  cfg.phi = phi;
  cfg.w_bifpn = w_bifpn;
  cfg.d_iter = 2 + phi / 3;
  cfg.n_iter = 1 + phi / 3;
  cfg.n_groups = w_bifpn / kChannelsPerGroup;
  return cfg;
}

}  // namespace posekit::head
