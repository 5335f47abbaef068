#pragma once

#include "mtpgo/dataset.hpp"

#include <cstdint>

namespace mtpgo {

// Layout presets for the synthetic worlds. All walk an axis-aligned grid;
// they differ in arena shape, turn rate and revisit density.
enum class WorldStyle {
  manhattan,  // large square arena, Manhattan-world style runs
  office,     // small cluttered arena, dense revisits
  corridor,   // long narrow arena, out-and-back hallway passes
};

struct GenConfig {
  WorldStyle style = WorldStyle::manhattan;
  std::size_t nodes = 3500;
  std::uint64_t seed = 1;
  double step = 1.0;            // grid cell size, meters
  double odom_sigma_xy = 0.015;  // per-step odometry noise
  double odom_sigma_yaw = 0.004;
  double loop_sigma_xy = 0.03;  // loop measurement noise
  double loop_sigma_yaw = 0.005;
};

// Simulated 2D trajectory with noisy odometry and revisit loop closures.
// Vertices carry the dead-reckoned odometry poses (the incremental replay's
// initial guesses); edge information diagonals are the inverse noise
// variances. Deterministic in cfg.seed.
Dataset generate_world(const GenConfig& cfg);

WorldStyle parse_world_style(const std::string& s);  // throws on unknown name

}  // namespace mtpgo
