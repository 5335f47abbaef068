#pragma once

#include "mtpgo/factors.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mtpgo {

struct Vertex {
  NodeKey id = 0;
  Pose4 pose;  // initial guess, global frame
};

// 2D pose graph lifted to 4-DoF (z = 0 everywhere).
struct Dataset {
  std::string name;
  std::vector<Vertex> vertices;  // unique ids, ascending
  std::vector<RelEdge> edges;
  // Diagonal (I11, I22, I33) = (x, y, yaw) information of each edge as read
  // from the file; zero when the file carried none (synthesized data keeps
  // the generating values).
  std::vector<Vec3> edge_info_diag;
};

// Which covariance the edges carry.
enum class SigmaMode {
  tuned,    // one hand-tuned diagonal for every edge
  dataset,  // per-edge inverse information diagonal, z slot from the tuned set
};

// (yaw rad^2, x, y, z m^2) used for every edge in tuned mode and for the z
// slot in dataset mode.
inline constexpr double kDefaultSigmaTree[4] = {0.01, 0.04, 0.04, 0.04};
Vec4 default_sigma_tree();

// Parses `VERTEX_SE2 id x y theta` / `EDGE_SE2 i j dx dy dtheta I11 I12 I13
// I22 I23 I33` text. Unknown record types are skipped with a warning (pushed
// to `warnings` when given, else written to stderr). Malformed fields and
// edges referencing missing vertices throw std::runtime_error with the line
// number. Files with edges but no vertex records get vertices synthesized by
// dead-reckoning the sequential chain from the lowest id. Edge covariances
// are stamped with the tuned defaults; use apply_sigma_mode to switch.
Dataset parse_g2o_2d(std::istream& in, std::string name = "",
                     std::vector<std::string>* warnings = nullptr);
Dataset parse_g2o_2d(const std::filesystem::path& file,
                     std::vector<std::string>* warnings = nullptr);

void write_g2o_2d(std::ostream& out, const Dataset& ds);

// Edge indices split by kind; also stamps each edge's `kind` field
// (sequential iff |i - j| == 1).
struct EdgePartition {
  std::vector<std::size_t> sequential;
  std::vector<std::size_t> loops;
};
EdgePartition classify_edges(Dataset& ds);

// Restamps every edge covariance: tuned mode uses sigma_tree for all four
// slots; dataset mode inverts the stored per-edge information diagonal for
// (yaw, x, y) and keeps sigma_tree's z, falling back to tuned where the file
// had no positive information.
void apply_sigma_mode(Dataset& ds, SigmaMode mode, const Vec4& sigma_tree);

// Adds large noise to a random floor(fraction * |loops|)-subset of loop
// edges: yaw += N(0,1) wrapped, x and y += N(0, s^2) with s ~ U(1,50) drawn
// once per edge. Deterministic in `seed`. Returns the corrupted edge indices,
// ascending.
std::vector<std::size_t> corrupt_loops(Dataset& ds, double fraction, std::uint64_t seed);

// CSV `id,x,y,z,yaw` with a header, 9 significant digits, key order as given.
void export_trajectory(std::ostream& out, std::span<const NodeKey> keys,
                       std::span<const Pose4> poses);

}  // namespace mtpgo
