#pragma once

#include "mtpgo/baseline.hpp"
#include "mtpgo/dataset.hpp"
#include "mtpgo/optimizer.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mtpgo {

struct ReplayOptions {
  Method method = Method::tree_top_down;
  bool gate = false;  // chi-square gate on loop events (tree methods only)
  SolverConfig solver;
  SigmaMode sigma_mode = SigmaMode::tuned;
  Vec4 sigma_tree = Vec4(0.01, 0.04, 0.04, 0.04);
  // When > 0, every prune_every-th insertion removes one mid-trajectory node
  // (tree methods only): its two sequential edges merge and its loops drop.
  std::size_t prune_every = 0;
  // One solve over the fully built graph instead of per-loop events
  // (tree-all and baseline only).
  bool batch = false;
};

struct EventRecord {
  std::size_t event = 0;  // monotone index
  NodeKey i = 0;
  NodeKey j = 0;
  Method method = Method::tree_top_down;
  double wall_s = 0.0;  // optimization + gate only
  int num_vars = 0;
  int iters = 0;
  double cost0 = 0.0;  // robust objective over the running edge set, loop included
  double cost1 = 0.0;  // same objective after the event (loop dropped if rejected)
  bool accepted = true;
  // Not part of the stats CSV:
  std::size_t dataset_edge = 0;  // index into Dataset::edges
  std::size_t nodes_at_event = 0;
};

struct ReplayResult {
  std::vector<EventRecord> events;
  std::vector<NodeKey> traj_keys;  // ascending
  std::vector<Pose4> trajectory;   // final global poses, parallel to traj_keys
  double final_cost_robust = 0.0;  // over the surviving running edge set
  double final_chi2 = 0.0;
  double odometry_chi2 = 0.0;  // all dataset edges at the dead-reckoned guess
  std::size_t final_nodes = 0;
  int tree_height = 0;  // 0 for baseline
  double total_wall_s = 0.0;
};

// Inserts vertices in id order (pose = previous node's current global pose
// composed with the sequential measurement) and optimizes on every loop edge.
// Requires a connected sequential chain.
ReplayResult replay(const Dataset& ds, const ReplayOptions& opt);

struct RobustnessReport {
  std::vector<std::size_t> corrupted;  // dataset edge indices
  double tp_rejection_rate = 0.0;      // corrupted loops rejected / corrupted
  double fp_rejection_rate = 0.0;      // clean loops rejected / clean
  double gated_clean_chi2 = 0.0;       // clean edges at the final trajectory
  double ungated_clean_chi2 = 0.0;
  ReplayResult gated;
  ReplayResult ungated;
};

// Corrupts a fraction of the loops (seeded), then replays twice — gate on and
// gate off — and scores the gate's rejections against the corruption ground
// truth.
RobustnessReport run_robustness(const Dataset& ds, double fraction, std::uint64_t seed,
                                const ReplayOptions& base);

// CSV: header `event,i,j,method,wall_s,num_vars,iters,cost0,cost1,accepted`,
// one row per event. Deterministic except the wall_s column.
void emit_stats(std::ostream& out, const ReplayResult& result);

// Non-robust whitened squared error of edges evaluated at trajectory poses.
double trajectory_chi2(std::span<const NodeKey> keys, std::span<const Pose4> poses,
                       std::span<const RelEdge> edges);

const char* method_name(Method m);
Method parse_method(std::string_view name);  // throws on unknown name

}  // namespace mtpgo
