#pragma once

#include "mtpgo/factors.hpp"
#include "mtpgo/optimizer.hpp"

#include <span>
#include <unordered_map>
#include <vector>

namespace mtpgo {

// Poses stored directly in the global frame, keyed by vertex. The first
// inserted vertex is the gauge: optimization never moves it.
class GlobalState {
 public:
  // Throws on duplicate key.
  void insert(NodeKey key, const Pose4& global);
  // Throws on missing key.
  void remove(NodeKey key);

  const Pose4& pose(NodeKey key) const;
  void set_pose(NodeKey key, const Pose4& global);

  bool contains(NodeKey key) const { return poses_.contains(key); }
  std::size_t size() const { return keys_.size(); }
  // Insertion order; front() is the fixed vertex.
  const std::vector<NodeKey>& keys() const { return keys_; }

 private:
  std::vector<NodeKey> keys_;
  std::unordered_map<NodeKey, Pose4> poses_;
};

// Measurement residual from global-frame endpoint poses.
Vec4 baseline_residual(const GlobalState& state, const RelEdge& e);

// Robust LM over every vertex except the first; same loss, damping schedule
// and termination rules as the tree optimizer. num_variables == size() - 1.
OptResult baseline_optimize(GlobalState& state, std::span<const RelEdge> edges,
                            const SolverConfig& cfg);

double baseline_total_cost(const GlobalState& state, std::span<const RelEdge> edges,
                           const SolverConfig& cfg);
double baseline_total_chi2(const GlobalState& state, std::span<const RelEdge> edges);

}  // namespace mtpgo
