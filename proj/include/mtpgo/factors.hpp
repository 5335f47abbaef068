#pragma once

#include "mtpgo/memory_tree.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mtpgo {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

enum class EdgeKind { sequential, loop };

// Relative measurement: pose of frame j expressed in frame i. cov is the
// diagonal of a 4x4 covariance ordered (yaw, x, y, z).
struct RelEdge {
  NodeKey i = 0;
  NodeKey j = 0;
  Pose4 meas;
  Vec4 cov = Vec4::Ones();
  EdgeKind kind = EdgeKind::loop;
};

// Residual (yaw, x, y, z) of a measurement given the two endpoint poses in a
// common frame. Invariant under a change of that common frame.
Vec4 residual_from_poses(const Pose4& gi, const Pose4& gj, const Pose4& meas);

// Residual of an edge evaluated through the LCA frame of its endpoints; the
// evaluation chain is the tree path between them minus the LCA itself.
Vec4 edge_residual(const MemoryTree& tree, const RelEdge& e);

// Whitened squared norm r^T diag(cov)^-1 r.
double edge_chi2(const Vec4& r, const Vec4& cov);

// rho(s) = scale^2 * log(1 + s / scale^2); s is a whitened squared norm.
double cauchy_cost(double s, double scale = 1.0);
// d rho / d s, used as the IRLS weight.
double cauchy_weight(double s, double scale = 1.0);

struct VariableSelection {
  std::vector<NodeKey> variables;         // ordered; never contains the root
  std::vector<std::size_t> edge_indices;  // edges whose chain touches a variable
  std::vector<NodeKey> fixed_boundary;    // chain nodes of included edges that are not variables
};

// Residual plus one 4x4 Jacobian block per selected variable on the edge's
// evaluation chain. Block rows are (yaw, x, y, z), columns are the variable's
// (yaw, x, y, z) rel-pose components; `first` is the variable's ordinal.
struct EdgeLinearization {
  Vec4 r = Vec4::Zero();
  std::vector<std::pair<int, Mat4>> blocks;
};

EdgeLinearization edge_jacobian(const MemoryTree& tree, const RelEdge& e,
                                const std::unordered_map<NodeKey, int>& ordinal_of);

// Selection with the given candidate variables (root dropped); includes every
// edge of `edges` whose evaluation chain touches a variable.
VariableSelection make_selection(const MemoryTree& tree, std::span<const RelEdge> edges,
                                 std::vector<NodeKey> candidate_variables);

// All non-root nodes variable, every edge included.
VariableSelection select_all_states(const MemoryTree& tree, std::span<const RelEdge> edges);

// Variables are the tree path between the loop endpoints (minus root).
VariableSelection select_full_path(const MemoryTree& tree, const RelEdge& loop,
                                   std::span<const RelEdge> edges);

// Expanding window around the LCA of a loop's endpoints: first the LCA and
// its on-path children, then one more path node down each side per step.
class TopDownFrontiers {
 public:
  TopDownFrontiers(const MemoryTree& tree, const RelEdge& loop, std::span<const RelEdge> edges);

  // Next (larger) selection, or nullopt once the whole path has been served.
  std::optional<VariableSelection> next();

 private:
  const MemoryTree& tree_;
  std::span<const RelEdge> edges_;
  std::vector<NodeKey> path_;
  std::size_t lca_pos_ = 0;
  std::size_t radius_ = 0;
  bool done_ = false;
};

}  // namespace mtpgo
