#include "mtpgo/factors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mtpgo {

namespace {

// Pose of `node` in the frame of its ancestor `anc` (composition of rel poses
// strictly below anc).
Pose4 pose_in_ancestor(const MemoryTree& t, NodeKey anc, NodeKey node) {
  if (node == anc) {
    return Pose4::identity();
  }
  NodeView v = t.view(node);
  Pose4 g = v.rel;
  while (v.parent && *v.parent != anc) {
    v = t.view(*v.parent);
    g = compose(v.rel, g);
  }
  if (!v.parent) {
    throw std::logic_error("pose_in_ancestor: anc is not an ancestor of node");
  }
  return g;
}

// S = d rz(t)/dt at t = 0; S * p rotates p a quarter turn about z.
inline Vec3 s_times(const Vec3& p) { return Vec3(-p.y(), p.x(), 0.0); }

}  // namespace

Vec4 residual_from_poses(const Pose4& gi, const Pose4& gj, const Pose4& meas) {
  Vec4 r;
  r(0) = wrap_yaw(meas.yaw - gj.yaw + gi.yaw);
  const double c = std::cos(-gi.yaw);
  const double s = std::sin(-gi.yaw);
  const Vec3 d = gj.trans - gi.trans;
  r(1) = meas.trans.x() - (c * d.x() - s * d.y());
  r(2) = meas.trans.y() - (s * d.x() + c * d.y());
  r(3) = meas.trans.z() - d.z();
  return r;
}

Vec4 edge_residual(const MemoryTree& tree, const RelEdge& e) {
  const NodeKey l = tree.lca(e.i, e.j);
  const Pose4 gi = pose_in_ancestor(tree, l, e.i);
  const Pose4 gj = pose_in_ancestor(tree, l, e.j);
  return residual_from_poses(gi, gj, e.meas);
}

double edge_chi2(const Vec4& r, const Vec4& cov) {
  double s = 0.0;
  for (int k = 0; k < 4; ++k) {
    s += r(k) * r(k) / cov(k);
  }
  return s;
}

double cauchy_cost(double s, double scale) {
  if (s < 0.0) {
    throw std::invalid_argument("cauchy_cost: squared norm must be non-negative");
  }
  const double c2 = scale * scale;
  return c2 * std::log1p(s / c2);
}

double cauchy_weight(double s, double scale) {
  if (s < 0.0) {
    throw std::invalid_argument("cauchy_weight: squared norm must be non-negative");
  }
  const double c2 = scale * scale;
  return 1.0 / (1.0 + s / c2);
}

EdgeLinearization edge_jacobian(const MemoryTree& tree, const RelEdge& e,
                                const std::unordered_map<NodeKey, int>& ordinal_of) {
  const std::vector<NodeKey> path = tree.path(e.i, e.j);
  const NodeKey l = tree.lca(e.i, e.j);
  std::size_t lca_pos = 0;
  while (path[lca_pos] != l) {
    ++lca_pos;
  }

  // Walk each chain top-down from the LCA, accumulating the pose of every
  // chain node (and of its parent) in the LCA frame.
  struct ChainEntry {
    NodeKey key;
    double parent_yaw;  // yaw of the node's tree parent, in the LCA frame
    Pose4 pose;         // node pose in the LCA frame
  };
  std::vector<ChainEntry> chain_i, chain_j;
  chain_i.reserve(lca_pos);
  chain_j.reserve(path.size() - lca_pos);
  {
    Pose4 g = Pose4::identity();
    for (std::size_t idx = lca_pos; idx-- > 0;) {
      const double parent_yaw = g.yaw;
      g = compose(g, tree.rel_pose(path[idx]));
      chain_i.push_back({path[idx], parent_yaw, g});
    }
  }
  {
    Pose4 g = Pose4::identity();
    for (std::size_t idx = lca_pos + 1; idx < path.size(); ++idx) {
      const double parent_yaw = g.yaw;
      g = compose(g, tree.rel_pose(path[idx]));
      chain_j.push_back({path[idx], parent_yaw, g});
    }
  }

  const Pose4 gi = chain_i.empty() ? Pose4::identity() : chain_i.back().pose;
  const Pose4 gj = chain_j.empty() ? Pose4::identity() : chain_j.back().pose;

  EdgeLinearization lin;
  lin.r = residual_from_poses(gi, gj, e.meas);

  const Mat3 rz_mi = rz(-gi.yaw);
  auto emit = [&](const ChainEntry& ce, double sign) {
    auto it = ordinal_of.find(ce.key);
    if (it == ordinal_of.end()) {
      return;
    }
    Mat4 b = Mat4::Zero();
    b(0, 0) = sign;
    b.block<3, 1>(1, 0) = sign * (rz_mi * s_times(gj.trans - ce.pose.trans));
    b.block<3, 3>(1, 1) = sign * (rz_mi * rz(ce.parent_yaw));
    lin.blocks.emplace_back(it->second, b);
  };
  for (const ChainEntry& ce : chain_i) {
    emit(ce, 1.0);
  }
  for (const ChainEntry& ce : chain_j) {
    emit(ce, -1.0);
  }
  return lin;
}

VariableSelection make_selection(const MemoryTree& tree, std::span<const RelEdge> edges,
                                 std::vector<NodeKey> candidate_variables) {
  VariableSelection sel;
  const NodeKey root = tree.root_key();
  std::erase(candidate_variables, root);
  sel.variables = std::move(candidate_variables);

  std::vector<std::pair<NodeKey, NodeKey>> intervals;
  intervals.reserve(sel.variables.size());
  for (NodeKey v : sel.variables) {
    intervals.push_back(tree.subtree_interval(v));
  }

  // An edge's evaluation chain touches variable v exactly when one endpoint
  // lies inside v's subtree key interval and the other does not.
  for (std::size_t idx = 0; idx < edges.size(); ++idx) {
    const RelEdge& e = edges[idx];
    if (!tree.contains(e.i) || !tree.contains(e.j)) {
      continue;
    }
    for (const auto& [lo, hi] : intervals) {
      const bool in_i = e.i >= lo && e.i <= hi;
      const bool in_j = e.j >= lo && e.j <= hi;
      if (in_i != in_j) {
        sel.edge_indices.push_back(idx);
        break;
      }
    }
  }

  // Fixed boundary: chain nodes of included edges that are not variables.
  std::unordered_map<NodeKey, int> is_var;
  for (NodeKey v : sel.variables) {
    is_var.emplace(v, 1);
  }
  std::vector<NodeKey> boundary;
  for (std::size_t idx : sel.edge_indices) {
    const RelEdge& e = edges[idx];
    const NodeKey l = tree.lca(e.i, e.j);
    for (NodeKey k : tree.path(e.i, e.j)) {
      if (k != l && !is_var.count(k)) {
        boundary.push_back(k);
      }
    }
  }
  std::sort(boundary.begin(), boundary.end());
  boundary.erase(std::unique(boundary.begin(), boundary.end()), boundary.end());
  sel.fixed_boundary = std::move(boundary);
  return sel;
}

VariableSelection select_all_states(const MemoryTree& tree, std::span<const RelEdge> edges) {
  VariableSelection sel;
  const NodeKey root = tree.root_key();
  for (NodeKey k : tree.keys_inorder()) {
    if (k != root) {
      sel.variables.push_back(k);
    }
  }
  // Every edge depends on at least one non-root node: evaluation chains are
  // non-empty and never contain the root.
  for (std::size_t idx = 0; idx < edges.size(); ++idx) {
    if (tree.contains(edges[idx].i) && tree.contains(edges[idx].j)) {
      sel.edge_indices.push_back(idx);
    }
  }
  return sel;
}

VariableSelection select_full_path(const MemoryTree& tree, const RelEdge& loop,
                                   std::span<const RelEdge> edges) {
  return make_selection(tree, edges, tree.path(loop.i, loop.j));
}

TopDownFrontiers::TopDownFrontiers(const MemoryTree& tree, const RelEdge& loop,
                                   std::span<const RelEdge> edges)
    : tree_(tree), edges_(edges), path_(tree.path(loop.i, loop.j)) {
  const NodeKey l = tree.lca(loop.i, loop.j);
  while (path_[lca_pos_] != l) {
    ++lca_pos_;
  }
}

std::optional<VariableSelection> TopDownFrontiers::next() {
  if (done_) {
    return std::nullopt;
  }
  const std::size_t reach = 1 + radius_;
  const std::size_t lo = lca_pos_ >= reach ? lca_pos_ - reach : 0;
  const std::size_t hi = std::min(lca_pos_ + reach, path_.size() - 1);
  if (lo == 0 && hi == path_.size() - 1) {
    done_ = true;
  }
  ++radius_;
  std::vector<NodeKey> window(path_.begin() + static_cast<std::ptrdiff_t>(lo),
                              path_.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
  return make_selection(tree_, edges_, std::move(window));
}

}  // namespace mtpgo
