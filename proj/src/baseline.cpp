#include "mtpgo/baseline.hpp"

#include "lm_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mtpgo {

void GlobalState::insert(NodeKey key, const Pose4& global) {
  if (!poses_.emplace(key, global).second) {
    throw std::invalid_argument("GlobalState::insert: duplicate key");
  }
  keys_.push_back(key);
}

void GlobalState::remove(NodeKey key) {
  if (poses_.erase(key) == 0) {
    throw std::invalid_argument("GlobalState::remove: missing key");
  }
  keys_.erase(std::find(keys_.begin(), keys_.end(), key));
}

const Pose4& GlobalState::pose(NodeKey key) const {
  const auto it = poses_.find(key);
  if (it == poses_.end()) {
    throw std::invalid_argument("GlobalState::pose: missing key");
  }
  return it->second;
}

void GlobalState::set_pose(NodeKey key, const Pose4& global) {
  const auto it = poses_.find(key);
  if (it == poses_.end()) {
    throw std::invalid_argument("GlobalState::set_pose: missing key");
  }
  it->second = global;
}

Vec4 baseline_residual(const GlobalState& state, const RelEdge& e) {
  return residual_from_poses(state.pose(e.i), state.pose(e.j), e.meas);
}

namespace {

// d Rz(theta)/d theta = Rz(theta) * S with S p = (-p.y, p.x, 0).
Vec3 s_times(const Vec3& p) { return Vec3(-p.y(), p.x(), 0.0); }

}  // namespace

OptResult baseline_optimize(GlobalState& state, std::span<const RelEdge> edges,
                            const SolverConfig& cfg) {
  const std::vector<NodeKey>& keys = state.keys();
  std::unordered_map<NodeKey, int> ordinal;  // gauge vertex keys[0] has no ordinal
  ordinal.reserve(keys.size());
  for (std::size_t k = 1; k < keys.size(); ++k) {
    ordinal.emplace(keys[k], static_cast<int>(k) - 1);
  }
  const int num_vars = static_cast<int>(ordinal.size());

  detail::LmCallbacks cb;
  cb.cost = [&] {
    double c = 0.0;
    for (const RelEdge& e : edges) {
      c += cauchy_cost(edge_chi2(baseline_residual(state, e), e.cov), cfg.cauchy_scale);
    }
    return c;
  };
  cb.assemble = [&](std::vector<Eigen::Triplet<double>>& trips, Eigen::VectorXd& g) {
    std::vector<std::pair<int, Mat4>> blocks;
    for (const RelEdge& e : edges) {
      const Pose4& gi = state.pose(e.i);
      const Pose4& gj = state.pose(e.j);
      const Mat3 rz_mi = rz(-gi.yaw);
      blocks.clear();
      if (const auto it = ordinal.find(e.i); it != ordinal.end()) {
        Mat4 b = Mat4::Zero();
        b(0, 0) = 1.0;
        b.block<3, 1>(1, 0) = rz_mi * s_times(gj.trans - gi.trans);
        b.block<3, 3>(1, 1) = rz_mi;
        blocks.emplace_back(it->second, b);
      }
      if (const auto it = ordinal.find(e.j); it != ordinal.end()) {
        Mat4 b = Mat4::Zero();
        b(0, 0) = -1.0;
        b.block<3, 3>(1, 1) = -rz_mi;
        blocks.emplace_back(it->second, b);
      }
      detail::accumulate_robust_edge(baseline_residual(state, e), e.cov, blocks,
                                     cfg.cauchy_scale, trips, g);
    }
  };
  cb.apply_step = [&](const Eigen::VectorXd& dx) {
    for (std::size_t k = 1; k < keys.size(); ++k) {
      const int o = static_cast<int>(k) - 1;
      const Pose4& p = state.pose(keys[k]);
      state.set_pose(keys[k], Pose4(p.yaw + dx[4 * o], p.trans + dx.segment<3>(4 * o + 1)));
    }
  };
  std::vector<Pose4> saved(keys.size());
  cb.checkpoint = [&] {
    for (std::size_t k = 1; k < keys.size(); ++k) {
      saved[k] = state.pose(keys[k]);
    }
  };
  cb.rollback = [&] {
    for (std::size_t k = 1; k < keys.size(); ++k) {
      state.set_pose(keys[k], saved[k]);
    }
  };

  OptResult res = detail::run_lm(4 * num_vars, cb, cfg);
  res.num_variables = num_vars;
  return res;
}

double baseline_total_cost(const GlobalState& state, std::span<const RelEdge> edges,
                           const SolverConfig& cfg) {
  double c = 0.0;
  for (const RelEdge& e : edges) {
    c += cauchy_cost(edge_chi2(baseline_residual(state, e), e.cov), cfg.cauchy_scale);
  }
  return c;
}

double baseline_total_chi2(const GlobalState& state, std::span<const RelEdge> edges) {
  double c = 0.0;
  for (const RelEdge& e : edges) {
    c += edge_chi2(baseline_residual(state, e), e.cov);
  }
  return c;
}

}  // namespace mtpgo
