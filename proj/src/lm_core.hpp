#pragma once

#include "mtpgo/factors.hpp"
#include "mtpgo/optimizer.hpp"

#include <Eigen/SparseCore>

#include <functional>
#include <vector>

namespace mtpgo::detail {

// State-agnostic Levenberg-Marquardt driver. The callbacks close over the
// parameter storage (tree rel poses or global-frame poses).
struct LmCallbacks {
  // Robust objective at the current state.
  std::function<double()> cost;
  // Gauss-Newton normal matrix (full symmetric, triplets into a dim x dim
  // system) and half-gradient g = sum rho' * J^T W r at the current state.
  std::function<void(std::vector<Eigen::Triplet<double>>&, Eigen::VectorXd&)> assemble;
  // Adds the step (yaw increments wrapped by the callback's owner).
  std::function<void(const Eigen::VectorXd&)> apply_step;
  // Saves / restores the current state; rollback returns to the last
  // checkpoint (the most recent linearization point).
  std::function<void()> checkpoint;
  std::function<void()> rollback;
};

// Runs damped Gauss-Newton until convergence, stall, or the iteration cap;
// `iterations` counts step attempts (accepted and rejected). Solves densely up
// to cfg.dense_variable_limit variables, sparsely above. Throws
// std::runtime_error when the initial cost is non-finite or the damped system
// never factorizes. num_variables is left for the caller to fill.
OptResult run_lm(int dim, const LmCallbacks& cb, const SolverConfig& cfg);

// Accumulates one whitened, Cauchy-reweighted edge into the normal equations:
// for each Jacobian block pair adds rho'(s) * Ja^T W Jb, and rho' * Ja^T W r
// into g. `blocks` pairs each 4x4 block with the variable's ordinal.
void accumulate_robust_edge(const Vec4& r, const Vec4& cov,
                            const std::vector<std::pair<int, Mat4>>& blocks, double cauchy_scale,
                            std::vector<Eigen::Triplet<double>>& trips, Eigen::VectorXd& g);

}  // namespace mtpgo::detail
