#pragma once

#include "mtpgo/factors.hpp"

#include <span>
#include <vector>

namespace mtpgo {

// Stop expanding top-down frontiers when a frontier's solve converged with at
// most one significant step (default), or only when it literally accepted its
// first step and terminated within one iteration.
enum class TopDownRule { productive, strict };

struct SolverConfig {
  int max_iterations = 50;
  double lambda_init = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 0.5;
  double tol_rel_decrease = 1e-8;
  double tol_gradient = 1e-10;
  double cauchy_scale = 1.0;
  double gamma = 9.4877;  // 0.95 quantile of chi-square with 4 dof
  TopDownRule topdown_rule = TopDownRule::productive;
  // Relative cost decrease an accepted step needs before the top-down stop
  // rule counts it as significant; polish steps below this do not force a
  // larger frontier.
  double topdown_sig_decrease = 0.5;
  // Variable counts at or below this solve dense; larger problems assemble
  // sparse normal equations.
  int dense_variable_limit = 200;
};

struct OptResult {
  int iterations = 0;  // LM step attempts, accepted and rejected
  int num_variables = 0;
  double cost_initial = 0.0;
  double cost_final = 0.0;
  bool converged = false;
  bool first_step_accepted = false;
  // Accepted steps whose relative cost decrease was at least tol_rel_decrease.
  int productive_steps = 0;
  // Accepted steps whose relative cost decrease was at least
  // topdown_sig_decrease; drives the default top-down stop rule.
  int significant_steps = 0;
};

enum class Method { baseline, tree_all, tree_full_path, tree_top_down };

// Robust (Cauchy-reweighted) Levenberg-Marquardt over the selected variables.
// Optimized rel poses are written back into the tree; cost_final never
// exceeds cost_initial.
OptResult optimize_lm(MemoryTree& tree, const VariableSelection& sel,
                      std::span<const RelEdge> edges, const SolverConfig& cfg);

// Expanding-frontier optimization around the loop's LCA. cost_initial and
// cost_final cover the edges the executed frontiers could affect (the widest
// frontier's edge set) — edges beyond it are untouched by construction;
// num_variables is the largest frontier solved; iterations aggregates over
// frontiers.
OptResult optimize_top_down(MemoryTree& tree, const RelEdge& loop,
                            std::span<const RelEdge> edges, const SolverConfig& cfg);

struct GateResult {
  bool accepted = false;
  double loop_chi2 = 0.0;  // whitened squared residual of the new loop, post-optimization
  OptResult opt;
};

// Appends `loop` to `edges`, optimizes with the chosen tree method, then
// applies the chi-square gate: accepted when the loop's whitened squared
// residual stays below cfg.gamma, otherwise every rel pose the solve could
// have touched is rolled back bit-identically and the loop is removed again.
// Under the gate the top-down frontier keeps expanding while the candidate
// loop still fails its test, so a loop is only rejected once the whole path
// had a chance to absorb it.
GateResult add_loop_with_gate(MemoryTree& tree, const RelEdge& loop, std::vector<RelEdge>& edges,
                              Method method, const SolverConfig& cfg);

// Robust objective over the given edges at the tree's current state.
double total_cost(const MemoryTree& tree, std::span<const RelEdge> edges, const SolverConfig& cfg);
// Non-robust whitened squared error total.
double total_chi2(const MemoryTree& tree, std::span<const RelEdge> edges);

}  // namespace mtpgo
