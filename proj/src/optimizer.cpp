#include "mtpgo/optimizer.hpp"

#include "lm_core.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace mtpgo {

OptResult optimize_lm(MemoryTree& tree, const VariableSelection& sel,
                      std::span<const RelEdge> edges, const SolverConfig& cfg) {
  if (sel.variables.empty()) {
    throw std::invalid_argument("optimize_lm: empty variable selection");
  }
  const int num_vars = static_cast<int>(sel.variables.size());
  std::unordered_map<NodeKey, int> ordinal;
  ordinal.reserve(sel.variables.size());
  for (int k = 0; k < num_vars; ++k) {
    ordinal.emplace(sel.variables[k], k);
  }

  detail::LmCallbacks cb;
  cb.cost = [&] {
    double c = 0.0;
    for (std::size_t idx : sel.edge_indices) {
      const RelEdge& e = edges[idx];
      c += cauchy_cost(edge_chi2(edge_residual(tree, e), e.cov), cfg.cauchy_scale);
    }
    return c;
  };
  cb.assemble = [&](std::vector<Eigen::Triplet<double>>& trips, Eigen::VectorXd& g) {
    for (std::size_t idx : sel.edge_indices) {
      const RelEdge& e = edges[idx];
      const EdgeLinearization lin = edge_jacobian(tree, e, ordinal);
      detail::accumulate_robust_edge(lin.r, e.cov, lin.blocks, cfg.cauchy_scale, trips, g);
    }
  };
  cb.apply_step = [&](const Eigen::VectorXd& dx) {
    for (int k = 0; k < num_vars; ++k) {
      const Pose4& p = tree.rel_pose(sel.variables[k]);
      tree.set_rel_pose(sel.variables[k],
                        Pose4(p.yaw + dx[4 * k], p.trans + dx.segment<3>(4 * k + 1)));
    }
  };
  std::vector<Pose4> saved(sel.variables.size());
  cb.checkpoint = [&] {
    for (int k = 0; k < num_vars; ++k) {
      saved[k] = tree.rel_pose(sel.variables[k]);
    }
  };
  cb.rollback = [&] {
    for (int k = 0; k < num_vars; ++k) {
      tree.set_rel_pose(sel.variables[k], saved[k]);
    }
  };

  OptResult res = detail::run_lm(4 * num_vars, cb, cfg);
  res.num_variables = num_vars;
  return res;
}

namespace {

// Shared frontier loop. When gate_gamma is set the candidate loop is on
// trial: a frontier that satisfies the stop rule while the loop still fails
// its chi-square test does not end the expansion — the verdict must reflect
// what the whole path could absorb, not a frontier that was never asked to.
OptResult run_top_down(MemoryTree& tree, const RelEdge& loop, std::span<const RelEdge> edges,
                       const SolverConfig& cfg, const double* gate_gamma) {
  OptResult agg;
  TopDownFrontiers frontiers(tree, loop, edges);
  bool first_frontier = true;
  // Each frontier's selection covers every edge its variables can move, and
  // the selections only grow, so the widest frontier's local costs plus the
  // decreases banked by the earlier ones reproduce the session's cost change
  // exactly — no full-graph pass needed.
  double banked_decrease = 0.0;
  while (auto sel = frontiers.next()) {
    const OptResult r = optimize_lm(tree, *sel, edges, cfg);
    agg.iterations += r.iterations;
    agg.num_variables = std::max(agg.num_variables, r.num_variables);
    agg.productive_steps += r.productive_steps;
    agg.significant_steps += r.significant_steps;
    agg.converged = r.converged;
    agg.cost_initial = r.cost_initial + banked_decrease;
    agg.cost_final = r.cost_final;
    banked_decrease += r.cost_initial - r.cost_final;
    if (first_frontier) {
      agg.first_step_accepted = r.first_step_accepted;
      first_frontier = false;
    }
    bool stop = cfg.topdown_rule == TopDownRule::strict
                    ? (r.iterations == 0 && r.converged) ||
                          (r.iterations == 1 && r.first_step_accepted && r.converged)
                    : (r.converged && r.significant_steps <= 1);
    if (stop && gate_gamma != nullptr &&
        edge_chi2(edge_residual(tree, loop), loop.cov) >= *gate_gamma) {
      stop = false;
    }
    if (stop) {
      break;
    }
  }
  return agg;
}

}  // namespace

OptResult optimize_top_down(MemoryTree& tree, const RelEdge& loop,
                            std::span<const RelEdge> edges, const SolverConfig& cfg) {
  return run_top_down(tree, loop, edges, cfg, nullptr);
}

GateResult add_loop_with_gate(MemoryTree& tree, const RelEdge& loop, std::vector<RelEdge>& edges,
                              Method method, const SolverConfig& cfg) {
  if (method == Method::baseline) {
    throw std::invalid_argument("add_loop_with_gate: gate applies to tree methods only");
  }
  // The solve can only move its variables: the loop path for the path-bound
  // methods, any non-root node for all-states.
  const PathSnapshot snap = method == Method::tree_all ? tree.snapshot(tree.keys_inorder())
                                                       : tree.snapshot_path(loop.i, loop.j);
  edges.push_back(loop);
  const std::span<const RelEdge> sp(edges.data(), edges.size());
  GateResult gr;
  switch (method) {
    case Method::tree_full_path:
      gr.opt = optimize_lm(tree, select_full_path(tree, loop, sp), sp, cfg);
      break;
    case Method::tree_all:
      gr.opt = optimize_lm(tree, select_all_states(tree, sp), sp, cfg);
      break;
    case Method::tree_top_down:
      gr.opt = run_top_down(tree, loop, sp, cfg, &cfg.gamma);
      break;
    case Method::baseline:
      break;  // unreachable
  }
  gr.loop_chi2 = edge_chi2(edge_residual(tree, loop), loop.cov);
  if (gr.loop_chi2 < cfg.gamma) {
    gr.accepted = true;
  } else {
    tree.restore(snap);
    edges.pop_back();
  }
  return gr;
}

double total_cost(const MemoryTree& tree, std::span<const RelEdge> edges,
                  const SolverConfig& cfg) {
  double c = 0.0;
  for (const RelEdge& e : edges) {
    c += cauchy_cost(edge_chi2(edge_residual(tree, e), e.cov), cfg.cauchy_scale);
  }
  return c;
}

double total_chi2(const MemoryTree& tree, std::span<const RelEdge> edges) {
  double c = 0.0;
  for (const RelEdge& e : edges) {
    c += edge_chi2(edge_residual(tree, e), e.cov);
  }
  return c;
}

}  // namespace mtpgo
