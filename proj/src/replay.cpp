#include "mtpgo/replay.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace mtpgo {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Measurement re-oriented to run away from `from`.
Pose4 oriented_meas(const RelEdge& e, NodeKey from) {
  return e.i == from ? e.meas : inverse(e.meas);
}

bool links(const RelEdge& e, NodeKey a, NodeKey b) {
  return (e.i == a && e.j == b) || (e.i == b && e.j == a);
}

// Drops one mid-trajectory node: its two sequential edges merge into one
// composed measurement (covariances summed — a diagonal approximation), loops
// touching it are discarded.
void prune_one(MemoryTree& tree, std::vector<RelEdge>& running) {
  const std::vector<NodeKey> keys = tree.keys_inorder();
  if (keys.size() < 3) {
    return;
  }
  const std::size_t mid = keys.size() / 2;
  const NodeKey victim = keys[mid];
  const NodeKey before = keys[mid - 1];
  const NodeKey after = keys[mid + 1];

  const RelEdge* left = nullptr;
  const RelEdge* right = nullptr;
  for (const RelEdge& e : running) {
    if (e.kind == EdgeKind::sequential && links(e, before, victim)) {
      left = &e;
    } else if (e.kind == EdgeKind::sequential && links(e, victim, after)) {
      right = &e;
    }
  }
  std::vector<RelEdge> kept;
  kept.reserve(running.size());
  for (const RelEdge& e : running) {
    if (e.i != victim && e.j != victim) {
      kept.push_back(e);
    }
  }
  if (left != nullptr && right != nullptr) {
    RelEdge merged;
    merged.i = before;
    merged.j = after;
    merged.meas = compose(oriented_meas(*left, before), oriented_meas(*right, victim));
    merged.cov = left->cov + right->cov;
    merged.kind = EdgeKind::sequential;
    kept.push_back(merged);
  }
  running = std::move(kept);
  tree.remove(victim);
}

}  // namespace

double trajectory_chi2(std::span<const NodeKey> keys, std::span<const Pose4> poses,
                       std::span<const RelEdge> edges) {
  std::unordered_map<NodeKey, const Pose4*> lookup;
  lookup.reserve(keys.size());
  for (std::size_t k = 0; k < keys.size(); ++k) {
    lookup.emplace(keys[k], &poses[k]);
  }
  double c = 0.0;
  for (const RelEdge& e : edges) {
    const auto gi = lookup.find(e.i);
    const auto gj = lookup.find(e.j);
    if (gi == lookup.end() || gj == lookup.end()) {
      throw std::invalid_argument("trajectory_chi2: edge endpoint missing from trajectory");
    }
    c += edge_chi2(residual_from_poses(*gi->second, *gj->second, e.meas), e.cov);
  }
  return c;
}

ReplayResult replay(const Dataset& ds, const ReplayOptions& opt) {
  const bool is_tree = opt.method != Method::baseline;
  if (opt.gate && !is_tree) {
    throw std::invalid_argument("replay: the gate requires a tree method");
  }
  if (opt.gate && opt.batch) {
    throw std::invalid_argument("replay: batch mode has no per-loop gate");
  }
  if (opt.batch &&
      (opt.method == Method::tree_full_path || opt.method == Method::tree_top_down)) {
    throw std::invalid_argument("replay: batch mode supports baseline and tree-all only");
  }
  if (opt.prune_every > 0 && (!is_tree || opt.batch)) {
    throw std::invalid_argument("replay: pruning requires an incremental tree method");
  }

  ReplayResult res;
  if (ds.vertices.empty()) {
    return res;
  }

  Dataset work = ds;
  apply_sigma_mode(work, opt.sigma_mode, opt.sigma_tree);
  classify_edges(work);

  const std::size_t n = work.vertices.size();
  std::unordered_map<NodeKey, std::vector<std::size_t>> avail;  // edge idx by later endpoint
  for (std::size_t k = 0; k < work.edges.size(); ++k) {
    avail[std::max(work.edges[k].i, work.edges[k].j)].push_back(k);
  }

  // The odometry chain edge feeding each vertex's insertion pose.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> chain_idx(n, kNone);
  for (std::size_t v = 1; v < n; ++v) {
    const NodeKey prev = work.vertices[v - 1].id;
    const NodeKey cur = work.vertices[v].id;
    if (const auto it = avail.find(cur); it != avail.end()) {
      for (const std::size_t k : it->second) {
        if (work.edges[k].kind == EdgeKind::sequential && links(work.edges[k], prev, cur)) {
          chain_idx[v] = k;
          break;
        }
      }
    }
    if (chain_idx[v] == kNone) {
      throw std::runtime_error("replay: disconnected odometry chain between ids " +
                               std::to_string(prev) + " and " + std::to_string(cur));
    }
  }

  // Reference cost of never optimizing: dead-reckoned poses, every edge.
  {
    std::vector<NodeKey> ids(n);
    std::vector<Pose4> odo(n);
    ids[0] = work.vertices[0].id;
    odo[0] = work.vertices[0].pose;
    for (std::size_t v = 1; v < n; ++v) {
      ids[v] = work.vertices[v].id;
      odo[v] = compose(odo[v - 1], oriented_meas(work.edges[chain_idx[v]], ids[v - 1]));
    }
    res.odometry_chi2 = trajectory_chi2(ids, odo, work.edges);
  }

  MemoryTree tree;
  GlobalState gstate;
  std::vector<RelEdge> running;
  running.reserve(work.edges.size());

  const auto insert_node = [&](NodeKey id, const Pose4& pose) {
    if (is_tree) {
      tree.insert(id, pose);
    } else {
      gstate.insert(id, pose);
    }
  };
  insert_node(work.vertices[0].id, work.vertices[0].pose);

  std::size_t event_idx = 0;
  for (std::size_t v = 1; v < n; ++v) {
    const NodeKey prev = work.vertices[v - 1].id;
    const NodeKey cur = work.vertices[v].id;
    const RelEdge& chain = work.edges[chain_idx[v]];
    const Pose4 prev_global = is_tree ? tree.global_pose(prev) : gstate.pose(prev);
    insert_node(cur, compose(prev_global, oriented_meas(chain, prev)));
    running.push_back(chain);

    for (const std::size_t k : avail[cur]) {
      if (k == chain_idx[v]) {
        continue;
      }
      const RelEdge& e = work.edges[k];
      if (opt.prune_every > 0 && !tree.contains(e.i == cur ? e.j : e.i)) {
        continue;  // the other endpoint was pruned away
      }
      if (e.kind == EdgeKind::sequential || opt.batch) {
        running.push_back(e);
        continue;
      }

      EventRecord rec;
      rec.event = event_idx++;
      rec.i = e.i;
      rec.j = e.j;
      rec.method = opt.method;
      rec.dataset_edge = k;
      rec.nodes_at_event = is_tree ? tree.size() : gstate.size();

      if (!is_tree) {
        running.push_back(e);
        rec.cost0 = baseline_total_cost(gstate, running, opt.solver);
        const auto t0 = Clock::now();
        const OptResult r = baseline_optimize(gstate, running, opt.solver);
        rec.wall_s = seconds_since(t0);
        rec.num_vars = r.num_variables;
        rec.iters = r.iterations;
        rec.cost1 = baseline_total_cost(gstate, running, opt.solver);
      } else if (opt.gate) {
        running.push_back(e);
        rec.cost0 = total_cost(tree, running, opt.solver);
        running.pop_back();
        const auto t0 = Clock::now();
        const GateResult gr = add_loop_with_gate(tree, e, running, opt.method, opt.solver);
        rec.wall_s = seconds_since(t0);
        rec.accepted = gr.accepted;
        rec.num_vars = gr.opt.num_variables;
        rec.iters = gr.opt.iterations;
        rec.cost1 = total_cost(tree, running, opt.solver);
      } else {
        running.push_back(e);
        rec.cost0 = total_cost(tree, running, opt.solver);
        const auto t0 = Clock::now();
        OptResult r;
        switch (opt.method) {
          case Method::tree_full_path:
            r = optimize_lm(tree, select_full_path(tree, e, running), running, opt.solver);
            break;
          case Method::tree_all:
            r = optimize_lm(tree, select_all_states(tree, running), running, opt.solver);
            break;
          default:
            r = optimize_top_down(tree, e, running, opt.solver);
            break;
        }
        rec.wall_s = seconds_since(t0);
        rec.num_vars = r.num_variables;
        rec.iters = r.iterations;
        rec.cost1 = total_cost(tree, running, opt.solver);
      }
      res.total_wall_s += rec.wall_s;
      res.events.push_back(rec);
    }

    if (opt.prune_every > 0 && (v + 1) % opt.prune_every == 0) {
      prune_one(tree, running);
    }
  }

  if (opt.batch) {
    EventRecord rec;
    rec.event = event_idx++;
    rec.method = opt.method;
    rec.nodes_at_event = is_tree ? tree.size() : gstate.size();
    if (is_tree) {
      rec.cost0 = total_cost(tree, running, opt.solver);
      const auto t0 = Clock::now();
      const OptResult r = optimize_lm(tree, select_all_states(tree, running), running, opt.solver);
      rec.wall_s = seconds_since(t0);
      rec.num_vars = r.num_variables;
      rec.iters = r.iterations;
      rec.cost1 = total_cost(tree, running, opt.solver);
    } else {
      rec.cost0 = baseline_total_cost(gstate, running, opt.solver);
      const auto t0 = Clock::now();
      const OptResult r = baseline_optimize(gstate, running, opt.solver);
      rec.wall_s = seconds_since(t0);
      rec.num_vars = r.num_variables;
      rec.iters = r.iterations;
      rec.cost1 = baseline_total_cost(gstate, running, opt.solver);
    }
    res.total_wall_s += rec.wall_s;
    res.events.push_back(rec);
  }

  if (is_tree) {
    res.traj_keys = tree.keys_inorder();
    res.trajectory.reserve(res.traj_keys.size());
    for (const NodeKey k : res.traj_keys) {
      res.trajectory.push_back(tree.global_pose(k));
    }
    res.final_cost_robust = total_cost(tree, running, opt.solver);
    res.final_chi2 = total_chi2(tree, running);
    res.tree_height = tree.height();
    res.final_nodes = tree.size();
  } else {
    res.traj_keys = gstate.keys();
    std::sort(res.traj_keys.begin(), res.traj_keys.end());
    res.trajectory.reserve(res.traj_keys.size());
    for (const NodeKey k : res.traj_keys) {
      res.trajectory.push_back(gstate.pose(k));
    }
    res.final_cost_robust = baseline_total_cost(gstate, running, opt.solver);
    res.final_chi2 = baseline_total_chi2(gstate, running);
    res.final_nodes = gstate.size();
  }
  return res;
}

RobustnessReport run_robustness(const Dataset& ds, double fraction, std::uint64_t seed,
                                const ReplayOptions& base) {
  RobustnessReport rep;
  Dataset corrupted = ds;
  rep.corrupted = corrupt_loops(corrupted, fraction, seed);

  ReplayOptions gated_opt = base;
  gated_opt.gate = true;
  ReplayOptions ungated_opt = base;
  ungated_opt.gate = false;
  rep.gated = replay(corrupted, gated_opt);
  rep.ungated = replay(corrupted, ungated_opt);

  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t n_corr = 0;
  std::size_t n_clean = 0;
  for (const EventRecord& ev : rep.gated.events) {
    const bool corr =
        std::binary_search(rep.corrupted.begin(), rep.corrupted.end(), ev.dataset_edge);
    if (corr) {
      ++n_corr;
      tp += ev.accepted ? 0 : 1;
    } else {
      ++n_clean;
      fp += ev.accepted ? 0 : 1;
    }
  }
  rep.tp_rejection_rate = n_corr > 0 ? static_cast<double>(tp) / n_corr : 0.0;
  rep.fp_rejection_rate = n_clean > 0 ? static_cast<double>(fp) / n_clean : 0.0;

  // Clean-map quality: the uncorrupted edges scored at each final trajectory.
  Dataset clean = ds;
  apply_sigma_mode(clean, base.sigma_mode, base.sigma_tree);
  std::vector<RelEdge> clean_edges;
  clean_edges.reserve(clean.edges.size() - rep.corrupted.size());
  for (std::size_t k = 0; k < clean.edges.size(); ++k) {
    if (!std::binary_search(rep.corrupted.begin(), rep.corrupted.end(), k)) {
      clean_edges.push_back(clean.edges[k]);
    }
  }
  rep.gated_clean_chi2 = trajectory_chi2(rep.gated.traj_keys, rep.gated.trajectory, clean_edges);
  rep.ungated_clean_chi2 =
      trajectory_chi2(rep.ungated.traj_keys, rep.ungated.trajectory, clean_edges);
  return rep;
}

void emit_stats(std::ostream& out, const ReplayResult& result) {
  out << "event,i,j,method,wall_s,num_vars,iters,cost0,cost1,accepted\n";
  char buf[320];
  for (const EventRecord& ev : result.events) {
    std::snprintf(buf, sizeof buf, "%zu,%llu,%llu,%s,%.6f,%d,%d,%.17g,%.17g,%d\n", ev.event,
                  static_cast<unsigned long long>(ev.i), static_cast<unsigned long long>(ev.j),
                  method_name(ev.method), ev.wall_s, ev.num_vars, ev.iters, ev.cost0, ev.cost1,
                  ev.accepted ? 1 : 0);
    out << buf;
  }
}

const char* method_name(Method m) {
  switch (m) {
    case Method::baseline:
      return "baseline";
    case Method::tree_all:
      return "tree-all";
    case Method::tree_full_path:
      return "tree-full-path";
    case Method::tree_top_down:
      return "tree-top-down";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "baseline") {
    return Method::baseline;
  }
  if (name == "tree-all") {
    return Method::tree_all;
  }
  if (name == "tree-full-path") {
    return Method::tree_full_path;
  }
  if (name == "tree-top-down") {
    return Method::tree_top_down;
  }
  throw std::invalid_argument("unknown method: " + std::string(name));
}

}  // namespace mtpgo
