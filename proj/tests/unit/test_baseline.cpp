#include "mtpgo/baseline.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

using namespace mtpgo;
using oracle::TestRng;

namespace {

Pose4 noise_pose(TestRng& rng, double sigma_xy, double sigma_yaw) {
  return Pose4(rng.normal() * sigma_yaw, rng.normal() * sigma_xy, rng.normal() * sigma_xy,
               rng.normal() * sigma_xy);
}

struct Problem {
  std::vector<Pose4> truth;   // index = key
  std::vector<Pose4> initial; // dead-reckoned
  std::vector<RelEdge> edges;
};

Problem make_problem(TestRng& rng, int n, int loops, double sigma_xy, double sigma_yaw) {
  Problem p;
  p.truth.push_back(oracle::random_pose(rng, 1.0));
  for (int k = 1; k < n; ++k) {
    const Pose4 step(rng.uniform(-0.5, 0.5), rng.uniform(0.5, 1.5), rng.uniform(-0.3, 0.3),
                     rng.uniform(-0.1, 0.1));
    p.truth.push_back(compose(p.truth.back(), step));
  }
  p.initial.push_back(p.truth.front());
  for (int k = 1; k < n; ++k) {
    RelEdge e;
    e.i = static_cast<NodeKey>(k - 1);
    e.j = static_cast<NodeKey>(k);
    e.meas = compose(relative(p.truth[k - 1], p.truth[k]), noise_pose(rng, sigma_xy, sigma_yaw));
    e.kind = EdgeKind::sequential;
    p.initial.push_back(compose(p.initial.back(), e.meas));
    p.edges.push_back(e);
  }
  for (int l = 0; l < loops; ++l) {
    RelEdge e;
    e.i = rng.index(static_cast<std::uint64_t>(n) / 2);
    e.j = static_cast<NodeKey>(n - 1 - static_cast<int>(rng.index(static_cast<std::uint64_t>(n) / 3)));
    if (e.i == e.j) {
      continue;
    }
    e.meas = compose(relative(p.truth[e.i], p.truth[e.j]), noise_pose(rng, sigma_xy, sigma_yaw));
    e.kind = EdgeKind::loop;
    p.edges.push_back(e);
  }
  return p;
}

GlobalState state_of(const Problem& p) {
  GlobalState s;
  for (std::size_t k = 0; k < p.initial.size(); ++k) {
    s.insert(static_cast<NodeKey>(k), p.initial[k]);
  }
  return s;
}

}  // namespace

TEST_CASE("global state bookkeeping") {
  GlobalState s;
  s.insert(7, Pose4(0.1, 1, 2, 3));
  s.insert(3, Pose4::identity());
  CHECK(s.size() == 2);
  CHECK(s.keys().front() == 7);  // insertion order, not key order
  CHECK_THROWS(s.insert(7, Pose4::identity()));
  CHECK_THROWS(s.pose(99));
  CHECK_THROWS(s.remove(99));
  s.remove(3);
  CHECK(s.size() == 1);
  CHECK(!s.contains(3));
}

TEST_CASE("baseline residual matches the direct formula") {
  GlobalState s;
  s.insert(0, Pose4::identity());
  s.insert(1, Pose4(0.0, 1.0, 0.0, 0.0));
  RelEdge e;
  e.i = 0;
  e.j = 1;
  e.meas = Pose4(0.0, 1.0, 0.0, 0.0);
  CHECK(baseline_residual(s, e).norm() < 1e-15);

  e.meas = Pose4(0.1, 1.0, 0.0, 0.0);
  const Vec4 r = baseline_residual(s, e);
  CHECK(std::abs(r[0] - 0.1) < 1e-15);
  CHECK(r.tail<3>().norm() < 1e-15);

  TestRng rng(40);
  for (int c = 0; c < 100; ++c) {
    const Pose4 gi = oracle::random_pose(rng);
    const Pose4 gj = oracle::random_pose(rng);
    RelEdge re;
    re.i = 0;
    re.j = 1;
    re.meas = oracle::random_pose(rng);
    s.set_pose(0, gi);
    s.set_pose(1, gj);
    CHECK((baseline_residual(s, re) - residual_from_poses(gi, gj, re.meas)).norm() == 0.0);
  }
}

TEST_CASE("triangle with one inconsistent edge settles at a stationary point") {
  GlobalState s;
  s.insert(0, Pose4::identity());
  s.insert(1, Pose4(0.0, 1.0, 0.0, 0.0));
  s.insert(2, Pose4(0.0, 1.0, 1.0, 0.0));
  std::vector<RelEdge> edges(3);
  edges[0].i = 0;
  edges[0].j = 1;
  edges[0].meas = Pose4(0.0, 1.0, 0.0, 0.0);
  edges[1].i = 1;
  edges[1].j = 2;
  edges[1].meas = Pose4(0.0, 0.0, 1.0, 0.0);
  edges[2].i = 0;
  edges[2].j = 2;
  edges[2].meas = Pose4(0.0, 1.1, 0.9, 0.0);  // disagrees with the chain
  const SolverConfig cfg;
  const OptResult r = baseline_optimize(s, edges, cfg);
  CHECK(r.converged);
  CHECK(r.num_variables == 2);
  CHECK(r.cost_final < r.cost_initial);

  // finite-difference gradient of the objective is ~0 at the solution
  for (NodeKey k : {NodeKey{1}, NodeKey{2}}) {
    for (int comp = 0; comp < 4; ++comp) {
      const Pose4 base = s.pose(k);
      auto at = [&](double d) {
        Pose4 p = base;
        if (comp == 0) {
          p.yaw = base.yaw + d;
        } else {
          p.trans[comp - 1] += d;
        }
        s.set_pose(k, p);
        const double c = baseline_total_cost(s, edges, cfg);
        s.set_pose(k, base);
        return c;
      };
      CHECK(std::abs(at(1e-6) - at(-1e-6)) / 2e-6 < 1e-6);
    }
  }
}

TEST_CASE("gauge vertex never moves") {
  TestRng rng(41);
  Problem p = make_problem(rng, 10, 3, 0.05, 0.02);
  GlobalState s = state_of(p);
  const Pose4 gauge = s.pose(0);
  baseline_optimize(s, p.edges, SolverConfig{});
  CHECK(std::memcmp(&gauge.yaw, &s.pose(0).yaw, sizeof(double)) == 0);
  const Vec3 gt = gauge.trans;
  const Vec3 st = s.pose(0).trans;
  CHECK(std::memcmp(gt.data(), st.data(), sizeof(double) * 3) == 0);
}

TEST_CASE("tree all-states and global baseline reach the same cost") {
  TestRng rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 6 + static_cast<int>(rng.index(6));
    Problem p = make_problem(rng, n, 2, 0.04, 0.02);

    SolverConfig cfg;
    cfg.max_iterations = 200;
    cfg.tol_rel_decrease = 1e-13;
    cfg.tol_gradient = 1e-13;

    GlobalState s = state_of(p);
    const OptResult rb = baseline_optimize(s, p.edges, cfg);

    MemoryTree t;
    for (std::size_t k = 0; k < p.initial.size(); ++k) {
      t.insert(static_cast<NodeKey>(k), p.initial[k]);
    }
    const OptResult rt = optimize_lm(t, select_all_states(t, p.edges), p.edges, cfg);

    // same objective, same measurements, full freedom on both sides modulo
    // gauge: the minima must agree
    CHECK(rb.converged);
    CHECK(rt.converged);
    CHECK(std::abs(rb.cost_final - rt.cost_final) <
          1e-6 * std::max(1.0, std::abs(rb.cost_final)));

    // non-robust totals agree too
    double tree_chi2 = 0.0;
    for (const RelEdge& e : p.edges) {
      tree_chi2 += edge_chi2(edge_residual(t, e), e.cov);
    }
    CHECK(std::abs(baseline_total_chi2(s, p.edges) - tree_chi2) <
          1e-5 * std::max(1.0, tree_chi2));
  }
}
