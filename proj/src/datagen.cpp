#include "mtpgo/datagen.hpp"

#include "rng_util.hpp"

#include <numbers>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace mtpgo {

namespace {

struct StylePreset {
  int half_x;  // arena half extents, grid cells
  int half_y;
  double turn_prob;
  double loop_prob;  // chance to close a loop on a qualifying revisit
  std::size_t min_separation;
};

StylePreset preset(WorldStyle s) {
  switch (s) {
    case WorldStyle::manhattan:
      return {35, 35, 0.20, 0.25, 50};
    case WorldStyle::office:
      return {12, 12, 0.35, 0.40, 40};
    case WorldStyle::corridor:
      return {60, 2, 0.06, 0.35, 80};
  }
  throw std::invalid_argument("generate_world: unknown style");
}

constexpr int kDirX[4] = {1, 0, -1, 0};
constexpr int kDirY[4] = {0, 1, 0, -1};

std::uint64_t cell_key(int cx, int cy) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(cx)) << 32) |
         static_cast<std::uint32_t>(cy);
}

}  // namespace

Dataset generate_world(const GenConfig& cfg) {
  if (cfg.nodes < 2) {
    throw std::invalid_argument("generate_world: need at least 2 nodes");
  }
  const StylePreset ps = preset(cfg.style);
  detail::Rng rng(cfg.seed);

  const Vec3 seq_info(1.0 / (cfg.odom_sigma_xy * cfg.odom_sigma_xy),
                      1.0 / (cfg.odom_sigma_xy * cfg.odom_sigma_xy),
                      1.0 / (cfg.odom_sigma_yaw * cfg.odom_sigma_yaw));
  const Vec3 loop_info(1.0 / (cfg.loop_sigma_xy * cfg.loop_sigma_xy),
                       1.0 / (cfg.loop_sigma_xy * cfg.loop_sigma_xy),
                       1.0 / (cfg.loop_sigma_yaw * cfg.loop_sigma_yaw));

  Dataset ds;
  ds.name = cfg.style == WorldStyle::manhattan   ? "manhattan"
            : cfg.style == WorldStyle::office    ? "office"
                                                 : "corridor";

  std::vector<Pose4> gt;  // ground-truth poses
  gt.reserve(cfg.nodes);
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> visited;

  int cx = 0;
  int cy = 0;
  int heading = 0;  // quarter turns from +x
  gt.emplace_back(0.0, 0.0, 0.0, 0.0);
  visited[cell_key(cx, cy)].push_back(0);

  Pose4 odo;  // dead-reckoned pose fed to the vertices
  ds.vertices.push_back({0, odo});

  auto in_arena = [&](int x, int y) {
    return x >= -ps.half_x && x <= ps.half_x && y >= -ps.half_y && y <= ps.half_y;
  };

  for (std::size_t k = 1; k < cfg.nodes; ++k) {
    // Maybe turn, then keep turning until the next cell stays inside.
    const double r = rng.uniform(0.0, 1.0);
    if (r < ps.turn_prob / 2.0) {
      heading = (heading + 1) % 4;
    } else if (r < ps.turn_prob) {
      heading = (heading + 3) % 4;
    }
    for (int tries = 0; !in_arena(cx + kDirX[heading], cy + kDirY[heading]); ++tries) {
      heading = (heading + 1) % 4;
      if (tries > 4) {
        throw std::logic_error("generate_world: walker is stuck");
      }
    }
    cx += kDirX[heading];
    cy += kDirY[heading];
    gt.emplace_back(wrap_yaw(heading * std::numbers::pi / 2.0), cx * cfg.step, cy * cfg.step,
                    0.0);

    // Sequential (odometry) edge k-1 -> k.
    const Pose4 gt_rel = relative(gt[k - 1], gt[k]);
    RelEdge seq;
    seq.i = static_cast<NodeKey>(k - 1);
    seq.j = static_cast<NodeKey>(k);
    seq.meas = Pose4(gt_rel.yaw + rng.normal(cfg.odom_sigma_yaw),
                     gt_rel.trans.x() + rng.normal(cfg.odom_sigma_xy),
                     gt_rel.trans.y() + rng.normal(cfg.odom_sigma_xy), 0.0);
    seq.cov = default_sigma_tree();
    seq.kind = EdgeKind::sequential;
    ds.edges.push_back(seq);
    ds.edge_info_diag.push_back(seq_info);

    odo = compose(odo, seq.meas);
    ds.vertices.push_back({static_cast<NodeKey>(k), odo});

    // Loop closure against the earliest old-enough visit to this cell.
    auto& here = visited[cell_key(cx, cy)];
    for (const std::size_t j : here) {
      if (k - j < ps.min_separation) {
        break;  // visits are stored in order; later ones are even younger
      }
      if (rng.bernoulli(ps.loop_prob)) {
        const Pose4 lrel = relative(gt[j], gt[k]);
        RelEdge loop;
        loop.i = static_cast<NodeKey>(j);
        loop.j = static_cast<NodeKey>(k);
        loop.meas = Pose4(lrel.yaw + rng.normal(cfg.loop_sigma_yaw),
                          lrel.trans.x() + rng.normal(cfg.loop_sigma_xy),
                          lrel.trans.y() + rng.normal(cfg.loop_sigma_xy), 0.0);
        loop.cov = default_sigma_tree();
        loop.kind = EdgeKind::loop;
        ds.edges.push_back(loop);
        ds.edge_info_diag.push_back(loop_info);
      }
      break;  // at most one candidate considered per node
    }
    here.push_back(k);
  }
  return ds;
}

WorldStyle parse_world_style(const std::string& s) {
  if (s == "manhattan") {
    return WorldStyle::manhattan;
  }
  if (s == "office") {
    return WorldStyle::office;
  }
  if (s == "corridor") {
    return WorldStyle::corridor;
  }
  throw std::invalid_argument("unknown world style: " + s);
}

}  // namespace mtpgo
