#include "mtpgo/dataset.hpp"

#include "rng_util.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace mtpgo {

namespace {

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("g2o parse error, line " + std::to_string(line_no) + ": " + what);
}

void warn(std::vector<std::string>* sink, std::size_t line_no, const std::string& what) {
  std::string msg = "g2o line " + std::to_string(line_no) + ": " + what;
  if (sink != nullptr) {
    sink->push_back(std::move(msg));
  } else {
    std::cerr << "warning: " << msg << '\n';
  }
}

bool is_sequential(NodeKey i, NodeKey j) { return (i > j ? i - j : j - i) == 1; }

double read_num(std::istringstream& ls, std::size_t line_no, const char* field) {
  double v = 0.0;
  if (!(ls >> v)) {
    parse_fail(line_no, std::string("malformed numeric field '") + field + "'");
  }
  return v;
}

NodeKey read_id(std::istringstream& ls, std::size_t line_no, const char* field) {
  long long v = 0;
  if (!(ls >> v) || v < 0) {
    parse_fail(line_no, std::string("malformed vertex id field '") + field + "'");
  }
  return static_cast<NodeKey>(v);
}

void expect_line_end(std::istringstream& ls, std::size_t line_no) {
  std::string extra;
  if (ls >> extra) {
    parse_fail(line_no, "unexpected trailing data '" + extra + "'");
  }
}

// Dead-reckons vertices for files that carry edges only: identity at the
// lowest id, then each next id through its sequential edge.
void synthesize_vertices(Dataset& ds, const std::vector<std::size_t>& edge_lines) {
  std::map<NodeKey, std::pair<std::size_t, bool>> chain;  // from-key -> (edge idx, forward)
  NodeKey lo = ~NodeKey{0};
  NodeKey hi = 0;
  for (std::size_t k = 0; k < ds.edges.size(); ++k) {
    const RelEdge& e = ds.edges[k];
    lo = std::min(lo, std::min(e.i, e.j));
    hi = std::max(hi, std::max(e.i, e.j));
    if (is_sequential(e.i, e.j)) {
      const NodeKey from = std::min(e.i, e.j);
      chain.emplace(from, std::make_pair(k, e.i < e.j));
    }
  }
  Pose4 g;  // identity start
  ds.vertices.push_back({lo, g});
  for (NodeKey id = lo; id < hi; ++id) {
    const auto it = chain.find(id);
    if (it == chain.end()) {
      parse_fail(edge_lines.empty() ? 0 : edge_lines.back(),
                 "no sequential edge between ids " + std::to_string(id) + " and " +
                     std::to_string(id + 1) + " to synthesize vertices from");
    }
    const auto [idx, forward] = it->second;
    const Pose4& m = ds.edges[idx].meas;
    g = forward ? compose(g, m) : compose(g, inverse(m));
    ds.vertices.push_back({id + 1, g});
  }
}

}  // namespace

Vec4 default_sigma_tree() {
  return Vec4(kDefaultSigmaTree[0], kDefaultSigmaTree[1], kDefaultSigmaTree[2],
              kDefaultSigmaTree[3]);
}

Dataset parse_g2o_2d(std::istream& in, std::string name, std::vector<std::string>* warnings) {
  Dataset ds;
  ds.name = std::move(name);
  std::unordered_set<NodeKey> vertex_ids;
  std::vector<std::size_t> edge_lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) {
      continue;  // blank line
    }
    if (tag == "VERTEX_SE2") {
      const NodeKey id = read_id(ls, line_no, "id");
      const double x = read_num(ls, line_no, "x");
      const double y = read_num(ls, line_no, "y");
      const double th = read_num(ls, line_no, "theta");
      expect_line_end(ls, line_no);
      if (!vertex_ids.insert(id).second) {
        parse_fail(line_no, "duplicate vertex id " + std::to_string(id));
      }
      ds.vertices.push_back({id, Pose4(th, x, y, 0.0)});
    } else if (tag == "EDGE_SE2") {
      const NodeKey i = read_id(ls, line_no, "i");
      const NodeKey j = read_id(ls, line_no, "j");
      const double dx = read_num(ls, line_no, "dx");
      const double dy = read_num(ls, line_no, "dy");
      const double dth = read_num(ls, line_no, "dtheta");
      const double i11 = read_num(ls, line_no, "I11");
      read_num(ls, line_no, "I12");
      read_num(ls, line_no, "I13");
      const double i22 = read_num(ls, line_no, "I22");
      read_num(ls, line_no, "I23");
      const double i33 = read_num(ls, line_no, "I33");
      expect_line_end(ls, line_no);
      if (i == j) {
        parse_fail(line_no, "self edge on id " + std::to_string(i));
      }
      RelEdge e;
      e.i = i;
      e.j = j;
      e.meas = Pose4(dth, dx, dy, 0.0);
      e.cov = default_sigma_tree();
      e.kind = is_sequential(i, j) ? EdgeKind::sequential : EdgeKind::loop;
      ds.edges.push_back(e);
      ds.edge_info_diag.emplace_back(i11, i22, i33);
      edge_lines.push_back(line_no);
    } else {
      warn(warnings, line_no, "skipping unrecognized record type '" + tag + "'");
    }
  }

  if (ds.vertices.empty() && !ds.edges.empty()) {
    synthesize_vertices(ds, edge_lines);
    for (const Vertex& v : ds.vertices) {
      vertex_ids.insert(v.id);
    }
  }
  for (std::size_t k = 0; k < ds.edges.size(); ++k) {
    for (const NodeKey end : {ds.edges[k].i, ds.edges[k].j}) {
      if (!vertex_ids.contains(end)) {
        parse_fail(edge_lines[k], "edge references missing vertex " + std::to_string(end));
      }
    }
  }
  std::sort(ds.vertices.begin(), ds.vertices.end(),
            [](const Vertex& a, const Vertex& b) { return a.id < b.id; });
  return ds;
}

Dataset parse_g2o_2d(const std::filesystem::path& file, std::vector<std::string>* warnings) {
  std::ifstream in(file);
  if (!in) {
    throw std::runtime_error("cannot open dataset file: " + file.string());
  }
  return parse_g2o_2d(in, file.stem().string(), warnings);
}

void write_g2o_2d(std::ostream& out, const Dataset& ds) {
  char buf[256];
  for (const Vertex& v : ds.vertices) {
    std::snprintf(buf, sizeof buf, "VERTEX_SE2 %llu %.17g %.17g %.17g\n",
                  static_cast<unsigned long long>(v.id), v.pose.trans.x(), v.pose.trans.y(),
                  v.pose.yaw);
    out << buf;
  }
  for (std::size_t k = 0; k < ds.edges.size(); ++k) {
    const RelEdge& e = ds.edges[k];
    const Vec3 info =
        k < ds.edge_info_diag.size() ? ds.edge_info_diag[k] : Vec3::Zero();
    std::snprintf(buf, sizeof buf, "EDGE_SE2 %llu %llu %.17g %.17g %.17g %.17g 0 0 %.17g 0 %.17g\n",
                  static_cast<unsigned long long>(e.i), static_cast<unsigned long long>(e.j),
                  e.meas.trans.x(), e.meas.trans.y(), e.meas.yaw, info.x(), info.y(), info.z());
    out << buf;
  }
}

EdgePartition classify_edges(Dataset& ds) {
  EdgePartition part;
  for (std::size_t k = 0; k < ds.edges.size(); ++k) {
    RelEdge& e = ds.edges[k];
    e.kind = is_sequential(e.i, e.j) ? EdgeKind::sequential : EdgeKind::loop;
    (e.kind == EdgeKind::sequential ? part.sequential : part.loops).push_back(k);
  }
  return part;
}

void apply_sigma_mode(Dataset& ds, SigmaMode mode, const Vec4& sigma_tree) {
  for (std::size_t k = 0; k < ds.edges.size(); ++k) {
    Vec4 cov = sigma_tree;
    if (mode == SigmaMode::dataset && k < ds.edge_info_diag.size()) {
      const Vec3& info = ds.edge_info_diag[k];  // (x, y, yaw) information
      if (info.allFinite() && (info.array() > 0.0).all()) {
        cov[0] = 1.0 / info.z();
        cov[1] = 1.0 / info.x();
        cov[2] = 1.0 / info.y();
      }
    }
    ds.edges[k].cov = cov;
  }
}

std::vector<std::size_t> corrupt_loops(Dataset& ds, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw std::invalid_argument("corrupt_loops: fraction outside [0, 1]");
  }
  std::vector<std::size_t> loops;
  for (std::size_t k = 0; k < ds.edges.size(); ++k) {
    if (!is_sequential(ds.edges[k].i, ds.edges[k].j)) {
      loops.push_back(k);
    }
  }
  const std::size_t count = static_cast<std::size_t>(fraction * static_cast<double>(loops.size()));
  detail::Rng rng(seed);
  // Partial Fisher-Yates: the first `count` entries become the chosen subset.
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t pick = k + static_cast<std::size_t>(rng.index(loops.size() - k));
    std::swap(loops[k], loops[pick]);
  }
  loops.resize(count);
  for (const std::size_t idx : loops) {
    Pose4& m = ds.edges[idx].meas;
    m.yaw = wrap_yaw(m.yaw + rng.normal());
    const double sigma = rng.uniform(1.0, 50.0);
    m.trans.x() += rng.normal(sigma);
    m.trans.y() += rng.normal(sigma);
  }
  std::sort(loops.begin(), loops.end());
  return loops;
}

void export_trajectory(std::ostream& out, std::span<const NodeKey> keys,
                       std::span<const Pose4> poses) {
  if (keys.size() != poses.size()) {
    throw std::invalid_argument("export_trajectory: keys/poses size mismatch");
  }
  out << "id,x,y,z,yaw\n";
  char buf[192];
  for (std::size_t k = 0; k < keys.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g,%.9g,%.9g\n",
                  static_cast<unsigned long long>(keys[k]), poses[k].trans.x(),
                  poses[k].trans.y(), poses[k].trans.z(), poses[k].yaw);
    out << buf;
  }
}

}  // namespace mtpgo
