#include <zerod/centerline.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace zerod {

using nlohmann::json;

void CenterlineTree::build_id_index() const {
  if (!id_index_.empty()) return;
  for (size_t i = 0; i < points.size(); ++i)
    id_index_[points[i].id] = static_cast<int>(i);
}

int CenterlineTree::index_of(int point_id) const {
  build_id_index();
  auto it = id_index_.find(point_id);
  if (it == id_index_.end())
    throw ValidationError("unknown centerline point id " + std::to_string(point_id));
  return it->second;
}

int CenterlineTree::max_point_id() const {
  int m = -1;
  for (const auto& p : points) m = std::max(m, p.id);
  return m;
}

CenterlineTree parse_centerline_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("centerline JSON parse error: ") + e.what());
  }

  CenterlineTree tree;
  std::map<int, int> index_of;
  try {
    for (const auto& jp : j.at("points")) {
      CenterlinePoint p;
      p.id = jp.at("id").get<int>();
      const auto xyz = jp.at("xyz").get<std::vector<double>>();
      const auto tan = jp.at("tangent").get<std::vector<double>>();
      if (xyz.size() != 3 || tan.size() != 3)
        throw ValidationError("point " + std::to_string(p.id) + ": xyz/tangent must have 3 components");
      p.xyz = Eigen::Vector3d(xyz[0], xyz[1], xyz[2]);
      p.tangent = Eigen::Vector3d(tan[0], tan[1], tan[2]);
      p.misr = jp.at("misr").get<double>();
      p.branch_id = jp.at("branch_id").get<int>();
      p.in_junction = jp.at("in_junction").get<bool>();
      if (!index_of.emplace(p.id, static_cast<int>(tree.points.size())).second)
        throw ValidationError("duplicate centerline point id " + std::to_string(p.id));
      tree.points.push_back(p);
    }
    const int n = static_cast<int>(tree.points.size());
    if (n == 0) throw ValidationError("centerline has no points");

    tree.parent.assign(n, -1);
    tree.children.assign(n, {});
    for (const auto& je : j.at("edges")) {
      const auto edge = je.get<std::vector<int>>();
      if (edge.size() != 2) throw ValidationError("edges must be [parent, child] pairs");
      auto pit = index_of.find(edge[0]);
      auto cit = index_of.find(edge[1]);
      if (pit == index_of.end() || cit == index_of.end())
        throw ValidationError("edge references unknown point id");
      if (tree.parent[cit->second] != -1)
        throw ValidationError("point " + std::to_string(edge[1]) + " has more than one parent");
      tree.parent[cit->second] = pit->second;
      tree.children[pit->second].push_back(cit->second);
    }
    const int root_id = j.at("root").get<int>();
    auto rit = index_of.find(root_id);
    if (rit == index_of.end()) throw ValidationError("root references unknown point id");
    tree.root = rit->second;
    if (tree.parent[tree.root] != -1) throw ValidationError("root point has a parent");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("centerline JSON schema error: ") + e.what());
  }

  // Validate per-point quantities and connectivity, compute path distances.
  const int n = static_cast<int>(tree.points.size());
  for (const auto& p : tree.points) {
    if (!(p.misr > 0.0))
      throw ValidationError("point " + std::to_string(p.id) + ": radius must be > 0");
    if (std::abs(p.tangent.norm() - 1.0) > 1e-6)
      throw ValidationError("point " + std::to_string(p.id) + ": tangent is not unit-norm");
  }

  std::vector<int> order;
  order.reserve(n);
  std::vector<char> seen(n, 0);
  order.push_back(tree.root);
  seen[tree.root] = 1;
  tree.points[tree.root].path_distance = 0.0;
  for (size_t qi = 0; qi < order.size(); ++qi) {
    const int u = order[qi];
    for (int v : tree.children[u]) {
      if (seen[v]) throw ValidationError("centerline connectivity contains a cycle");
      seen[v] = 1;
      const double step = (tree.points[v].xyz - tree.points[u].xyz).norm();
      if (!(step > 0.0))
        throw ValidationError("coincident consecutive centerline points near id " +
                              std::to_string(tree.points[v].id));
      tree.points[v].path_distance = tree.points[u].path_distance + step;
      order.push_back(v);
    }
  }
  if (static_cast<int>(order.size()) != n)
    throw ValidationError("centerline is not connected (or contains a cycle)");

  // Branch ids may only change across junction-region points.
  for (int v = 0; v < n; ++v) {
    const int u = tree.parent[v];
    if (u < 0) continue;
    const auto& pu = tree.points[u];
    const auto& pv = tree.points[v];
    if (!pu.in_junction && !pv.in_junction && pu.branch_id != pv.branch_id)
      throw ValidationError("branch id changes outside a junction region at point " +
                            std::to_string(pv.id));
  }
  return tree;
}

CenterlineTree parse_centerline(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ValidationError("cannot open centerline file: " + file.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_centerline_json(ss.str());
}

std::string centerline_to_json(const CenterlineTree& tree) {
  json j;
  json pts = json::array();
  for (const auto& p : tree.points) {
    pts.push_back({{"id", p.id},
                   {"xyz", {p.xyz.x(), p.xyz.y(), p.xyz.z()}},
                   {"misr", p.misr},
                   {"tangent", {p.tangent.x(), p.tangent.y(), p.tangent.z()}},
                   {"branch_id", p.branch_id},
                   {"in_junction", p.in_junction}});
  }
  j["points"] = pts;
  json edges = json::array();
  for (size_t v = 0; v < tree.points.size(); ++v)
    if (tree.parent[v] >= 0)
      edges.push_back({tree.points[tree.parent[v]].id, tree.points[v].id});
  j["edges"] = edges;
  j["root"] = tree.points[tree.root].id;
  return j.dump(2) + "\n";
}

void write_centerline_json(const CenterlineTree& tree, const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot write centerline file: " + file.string());
  os << centerline_to_json(tree);
}

} // namespace zerod
