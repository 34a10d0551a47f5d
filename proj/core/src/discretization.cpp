#include <zerod/discretization.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace zerod {

const JunctionElement* Discretization::find_junction(const std::string& id) const {
  for (const auto& j : junctions)
    if (j.id == id) return &j;
  return nullptr;
}

VesselGeometry vessel_geometry(const std::vector<int>& point_ids, const CenterlineTree& tree) {
  if (point_ids.size() < 2) throw ValidationError("vessel needs at least 2 centerline points");
  double r_min = std::numeric_limits<double>::infinity();
  for (int id : point_ids) r_min = std::min(r_min, tree.by_id(id).misr);
  // Nominal area at the outlet radius, stenosis area at the path minimum
  // (the same convention as the calculated feature parameters).
  const double r_out = tree.by_id(point_ids.back()).misr;
  VesselGeometry g;
  g.length = tree.by_id(point_ids.back()).path_distance -
             tree.by_id(point_ids.front()).path_distance;
  g.area = std::numbers::pi * r_out * r_out;
  g.stenosis_area = std::numbers::pi * r_min * r_min;
  return g;
}

Discretization discretize(const CenterlineTree& tree) {
  const int n = static_cast<int>(tree.points.size());
  Discretization disc;
  disc.synthetic_node_base = tree.max_point_id() + 1;
  disc.next_synthetic_node = disc.synthetic_node_base;
  disc.root_node = tree.points[tree.root].id;

  if (tree.points[tree.root].in_junction)
    throw ValidationError("root centerline point lies inside a junction region");

  // Junction regions: connected components of in_junction points.
  std::vector<int> region(n, -1);
  int n_regions = 0;
  for (int i = 0; i < n; ++i) {
    if (!tree.points[i].in_junction || region[i] >= 0) continue;
    const int r = n_regions++;
    std::vector<int> stack{i};
    region[i] = r;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      auto visit = [&](int v) {
        if (v >= 0 && tree.points[v].in_junction && region[v] < 0) {
          region[v] = r;
          stack.push_back(v);
        }
      };
      visit(tree.parent[u]);
      for (int v : tree.children[u]) visit(v);
    }
  }

  struct RegionInfo {
    int inlet = -1;           // boundary point index (non-junction)
    int n_entering = 0;
    std::vector<int> outlets; // boundary point indices (non-junction)
  };
  std::vector<RegionInfo> regions(n_regions);
  for (int v = 0; v < n; ++v) {
    const int u = tree.parent[v];
    if (u < 0) continue;
    const bool ju = tree.points[u].in_junction;
    const bool jv = tree.points[v].in_junction;
    if (!ju && jv) {
      auto& ri = regions[region[v]];
      ri.inlet = u;
      ++ri.n_entering;
    } else if (ju && !jv) {
      regions[region[u]].outlets.push_back(v);
    }
  }
  for (int r = 0; r < n_regions; ++r) {
    if (regions[r].n_entering != 1)
      throw ValidationError("junction region " + std::to_string(r) + " has " +
                            std::to_string(regions[r].n_entering) + " inlets (expected 1)");
    if (regions[r].outlets.empty())
      throw ValidationError("junction region " + std::to_string(r) + " has no outlets");
  }
  for (int v = 0; v < n; ++v)
    if (tree.points[v].in_junction && tree.children[v].empty())
      throw ValidationError("junction region contains leaf point " +
                            std::to_string(tree.points[v].id));

  // Branching is only allowed inside junction regions or into them.
  for (int u = 0; u < n; ++u) {
    if (tree.points[u].in_junction) continue;
    if (tree.children[u].size() >= 2)
      for (int v : tree.children[u])
        if (!tree.points[v].in_junction)
          throw ValidationError("point " + std::to_string(tree.points[u].id) +
                                " branches outside a junction region");
  }

  // Junctions ordered by inlet path distance for stable ids.
  std::vector<int> starts{tree.root};
  {
    std::vector<int> region_order(n_regions);
    for (int r = 0; r < n_regions; ++r) region_order[r] = r;
    std::sort(region_order.begin(), region_order.end(), [&](int a, int b) {
      const auto& pa = tree.points[regions[a].inlet];
      const auto& pb = tree.points[regions[b].inlet];
      if (pa.path_distance != pb.path_distance) return pa.path_distance < pb.path_distance;
      return pa.id < pb.id;
    });
    for (int k = 0; k < n_regions; ++k) {
      const int r = region_order[k];
      JunctionElement j;
      j.id = "junction_" + std::to_string(k);
      j.origin_junction = k;
      j.inlet_node = tree.points[regions[r].inlet].id;
      j.geometric_inlet_point = j.inlet_node;
      auto outlets = regions[r].outlets;
      std::sort(outlets.begin(), outlets.end(),
                [&](int a, int b) { return tree.points[a].id < tree.points[b].id; });
      for (int o : outlets) {
        JunctionOutlet jo;
        jo.outlet_node = tree.points[o].id;
        std::vector<int> rev;
        for (int v = o; v != regions[r].inlet; v = tree.parent[v]) rev.push_back(v);
        rev.push_back(regions[r].inlet);
        std::reverse(rev.begin(), rev.end());
        for (int idx : rev) jo.path.push_back(tree.points[idx].id);
        jo.in_junction_length =
            tree.points[o].path_distance - tree.points[regions[r].inlet].path_distance;
        j.outlets.push_back(std::move(jo));
        starts.push_back(o);
      }
      disc.junctions.push_back(std::move(j));
    }
  }

  int vessel_count = 0;
  for (int start : starts) {
    std::vector<int> chain{start};
    int cur = start;
    while (tree.children[cur].size() == 1 && !tree.points[tree.children[cur][0]].in_junction) {
      cur = tree.children[cur][0];
      chain.push_back(cur);
    }
    if (chain.size() < 2) continue; // boundary point directly adjacent to the next feature
    VesselSegment v;
    v.id = "vessel_" + std::to_string(vessel_count++);
    for (int idx : chain) v.points.push_back(tree.points[idx].id);
    v.branch_id = tree.points[chain[chain.size() / 2]].branch_id;
    disc.vessels.push_back(std::move(v));
  }
  return disc;
}

std::string junction_pair_id(const JunctionElement& j, size_t outlet_index) {
  return j.id + "_out" + std::to_string(outlet_index);
}

Discretization split_multi_outlet_junctions(const Discretization& disc) {
  Discretization out = disc;
  out.junctions.clear();

  for (const auto& j : disc.junctions) {
    const size_t n = j.outlets.size();
    if (n <= 2) {
      out.junctions.push_back(j);
      continue;
    }
    // Ascending in-junction path length, ties broken by outlet node id.
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (j.outlets[a].in_junction_length != j.outlets[b].in_junction_length)
        return j.outlets[a].in_junction_length < j.outlets[b].in_junction_length;
      return j.outlets[a].outlet_node < j.outlets[b].outlet_node;
    });

    int upstream_node = j.inlet_node;
    for (size_t i = 0; i + 2 < n; ++i) {
      JunctionElement bif;
      bif.id = j.id + "_b" + std::to_string(i);
      bif.origin_junction = j.origin_junction;
      bif.inlet_node = upstream_node;
      bif.geometric_inlet_point = j.geometric_inlet_point;
      bif.outlets.push_back(j.outlets[order[i]]);

      ConnectorSegment c;
      c.id = j.id + "_c" + std::to_string(i);
      c.inlet_node = out.next_synthetic_node++;
      c.outlet_node = out.next_synthetic_node++;
      c.location_point = j.geometric_inlet_point;
      c.origin_junction = j.origin_junction;

      JunctionOutlet to_connector;
      to_connector.outlet_node = c.inlet_node;
      to_connector.feeds_connector = true;
      bif.outlets.push_back(to_connector);

      upstream_node = c.outlet_node;
      out.junctions.push_back(std::move(bif));
      out.connectors.push_back(std::move(c));
    }
    JunctionElement last;
    last.id = j.id + "_b" + std::to_string(n - 2);
    last.origin_junction = j.origin_junction;
    last.inlet_node = upstream_node;
    last.geometric_inlet_point = j.geometric_inlet_point;
    last.outlets.push_back(j.outlets[order[n - 2]]);
    last.outlets.push_back(j.outlets[order[n - 1]]);
    out.junctions.push_back(std::move(last));
    out.provenance.push_back(j.id + ": split " + std::to_string(n) + " outlets into " +
                             std::to_string(n - 1) + " bifurcations");
  }
  return out;
}

Discretization entrance_length_adjust(const Discretization& disc, const CenterlineTree& tree,
                                      const FluidProperties& fluid, double factor) {
  if (factor < 0.0) throw ValidationError("entrance length factor must be >= 0");
  Discretization out = disc;
  if (factor == 0.0) return out;

  for (auto& j : out.junctions) {
    for (auto& o : j.outlets) {
      if (o.feeds_connector) continue;
      auto vit = std::find_if(out.vessels.begin(), out.vessels.end(), [&](const VesselSegment& v) {
        return v.points.front() == o.outlet_node;
      });
      if (vit == out.vessels.end()) continue; // no downstream vessel to extend into
      VesselSegment& v = *vit;

      const double r_out = tree.by_id(o.outlet_node).misr;
      const double entrance = factor * r_out;
      const double d0 = tree.by_id(v.points.front()).path_distance;

      // First vessel point at >= L_e downstream of the old boundary.
      size_t snap = v.points.size();
      for (size_t k = 0; k < v.points.size(); ++k) {
        if (tree.by_id(v.points[k]).path_distance - d0 >= entrance) {
          snap = k;
          break;
        }
      }

      if (snap >= v.points.size() - 1) {
        // Entire vessel absorbed into the junction; a zero-length connector
        // couples the junction outlet to the downstream element or BC.
        o.absorbed = poiseuille_parameters(fluid, vessel_geometry(v.points, tree));
        o.absorbed_length = tree.by_id(v.points.back()).path_distance - d0;
        o.path.insert(o.path.end(), v.points.begin() + 1, v.points.end());
        o.in_junction_length += o.absorbed_length;

        ConnectorSegment c;
        c.id = v.id + "_abs";
        c.inlet_node = out.next_synthetic_node++;
        c.outlet_node = v.points.back();
        c.location_point = v.points.back();
        c.origin_junction = j.origin_junction;
        o.outlet_node = c.inlet_node;
        out.provenance.push_back(j.id + "/" + v.id + ": vessel absorbed whole (" +
                                 std::to_string(o.absorbed_length) + " cm)");
        out.connectors.push_back(std::move(c));
        out.vessels.erase(vit);
      } else if (snap > 0) {
        std::vector<int> absorbed_pts(v.points.begin(), v.points.begin() + snap + 1);
        o.absorbed = poiseuille_parameters(fluid, vessel_geometry(absorbed_pts, tree));
        o.absorbed_length = tree.by_id(v.points[snap]).path_distance - d0;
        o.path.insert(o.path.end(), v.points.begin() + 1, v.points.begin() + snap + 1);
        o.in_junction_length += o.absorbed_length;
        o.outlet_node = v.points[snap];
        v.points.erase(v.points.begin(), v.points.begin() + snap);
        out.provenance.push_back(j.id + "/" + v.id + ": absorbed " +
                                 std::to_string(o.absorbed_length) + " cm");
      }
    }
  }
  return out;
}

std::vector<Element> circuit_elements(const Discretization& disc, const CenterlineTree& tree) {
  std::vector<Element> elems;
  for (const auto& v : disc.vessels) {
    Element e;
    e.id = v.id;
    e.kind = ElementKind::Vessel;
    e.inlet = v.points.front();
    e.outlet = v.points.back();
    e.geometry = vessel_geometry(v.points, tree);
    elems.push_back(std::move(e));
  }
  for (const auto& j : disc.junctions) {
    for (size_t k = 0; k < j.outlets.size(); ++k) {
      Element e;
      e.id = junction_pair_id(j, k);
      e.kind = ElementKind::JunctionOutletPair;
      e.inlet = j.inlet_node;
      e.outlet = j.outlets[k].outlet_node;
      elems.push_back(std::move(e));
    }
  }
  for (const auto& c : disc.connectors) {
    Element e;
    e.id = c.id;
    e.kind = ElementKind::Connector;
    e.inlet = c.inlet_node;
    e.outlet = c.outlet_node;
    e.params = ElementParameters::frozen_zero();
    elems.push_back(std::move(e));
  }
  return elems;
}

std::map<std::string, ElementParameters> baseline_parameters(const Discretization& disc,
                                                             const CenterlineTree& tree,
                                                             const FluidProperties& fluid) {
  std::map<std::string, ElementParameters> params;
  for (const auto& v : disc.vessels)
    params[v.id] = poiseuille_parameters(fluid, vessel_geometry(v.points, tree));
  for (const auto& j : disc.junctions)
    for (size_t k = 0; k < j.outlets.size(); ++k) {
      ElementParameters p; // constant-pressure junction
      if (j.outlets[k].feeds_connector) {
        // Only R_lin stays free on outlets leading to artificial connectors.
        p.frozen_R_quad = true;
        p.frozen_L = true;
      }
      params[junction_pair_id(j, k)] = p;
    }
  for (const auto& c : disc.connectors) params[c.id] = ElementParameters::frozen_zero();
  return params;
}

} // namespace zerod
