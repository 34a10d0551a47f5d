#include "support.hpp"

#include <cmath>
#include <numbers>

namespace zerod::test {

InflowWaveform constant_inflow(double q) {
  InflowWaveform w;
  w.t = {0.0};
  w.q = {q};
  return w;
}

InflowWaveform sampled_inflow(double period, int knots, double mean, double a1, double a2,
                              double phase2) {
  InflowWaveform w;
  for (int i = 0; i < knots; ++i) {
    const double t = period * i / knots;
    const double ph = 2.0 * std::numbers::pi * i / knots;
    w.t.push_back(t);
    w.q.push_back(mean * (1.0 + a1 * std::sin(ph) + a2 * std::sin(2.0 * ph + phase2)));
  }
  return w;
}

CircuitNetwork single_vessel_network(const ElementParameters& vessel,
                                     const InflowWaveform& inflow, double rd, double pd,
                                     double period) {
  Element e;
  e.id = "vessel_0";
  e.kind = ElementKind::Vessel;
  e.inlet = 0;
  e.outlet = 1;
  e.geometry = VesselGeometry{1.0, 1.0, 1.0};
  std::map<int, BoundaryCondition> bcs;
  bcs[0] = PrescribedInflow{inflow};
  bcs[1] = ResistanceBC{rd, pd};
  return assemble_network({e}, {{"vessel_0", vessel}}, bcs, FluidProperties{}, period);
}

CircuitNetwork single_vessel_network(const ElementParameters& vessel, double inflow_q,
                                     double rd, double pd, double period) {
  return single_vessel_network(vessel, constant_inflow(inflow_q), rd, pd, period);
}

CircuitNetwork rcr_network(double inflow_q, double rp, double c, double rd, double pd,
                           double period) {
  Element e;
  e.id = "vessel_0";
  e.kind = ElementKind::Vessel;
  e.inlet = 0;
  e.outlet = 1;
  e.geometry = VesselGeometry{1.0, 1.0, 1.0};
  ElementParameters p; // zero resistance feed line
  std::map<int, BoundaryCondition> bcs;
  bcs[0] = PrescribedInflow{constant_inflow(inflow_q)};
  bcs[1] = WindkesselBC{rp, c, rd, pd};
  return assemble_network({e}, {{"vessel_0", p}}, bcs, FluidProperties{}, period);
}

CircuitNetwork random_tree_network(int n_elements, unsigned long long seed,
                                   bool with_quadratic) {
  std::mt19937_64 rng(seed);
  auto u = [&](double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng);
  };
  auto params = [&]() {
    ElementParameters p;
    p.R_lin = u(10.0, 200.0);
    p.R_quad = with_quadratic ? u(0.0, 5.0) : 0.0;
    p.L = u(0.5, 10.0);
    return p;
  };

  std::vector<Element> elements;
  std::map<std::string, ElementParameters> pmap;
  int next_node = 1;
  std::vector<int> frontier{0};
  int counter = 0;
  auto add_element = [&](ElementKind kind, int a, int b) {
    Element e;
    e.id = (kind == ElementKind::Vessel ? "v" : "jp") + std::to_string(counter++);
    e.kind = kind;
    e.inlet = a;
    e.outlet = b;
    if (kind == ElementKind::Vessel) e.geometry = VesselGeometry{1.0, 1.0, 1.0};
    pmap[e.id] = params();
    elements.push_back(e);
  };

  while (static_cast<int>(elements.size()) < n_elements && !frontier.empty()) {
    std::uniform_int_distribution<size_t> pick(0, frontier.size() - 1);
    const size_t at = pick(rng);
    const int node = frontier[at];
    frontier.erase(frontier.begin() + static_cast<long>(at));
    const int remaining = n_elements - static_cast<int>(elements.size());
    if (remaining >= 2 && u(0.0, 1.0) < 0.4) {
      const int b1 = next_node++, b2 = next_node++;
      add_element(ElementKind::JunctionOutletPair, node, b1);
      add_element(ElementKind::JunctionOutletPair, node, b2);
      frontier.push_back(b1);
      frontier.push_back(b2);
    } else {
      const int b = next_node++;
      add_element(ElementKind::Vessel, node, b);
      frontier.push_back(b);
    }
  }

  std::map<int, BoundaryCondition> bcs;
  bcs[0] = PrescribedInflow{sampled_inflow(1.0, 32, u(10.0, 30.0), 0.6, 0.2, 0.7)};
  std::map<int, int> degree;
  for (const auto& e : elements) {
    ++degree[e.inlet];
    ++degree[e.outlet];
  }
  for (const auto& [node, deg] : degree) {
    if (node == 0 || deg > 1) continue;
    if (u(0.0, 1.0) < 0.5)
      bcs[node] = ResistanceBC{u(200.0, 2000.0), u(0.0, 1e4)};
    else
      bcs[node] = WindkesselBC{u(50.0, 200.0), u(1e-5, 1e-3), u(200.0, 2000.0), u(0.0, 1e4)};
  }
  return assemble_network(elements, pmap, bcs, FluidProperties{}, 1.0);
}

CircuitNetwork balanced_tree_network(int n_elements, double r_quad) {
  std::vector<Element> elems;
  std::map<std::string, ElementParameters> params;
  ElementParameters vessel_p;
  vessel_p.R_lin = 50.0;
  vessel_p.L = 2.0;
  vessel_p.R_quad = r_quad;
  ElementParameters pair_p;
  pair_p.R_lin = 10.0;
  pair_p.L = 0.5;
  pair_p.R_quad = r_quad;

  int next_node = 1, counter = 0;
  std::vector<int> level{0}, leaves;
  while (static_cast<int>(elems.size()) < n_elements - 2 && !level.empty()) {
    std::vector<int> next_level;
    for (int node : level) {
      if (static_cast<int>(elems.size()) >= n_elements - 2) {
        leaves.push_back(node);
        continue;
      }
      const int b = next_node++;
      Element v{"v" + std::to_string(counter), ElementKind::Vessel, node, b, {},
                VesselGeometry{1.0, 1.0, 1.0}};
      params[v.id] = vessel_p;
      elems.push_back(v);
      if (static_cast<int>(elems.size()) >= n_elements - 2) {
        leaves.push_back(b);
        continue;
      }
      const int c1 = next_node++, c2 = next_node++;
      Element p1{"j" + std::to_string(counter) + "a", ElementKind::JunctionOutletPair, b, c1,
                 {}, std::nullopt};
      Element p2{"j" + std::to_string(counter) + "b", ElementKind::JunctionOutletPair, b, c2,
                 {}, std::nullopt};
      params[p1.id] = pair_p;
      params[p2.id] = pair_p;
      elems.push_back(p1);
      elems.push_back(p2);
      next_level.push_back(c1);
      next_level.push_back(c2);
      ++counter;
    }
    level = next_level;
  }
  leaves.insert(leaves.end(), level.begin(), level.end());

  std::map<int, BoundaryCondition> bcs;
  bcs[0] = PrescribedInflow{sampled_inflow(1.0, 64, 80.0, 0.6)};
  std::map<int, int> degree;
  for (const auto& e : elems) {
    ++degree[e.inlet];
    ++degree[e.outlet];
  }
  for (const auto& [node, deg] : degree)
    if (node != 0 && deg == 1) bcs[node] = WindkesselBC{100.0, 1e-4, 900.0, 0.0};
  return assemble_network(elems, params, bcs, FluidProperties{}, 1.0);
}

Eigen::VectorXd random_state(int size, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(1.0, 100.0);
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd x(size);
  // Bounded magnitudes keep finite differences well conditioned; flows stay
  // away from the |Q| kink at zero.
  for (int i = 0; i < size; ++i) x[i] = coin(rng) ? mag(rng) : -mag(rng);
  return x;
}

int FixtureTreeBuilder::add(const Eigen::Vector3d& xyz, double misr,
                            const Eigen::Vector3d& tangent, int branch, bool junction,
                            int parent) {
  CenterlinePoint p;
  p.id = static_cast<int>(tree.points.size());
  p.xyz = xyz;
  p.misr = misr;
  p.tangent = tangent.normalized();
  p.branch_id = branch;
  p.in_junction = junction;
  tree.points.push_back(p);
  tree.parent.push_back(parent);
  tree.children.emplace_back();
  if (parent >= 0) tree.children[parent].push_back(p.id);
  return p.id;
}

std::string FixtureTreeBuilder::json() {
  tree.root = 0;
  return centerline_to_json(tree);
}

using FixtureBuilder = FixtureTreeBuilder;

std::string y_centerline_json(int pts_per_branch, int junction_pad) {
  FixtureBuilder b;
  const double ds = 0.5, r = 0.5;
  int prev = -1;
  // Root branch along +x; its last `junction_pad` points are in the junction.
  for (int i = 0; i < pts_per_branch; ++i) {
    const bool flagged = i >= pts_per_branch - junction_pad;
    prev = b.add({i * ds, 0.0, 0.0}, r, {1.0, 0.0, 0.0}, 0, flagged, prev);
  }
  const int fork = prev;
  const double x0 = (pts_per_branch - 1) * ds;
  for (int child = 0; child < 2; ++child) {
    const double sy = child == 0 ? 1.0 : -1.0;
    const Eigen::Vector3d dir = Eigen::Vector3d(1.0, sy, 0.0).normalized();
    int p = fork;
    for (int i = 1; i <= pts_per_branch; ++i) {
      const bool flagged = i <= junction_pad;
      const Eigen::Vector3d xyz = Eigen::Vector3d(x0, 0.0, 0.0) + dir * (i * ds);
      p = b.add(xyz, 0.8 * r, dir, 1 + child, flagged, p);
    }
  }
  return b.json();
}

std::string star_centerline_json(int n_outlets, int pts_per_branch) {
  FixtureBuilder b;
  const double ds = 0.5, r = 0.5;
  int prev = -1;
  for (int i = 0; i < pts_per_branch; ++i) {
    const bool flagged = i == pts_per_branch - 1;
    prev = b.add({i * ds, 0.0, 0.0}, r, {1.0, 0.0, 0.0}, 0, flagged, prev);
  }
  const int fork = prev;
  const double x0 = (pts_per_branch - 1) * ds;
  for (int k = 0; k < n_outlets; ++k) {
    const double angle = (k - 0.5 * (n_outlets - 1)) * 0.5;
    const Eigen::Vector3d dir(std::cos(angle), std::sin(angle), 0.0);
    // Distinct in-junction path length per outlet via the flagged-head spacing.
    const double head_ds = 0.3 + 0.15 * k;
    int p = fork;
    Eigen::Vector3d at(x0, 0.0, 0.0);
    for (int i = 1; i <= pts_per_branch; ++i) {
      const bool flagged = i <= 2;
      at += dir * (flagged ? head_ds : ds);
      p = b.add(at, 0.7 * r, dir, 1 + k, flagged, p);
    }
  }
  return b.json();
}

std::string chain_two_junctions_json() {
  FixtureBuilder b;
  const double ds = 0.5, r = 0.5;
  int prev = -1;
  for (int i = 0; i < 6; ++i) // root vessel, last point flagged
    prev = b.add({i * ds, 0.0, 0.0}, r, {1.0, 0.0, 0.0}, 0, i == 5, prev);
  const int j1 = prev;
  // Outlet A of junction 1: a leaf branch.
  {
    const Eigen::Vector3d dir = Eigen::Vector3d(1.0, 1.0, 0.0).normalized();
    int p = j1;
    for (int i = 1; i <= 6; ++i)
      p = b.add(Eigen::Vector3d(2.5, 0, 0) + dir * (i * ds), 0.8 * r, dir, 1, i == 1, p);
  }
  // Outlet B: trunk to junction 2, whose last point is flagged.
  int trunk_end = -1;
  {
    const Eigen::Vector3d dir = Eigen::Vector3d(1.0, -1.0, 0.0).normalized();
    int p = j1;
    for (int i = 1; i <= 8; ++i) {
      const bool flagged = i == 1 || i == 8;
      p = b.add(Eigen::Vector3d(2.5, 0, 0) + dir * (i * ds), 0.85 * r, dir, 2, flagged, p);
    }
    trunk_end = p;
  }
  const Eigen::Vector3d j2_at = b.tree.points[trunk_end].xyz;
  for (int child = 0; child < 2; ++child) {
    const Eigen::Vector3d dir =
        Eigen::Vector3d(1.0, child == 0 ? 0.3 : -1.3, 0.0).normalized();
    int p = trunk_end;
    for (int i = 1; i <= 6; ++i)
      p = b.add(j2_at + dir * (i * ds), 0.7 * r, dir, 3 + child, i == 1, p);
  }
  return b.json();
}

} // namespace zerod::test
