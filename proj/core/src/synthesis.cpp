#include <zerod/synthesis.hpp>

#include <zerod/solver.hpp>

#include <Eigen/Geometry>

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace zerod {

using nlohmann::json;

std::string to_string(SyntheticOracle::TruthMode m) {
  return m == SyntheticOracle::TruthMode::Identity ? "identity" : "learnable";
}

SyntheticOracle::TruthMode truth_mode_from_string(const std::string& s) {
  if (s == "identity") return SyntheticOracle::TruthMode::Identity;
  if (s == "learnable") return SyntheticOracle::TruthMode::Learnable;
  throw ValidationError("unknown truth mode: " + s);
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

ElementParameters truth_parameters(const SyntheticOracle& oracle, ElementKind kind,
                                   const FeatureVector& f, bool feeds_connector) {
  ElementParameters p;
  if (kind == ElementKind::Connector) return ElementParameters::frozen_zero();
  if (feeds_connector) {
    p.frozen_R_quad = true;
    p.frozen_L = true;
    return p; // no pressure difference expected over a zero-length path
  }
  if (oracle.truth_mode == SyntheticOracle::TruthMode::Identity) {
    if (kind == ElementKind::Vessel) {
      p.R_lin = f.calculated_R_poiseuille;
      p.R_quad = f.calculated_R_stenosis;
      p.L = f.calculated_L;
    }
    return p; // junction pairs: constant pressure
  }

  // Smooth bounded factors on the calculated Poiseuille parameters. The map is
  // a fixed function of the feature vector so that it is learnable from
  // features by construction.
  double g_rlin, g_l;
  if (kind == ElementKind::Vessel) {
    g_rlin = 1.0 + 1.5 * sigmoid(0.18 * (f.length_star - 10.0) +
                                 6.0 * (f.tortuosity - 1.03) + 1.5 * (1.0 - f.r_out_star));
    g_l = 1.0 + 1.5 * sigmoid(0.15 * (10.0 - f.length_star) + 4.0 * (f.r_out_star - 0.9));
  } else {
    const double phi = f.flow_ratio.value_or(2.0);
    g_rlin = 1.0 + 1.5 * sigmoid(0.8 * (phi - 2.2) + 2.5 * (f.angle - 0.5) +
                                 0.10 * (f.length_star - 5.0));
    g_l = 1.0 + 1.5 * sigmoid(2.0 * (0.5 - f.angle) + 0.5 * (phi - 2.2));
  }
  p.R_lin = g_rlin * f.calculated_R_poiseuille;
  p.L = g_l * f.calculated_L;
  if (oracle.flavor == ModelFlavor::RRI) {
    // Quadratic resistor sized so its pressure drop rivals the linear one at
    // flows of order 15 cm^3/s.
    const double g_q =
        0.4 + 0.8 * sigmoid(0.2 * (f.length_star - 10.0) + 1.0 * (f.tortuosity - 1.02));
    p.R_quad = g_q * p.R_lin / 15.0;
  }
  return p;
}

std::map<int, BoundaryCondition> BoundarySpec::all_bcs() const {
  std::map<int, BoundaryCondition> bcs = outlets;
  bcs[inflow_node] = PrescribedInflow{inflow};
  return bcs;
}

std::string boundary_to_json(const BoundarySpec& bc) {
  json j;
  j["cycle_period"] = bc.cycle_period;
  j["fluid"] = {{"density", bc.fluid.density},
                {"viscosity", bc.fluid.viscosity},
                {"stenosis_kt", bc.fluid.stenosis_kt}};
  j["inflow"] = {{"node", bc.inflow_node}, {"t", bc.inflow.t}, {"Q", bc.inflow.q}};
  json outs = json::object();
  for (const auto& [node, out] : bc.outlets) {
    if (const auto* r = std::get_if<ResistanceBC>(&out))
      outs[std::to_string(node)] = {{"type", "RESISTANCE"}, {"Rd", r->Rd}, {"Pd", r->Pd}};
    else if (const auto* w = std::get_if<WindkesselBC>(&out))
      outs[std::to_string(node)] = {
          {"type", "RCR"}, {"Rp", w->Rp}, {"C", w->C}, {"Rd", w->Rd}, {"Pd", w->Pd}};
    else
      throw ValidationError("outlet boundary conditions cannot be prescribed inflows");
  }
  j["outlets"] = outs;
  return j.dump(2) + "\n";
}

BoundarySpec boundary_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("boundary JSON parse error: ") + e.what());
  }
  BoundarySpec bc;
  try {
    bc.cycle_period = j.at("cycle_period").get<double>();
    const auto& jf = j.at("fluid");
    bc.fluid.density = jf.at("density").get<double>();
    bc.fluid.viscosity = jf.at("viscosity").get<double>();
    bc.fluid.stenosis_kt = jf.value("stenosis_kt", 1.52);
    bc.inflow_node = j.at("inflow").at("node").get<int>();
    bc.inflow.t = j.at("inflow").at("t").get<std::vector<double>>();
    bc.inflow.q = j.at("inflow").at("Q").get<std::vector<double>>();
    for (const auto& [key, val] : j.at("outlets").items()) {
      const std::string type = val.at("type").get<std::string>();
      if (type == "RESISTANCE")
        bc.outlets[std::stoi(key)] =
            ResistanceBC{val.at("Rd").get<double>(), val.at("Pd").get<double>()};
      else if (type == "RCR")
        bc.outlets[std::stoi(key)] =
            WindkesselBC{val.at("Rp").get<double>(), val.at("C").get<double>(),
                         val.at("Rd").get<double>(), val.at("Pd").get<double>()};
      else
        throw ValidationError("unknown outlet BC type: " + type);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("boundary JSON schema error: ") + e.what());
  }
  return bc;
}

BoundarySpec read_boundary_json(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ValidationError("cannot open boundary file: " + file.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return boundary_from_json(ss.str());
}

void write_boundary_json(const BoundarySpec& bc, const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot write boundary file: " + file.string());
  os << boundary_to_json(bc);
}

std::string cohort_to_json(const CohortSpec& cohort) {
  json j;
  j["name"] = cohort.name;
  j["seed"] = cohort.seed;
  j["flavor"] = to_string(cohort.flavor);
  j["entrance_length_factor"] = cohort.entrance_length_factor;
  j["truth_mode"] = cohort.truth_mode;
  j["reference_samples"] = cohort.reference_samples;
  json geos = json::array();
  for (const auto& g : cohort.geometries)
    geos.push_back({{"id", g.id},
                    {"centerline", g.centerline.filename().string()},
                    {"bc", g.bc.filename().string()},
                    {"reference", g.reference.filename().string()},
                    {"truth_network", g.truth_network.filename().string()}});
  j["geometries"] = geos;
  j["generation_log"] = cohort.generation_log;
  return j.dump(2) + "\n";
}

CohortSpec read_cohort_json(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ValidationError("cannot open cohort file: " + file.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("cohort JSON parse error: ") + e.what());
  }
  CohortSpec cohort;
  const auto dir = file.parent_path();
  try {
    cohort.name = j.at("name").get<std::string>();
    cohort.seed = j.at("seed").get<unsigned long long>();
    cohort.flavor = j.at("flavor").get<std::string>() == "ri" ? ModelFlavor::RI : ModelFlavor::RRI;
    cohort.entrance_length_factor = j.at("entrance_length_factor").get<double>();
    cohort.truth_mode = j.at("truth_mode").get<std::string>();
    cohort.reference_samples = j.at("reference_samples").get<int>();
    for (const auto& jg : j.at("geometries")) {
      GeometryEntry g;
      g.id = jg.at("id").get<std::string>();
      g.centerline = dir / jg.at("centerline").get<std::string>();
      g.bc = dir / jg.at("bc").get<std::string>();
      g.reference = dir / jg.at("reference").get<std::string>();
      g.truth_network = dir / jg.at("truth_network").get<std::string>();
      cohort.geometries.push_back(std::move(g));
    }
    if (j.contains("generation_log"))
      cohort.generation_log = j.at("generation_log").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("cohort JSON schema error: ") + e.what());
  }
  return cohort;
}

void write_cohort_json(const CohortSpec& cohort, const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot write cohort file: " + file.string());
  os << cohort_to_json(cohort);
}

FlowAverages cycle_average_flows(const TimeSeriesSolution& sol) {
  FlowAverages avg;
  for (size_t ei = 0; ei < sol.element_ids.size(); ++ei)
    avg[sol.element_ids[ei]] = sol.element_flow.row(static_cast<Eigen::Index>(ei)).mean();
  return avg;
}

double waveform_cycle_average(const InflowWaveform& w, double period) {
  const int n = 2048;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += waveform_value(w, period, (i + 0.5) * period / n);
  return sum / n;
}

namespace {

struct TreeBuilder {
  const SyntheticOracle& oracle;
  std::mt19937_64 rng;
  CenterlineTree tree;
  int next_branch = 0;
  bool degenerate = false;

  explicit TreeBuilder(const SyntheticOracle& o, unsigned long long seed)
      : oracle(o), rng(seed) {}

  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng);
  }

  int add_point(const Eigen::Vector3d& xyz, double misr, const Eigen::Vector3d& tangent,
                int branch, bool junction, int parent_index) {
    CenterlinePoint p;
    p.id = static_cast<int>(tree.points.size());
    p.xyz = xyz;
    p.misr = misr;
    p.tangent = tangent.normalized();
    p.branch_id = branch;
    p.in_junction = junction;
    tree.points.push_back(p);
    tree.parent.push_back(parent_index);
    tree.children.emplace_back();
    if (parent_index >= 0) tree.children[parent_index].push_back(p.id);
    return p.id;
  }

  static Eigen::Vector3d any_perpendicular(const Eigen::Vector3d& v, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int tries = 0; tries < 64; ++tries) {
      Eigen::Vector3d r(d(rng), d(rng), d(rng));
      Eigen::Vector3d p = r - r.dot(v) * v;
      if (p.norm() > 1e-3) return p.normalized();
    }
    return v.unitOrthogonal();
  }

  // One branch as a gently curved polyline: the direction turns by `turn`
  // radians about a fixed perpendicular axis along the branch; the radius
  // tapers with a mid-branch dip for r_min variety.
  struct BranchEnd {
    int last_index;
    Eigen::Vector3d position;
    Eigen::Vector3d direction;
    double radius;
  };

  BranchEnd grow_branch(int parent_index, Eigen::Vector3d start, Eigen::Vector3d direction,
                        double r_in, bool is_root, bool is_leaf) {
    const int branch = next_branch++;
    const double lr = uniform(oracle.length_radius_min, oracle.length_radius_max);
    const double length = lr * r_in;
    const double taper = uniform(0.82, 0.98);
    const double dip = uniform(0.0, 0.08);
    const double turn = uniform(-0.9, 0.9);
    const Eigen::Vector3d axis = any_perpendicular(direction, rng);

    const int n_pts = std::max(10, static_cast<int>(std::llround(length / (0.5 * r_in))));
    const double ds = length / (n_pts - 1);
    const double junction_span = 1.2; // in units of the local radius

    Eigen::Vector3d pos = start;
    Eigen::Vector3d dir = direction;
    int prev = parent_index;
    double r_end = r_in;
    for (int i = 0; i < n_pts; ++i) {
      const double u = static_cast<double>(i) / (n_pts - 1);
      const double r =
          r_in * (1.0 + (taper - 1.0) * u) * (1.0 - dip * std::sin(std::numbers::pi * u));
      r_end = r;
      if (i > 0) {
        const Eigen::AngleAxisd rot(turn / (n_pts - 1), axis);
        dir = (rot * dir).normalized();
        pos += dir * ds;
      }
      // Junction flags: tail of a non-leaf branch, head of a non-root branch.
      const double from_start = u * length;
      const double from_end = (1.0 - u) * length;
      bool flag = false;
      if (!is_root && from_start <= junction_span * r_in) flag = true;
      if (!is_leaf && from_end <= junction_span * r) flag = true;
      prev = add_point(pos, r, dir, branch, flag, prev);
      if (r < oracle.min_radius) degenerate = true;
    }
    return {prev, pos, dir, r_end};
  }

  void grow(int depth_remaining, const BranchEnd& at) {
    if (depth_remaining == 0) return;
    const double decay = uniform(oracle.radius_decay_min, oracle.radius_decay_max);
    const double asym = uniform(0.0, oracle.asymmetry);
    const double split_angle = uniform(0.35, 0.65);
    const Eigen::Vector3d axis = any_perpendicular(at.direction, rng);
    for (int child = 0; child < 2; ++child) {
      const double sign = child == 0 ? 1.0 : -1.0;
      const double r_child = at.radius * decay * (1.0 + sign * asym);
      if (r_child < oracle.min_radius) {
        degenerate = true;
        return;
      }
      const Eigen::AngleAxisd rot(sign * split_angle, axis);
      const Eigen::Vector3d dir = (rot * at.direction).normalized();
      const Eigen::Vector3d start = at.position + dir * (0.5 * r_child);
      BranchEnd end = grow_branch(at.last_index, start, dir, r_child, false,
                                  depth_remaining == 1);
      grow(depth_remaining - 1, end);
    }
  }
};

// Leaf nodes and the per-leaf expected flow fraction (Murray split by r^3).
struct LeafPlan {
  int node;
  double radius;
  double share;
};

std::vector<LeafPlan> leaf_plan(const CenterlineTree& tree) {
  std::vector<LeafPlan> leaves;
  double total = 0.0;
  for (size_t i = 0; i < tree.points.size(); ++i) {
    if (!tree.children[i].empty()) continue;
    const double r = tree.points[i].misr;
    leaves.push_back({tree.points[i].id, r, r * r * r});
    total += r * r * r;
  }
  for (auto& l : leaves) l.share /= total;
  return leaves;
}

} // namespace

CohortSpec generate_synthetic_cohort(const SyntheticOracle& oracle, int count,
                                     const std::filesystem::path& out_dir,
                                     const std::string& cohort_name) {
  if (count < 5) throw ValidationError("synthetic cohorts need at least 5 geometries");
  std::filesystem::create_directories(out_dir);

  const bool identity = oracle.truth_mode == SyntheticOracle::TruthMode::Identity;
  // Identity mode is a self-consistency configuration: the reference is the
  // baseline model's own solution, so preprocessing must not move material.
  const double factor_used = identity ? 0.0 : oracle.entrance_length_factor;
  const int fine_mult = identity ? 1 : oracle.fine_multiplier;

  CohortSpec cohort;
  cohort.name = cohort_name;
  cohort.seed = oracle.seed;
  cohort.flavor = oracle.flavor;
  cohort.entrance_length_factor = factor_used;
  cohort.truth_mode = to_string(oracle.truth_mode);
  cohort.reference_samples = oracle.reference_samples;

  for (int g = 0; g < count; ++g) {
    // Regenerate on degenerate geometry (radius underflow) with the next seed.
    CenterlineTree tree;
    unsigned long long sub = 0;
    for (;; ++sub) {
      TreeBuilder builder(oracle, oracle.seed * 1000003ULL + 7919ULL * g + sub);
      std::uniform_int_distribution<int> depth_dist(oracle.min_depth, oracle.max_depth);
      const int depth = depth_dist(builder.rng);
      const double r0 = builder.uniform(oracle.root_radius_min, oracle.root_radius_max);
      auto end = builder.grow_branch(-1, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX(),
                                     r0, true, depth == 0);
      builder.tree.root = 0;
      builder.grow(depth, end);
      if (!builder.degenerate) {
        tree = std::move(builder.tree);
        break;
      }
      cohort.generation_log.push_back("geometry " + std::to_string(g) +
                                      ": regenerated (radius underflow), attempt " +
                                      std::to_string(sub + 1));
      if (sub > 64)
        throw ValidationError("synthetic generator failed to produce a valid tree");
    }

    // Round-trip through the JSON schema so files stay the source of truth.
    char name[32];
    std::snprintf(name, sizeof(name), "%03d", g);
    const std::string tag(name);
    const auto centerline_file = out_dir / ("centerline_" + tag + ".json");
    write_centerline_json(tree, centerline_file);
    tree = parse_centerline(centerline_file);

    // Boundary conditions.
    std::mt19937_64 bc_rng(oracle.seed * 2000003ULL + 104729ULL * g);
    auto u = [&](double lo, double hi) {
      std::uniform_real_distribution<double> d(lo, hi);
      return d(bc_rng);
    };
    BoundarySpec bc;
    bc.fluid = oracle.fluid;
    bc.cycle_period = u(0.85, 1.1);
    bc.inflow_node = tree.points[tree.root].id;
    const double r0 = tree.points[tree.root].misr;
    const double q_mean = u(12.0, 18.0) * std::numbers::pi * r0 * r0;
    const double a1 = u(0.55, 0.72);
    const double a2 = u(0.12, 0.25);
    const double phase2 = u(0.0, 2.0 * std::numbers::pi);
    const int knots = 64;
    for (int i = 0; i < knots; ++i) {
      const double t = bc.cycle_period * i / knots;
      const double w = 2.0 * std::numbers::pi * i / knots;
      bc.inflow.t.push_back(t);
      bc.inflow.q.push_back(q_mean * (1.0 + a1 * std::sin(w) + a2 * std::sin(2.0 * w + phase2)));
    }
    const double p_target = u(25.0, 40.0) * 1333.22; // mmHg -> dyn/cm^2
    for (const auto& leaf : leaf_plan(tree)) {
      const double q_leaf = q_mean * leaf.share;
      const double r_total = p_target / q_leaf;
      if (u(0.0, 1.0) < 0.5) {
        bc.outlets[leaf.node] = ResistanceBC{r_total, 0.0};
      } else {
        const double tau = u(0.04, 0.15);
        WindkesselBC w;
        w.Rp = 0.1 * r_total;
        w.Rd = 0.9 * r_total;
        w.C = tau / w.Rd;
        w.Pd = 0.0;
        bc.outlets[leaf.node] = w;
      }
    }
    const auto bc_file = out_dir / ("bc_" + tag + ".json");
    write_boundary_json(bc, bc_file);

    // Processed discretization and the generating parameters Theta*.
    Discretization disc =
        entrance_length_adjust(split_multi_outlet_junctions(discretize(tree)), tree,
                               bc.fluid, factor_used);
    auto elements = circuit_elements(disc, tree);
    auto baseline = baseline_parameters(disc, tree, bc.fluid);
    CircuitNetwork baseline_net =
        assemble_network(elements, baseline, bc.all_bcs(), bc.fluid, bc.cycle_period);

    SimulationConfig base_cfg;
    base_cfg.steps_per_cycle = oracle.reference_samples;
    base_cfg.max_cycles = 20;
    base_cfg.cycle_tolerance = 1e-6;
    base_cfg.flavor = ModelFlavor::RI;
    TimeSeriesSolution base_sol = simulate(baseline_net, base_cfg);
    FlowAverages flows = cycle_average_flows(base_sol);
    const double q_in_avg = waveform_cycle_average(bc.inflow, bc.cycle_period);

    std::map<std::string, ElementParameters> truth;
    for (const auto& c : disc.connectors) truth[c.id] = ElementParameters::frozen_zero();
    for (const auto& el : featurizable_elements(disc)) {
      const FeatureVector f = extract_features(disc, tree, el, &flows, bc.fluid, q_in_avg);
      truth[el.id] = truth_parameters(oracle, el.kind, f, false);
    }
    for (const auto& jn : disc.junctions)
      for (size_t k = 0; k < jn.outlets.size(); ++k)
        if (jn.outlets[k].feeds_connector)
          truth[junction_pair_id(jn, k)] =
              truth_parameters(oracle, ElementKind::JunctionOutletPair, {}, true);

    CircuitNetwork truth_net =
        assemble_network(elements, truth, bc.all_bcs(), bc.fluid, bc.cycle_period);
    const auto truth_file = out_dir / ("truth_" + tag + ".json");
    write_network_json(truth_net, truth_file);

    // Reference: high-resolution forward simulation of Theta*, downsampled to
    // the reference grid.
    SimulationConfig fine_cfg;
    fine_cfg.steps_per_cycle = oracle.reference_samples * fine_mult;
    fine_cfg.max_cycles = 24;
    fine_cfg.cycle_tolerance = 1e-9;
    fine_cfg.flavor = oracle.flavor;
    TimeSeriesSolution fine = simulate(truth_net, fine_cfg);

    TimeSeriesSolution ref;
    ref.node_ids = fine.node_ids;
    ref.element_ids = fine.element_ids;
    ref.inflow_node = fine.inflow_node;
    ref.cycle_period = fine.cycle_period;
    ref.steps_per_cycle = oracle.reference_samples;
    ref.cycles_completed = fine.cycles_completed;
    ref.time.resize(oracle.reference_samples);
    ref.node_pressure.resize(fine.node_pressure.rows(), oracle.reference_samples);
    ref.element_flow.resize(fine.element_flow.rows(), oracle.reference_samples);
    const double dt_ref = bc.cycle_period / oracle.reference_samples;
    for (int k = 0; k < oracle.reference_samples; ++k) {
      ref.time[k] = (k + 1.0) * dt_ref;
      const Eigen::Index col = static_cast<Eigen::Index>((k + 1) * fine_mult - 1);
      ref.node_pressure.col(k) = fine.node_pressure.col(col);
      ref.element_flow.col(k) = fine.element_flow.col(col);
    }
    const auto ref_file = out_dir / ("reference_" + tag + ".csv");
    write_solution_csv(ref, ref_file);

    cohort.geometries.push_back(
        {"geo_" + tag, centerline_file, bc_file, ref_file, truth_file});
  }

  write_cohort_json(cohort, out_dir / "cohort.json");
  return cohort;
}

} // namespace zerod
