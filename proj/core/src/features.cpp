#include <zerod/features.hpp>

#include <zerod/io.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace zerod {

const std::vector<std::string>& FeatureVector::names() {
  static const std::vector<std::string> n{
      "r_in", "r_out", "r_min", "r_max", "r_out_star", "r_min_star", "r_max_star",
      "l", "l_star", "tortuosity", "angle", "flow_ratio",
      "absorbed_R_poiseuille", "absorbed_R_stenosis", "absorbed_L",
      "calculated_R_poiseuille", "calculated_R_stenosis", "calculated_L"};
  return n;
}

std::vector<double> FeatureVector::values(bool include_flow_ratio) const {
  std::vector<double> v{r_in, r_out, r_min, r_max, r_out_star, r_min_star, r_max_star,
                        length, length_star, tortuosity, angle};
  if (include_flow_ratio) v.push_back(flow_ratio.value_or(1.0));
  v.insert(v.end(), {absorbed_R_poiseuille, absorbed_R_stenosis, absorbed_L,
                     calculated_R_poiseuille, calculated_R_stenosis, calculated_L});
  return v;
}

std::vector<ElementRef> featurizable_elements(const Discretization& disc) {
  std::vector<ElementRef> out;
  for (const auto& v : disc.vessels)
    out.push_back({ElementKind::Vessel, v.id, &v, nullptr, 0});
  for (const auto& j : disc.junctions)
    for (size_t k = 0; k < j.outlets.size(); ++k) {
      if (j.outlets[k].feeds_connector) continue; // no geometry behind connector feeds
      out.push_back({ElementKind::JunctionOutletPair, junction_pair_id(j, k), nullptr, &j, k});
    }
  return out;
}

FeatureVector extract_features(const Discretization& disc, const CenterlineTree& tree,
                               const ElementRef& element, const FlowAverages* baseline_flows,
                               const FluidProperties& fluid, double inflow_cycle_average) {
  const std::vector<int>* path = nullptr;
  if (element.kind == ElementKind::Vessel) {
    path = &element.vessel->points;
  } else if (element.kind == ElementKind::JunctionOutletPair) {
    path = &element.junction->outlets[element.outlet_index].path;
  } else {
    throw ValidationError("connector elements have no geometric features");
  }
  if (path->size() < 2)
    throw ValidationError("element " + element.id + " has a degenerate centerline path");

  const auto& pin = tree.by_id(path->front());
  const auto& pout = tree.by_id(path->back());

  FeatureVector f;
  f.r_in = pin.misr;
  f.r_out = pout.misr;
  f.r_min = std::numeric_limits<double>::infinity();
  f.r_max = 0.0;
  for (int id : *path) {
    const double r = tree.by_id(id).misr;
    f.r_min = std::min(f.r_min, r);
    f.r_max = std::max(f.r_max, r);
  }
  f.r_out_star = f.r_out / f.r_in;
  f.r_min_star = f.r_min / f.r_out;
  f.r_max_star = f.r_max / f.r_out;
  f.length = pout.path_distance - pin.path_distance;
  f.length_star = f.length / f.r_in;

  const double straight = (pout.xyz - pin.xyz).norm();
  if (straight <= 1e-12 * std::max(1.0, f.length)) {
    if (f.length > 0.0)
      throw ValidationError("element " + element.id +
                            ": coincident endpoints make tortuosity undefined");
    f.tortuosity = 1.0;
  } else {
    f.tortuosity = f.length / straight;
  }

  const double ct = std::clamp(pin.tangent.dot(pout.tangent), -1.0, 1.0);
  f.angle = std::acos(ct);

  if (element.kind == ElementKind::JunctionOutletPair) {
    if (baseline_flows == nullptr)
      throw ValidationError("junction features require baseline flow averages");
    auto it = baseline_flows->find(element.id);
    if (it == baseline_flows->end())
      throw ValidationError("baseline flows missing element " + element.id);
    const double q_out = it->second;
    // Flow entering this (possibly split) bifurcation: the sum over elements
    // discharging into its inlet node, or the inflow average at the root.
    double q_in = 0.0;
    bool found_upstream = false;
    const int inlet = element.junction->inlet_node;
    auto add_if_outlet = [&](const std::string& id, int outlet_node) {
      if (outlet_node != inlet) return;
      auto fit = baseline_flows->find(id);
      if (fit != baseline_flows->end()) {
        q_in += fit->second;
        found_upstream = true;
      }
    };
    for (const auto& v : disc.vessels) add_if_outlet(v.id, v.points.back());
    for (const auto& c : disc.connectors) add_if_outlet(c.id, c.outlet_node);
    for (const auto& j : disc.junctions)
      for (size_t k = 0; k < j.outlets.size(); ++k)
        add_if_outlet(junction_pair_id(j, k), j.outlets[k].outlet_node);
    if (!found_upstream) q_in = inflow_cycle_average;
    f.flow_ratio = q_in / q_out;

    const auto& o = element.junction->outlets[element.outlet_index];
    f.absorbed_R_poiseuille = o.absorbed.R_lin;
    f.absorbed_R_stenosis = o.absorbed.R_quad;
    f.absorbed_L = o.absorbed.L;
  }

  const double area_out = std::numbers::pi * f.r_out * f.r_out;
  const double area_min = std::numbers::pi * f.r_min * f.r_min;
  const auto calc = poiseuille_parameters(fluid, f.length, area_out, area_min);
  f.calculated_R_poiseuille = calc.R_lin;
  f.calculated_R_stenosis = calc.R_quad;
  f.calculated_L = calc.L;
  return f;
}

GenerationMap generation_numbers(const Discretization& disc) {
  GenerationMap gamma;

  struct Arc {
    std::string id;
    int to;
    int increment; // 1 when leaving a bifurcation through a real outlet
  };
  std::map<int, std::vector<Arc>> out;
  for (const auto& v : disc.vessels)
    out[v.points.front()].push_back({v.id, v.points.back(), 0});
  for (const auto& c : disc.connectors)
    out[c.inlet_node].push_back({c.id, c.outlet_node, 0});
  for (const auto& j : disc.junctions)
    for (size_t k = 0; k < j.outlets.size(); ++k)
      out[j.inlet_node].push_back({junction_pair_id(j, k), j.outlets[k].outlet_node,
                                   j.outlets[k].feeds_connector ? 0 : 1});

  // BFS from the root. gamma(element) counts original junctions strictly
  // upstream; split chains and their connectors share the junction's gamma.
  std::vector<std::pair<int, int>> frontier{{disc.root_node, 0}};
  std::set<int> seen{disc.root_node};
  for (size_t qi = 0; qi < frontier.size(); ++qi) {
    auto [node, count] = frontier[qi];
    auto it = out.find(node);
    if (it == out.end()) continue;
    for (const auto& arc : it->second) {
      gamma[arc.id] = count;
      if (seen.insert(arc.to).second)
        frontier.push_back({arc.to, count + arc.increment});
    }
  }
  return gamma;
}

std::string feature_csv_header() {
  std::string h;
  for (const auto& n : FeatureVector::names()) h += n + ",";
  return h + "element_kind,gamma,geometry_id,element_id";
}

std::string feature_row_to_csv(const FeatureRow& row) {
  const bool junction = row.kind == ElementKind::JunctionOutletPair;
  const auto& f = row.features;
  std::ostringstream os;
  auto put = [&](double v) { os << format_double(v) << ","; };
  put(f.r_in);
  put(f.r_out);
  put(f.r_min);
  put(f.r_max);
  put(f.r_out_star);
  put(f.r_min_star);
  put(f.r_max_star);
  put(f.length);
  put(f.length_star);
  put(f.tortuosity);
  put(f.angle);
  if (junction && f.flow_ratio)
    os << format_double(*f.flow_ratio) << ",";
  else
    os << ","; // vessels carry no flow ratio
  put(f.absorbed_R_poiseuille);
  put(f.absorbed_R_stenosis);
  put(f.absorbed_L);
  put(f.calculated_R_poiseuille);
  put(f.calculated_R_stenosis);
  put(f.calculated_L);
  os << to_string(row.kind) << "," << row.gamma << "," << row.geometry_id << ","
     << row.element_id;
  return os.str();
}

void write_feature_csv(const std::vector<FeatureRow>& rows, const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot write feature file: " + file.string());
  os << feature_csv_header() << "\n";
  for (const auto& r : rows) os << feature_row_to_csv(r) << "\n";
}

std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ValidationError("cannot open feature file: " + file.string());
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("empty feature file");
  if (line != feature_csv_header())
    throw ValidationError("unexpected feature CSV header in " + file.string());

  std::vector<FeatureRow> rows;
  size_t n_line = 1;
  while (std::getline(is, line)) {
    ++n_line;
    if (line.empty()) continue;
    std::vector<std::string> f;
    size_t start = 0;
    while (true) {
      size_t pos = line.find(',', start);
      if (pos == std::string::npos) {
        f.push_back(line.substr(start));
        break;
      }
      f.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    if (f.size() != FeatureVector::kCount + 4)
      throw ValidationError("malformed feature CSV line " + std::to_string(n_line));
    FeatureRow row;
    auto& v = row.features;
    int i = 0;
    auto num = [&]() { return std::stod(f[i++]); };
    v.r_in = num();
    v.r_out = num();
    v.r_min = num();
    v.r_max = num();
    v.r_out_star = num();
    v.r_min_star = num();
    v.r_max_star = num();
    v.length = num();
    v.length_star = num();
    v.tortuosity = num();
    v.angle = num();
    if (f[i].empty()) {
      v.flow_ratio.reset();
      ++i;
    } else {
      v.flow_ratio = num();
    }
    v.absorbed_R_poiseuille = num();
    v.absorbed_R_stenosis = num();
    v.absorbed_L = num();
    v.calculated_R_poiseuille = num();
    v.calculated_R_stenosis = num();
    v.calculated_L = num();
    if (f[i] == "vessel") row.kind = ElementKind::Vessel;
    else if (f[i] == "junction-outlet-pair") row.kind = ElementKind::JunctionOutletPair;
    else throw ValidationError("unexpected element kind '" + f[i] + "' in feature CSV");
    ++i;
    row.gamma = std::stoi(f[i++]);
    row.geometry_id = f[i++];
    row.element_id = f[i++];
    rows.push_back(std::move(row));
  }
  return rows;
}

} // namespace zerod
