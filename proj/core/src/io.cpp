#include <zerod/io.hpp>
#include <array>

#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace zerod {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

namespace {

json params_to_json(const ElementParameters& p) {
  json j{{"R_lin", p.R_lin}, {"R_quad", p.R_quad}, {"L", p.L}, {"C", p.C}};
  json frozen = json::array();
  if (p.frozen_R_lin) frozen.push_back("R_lin");
  if (p.frozen_R_quad) frozen.push_back("R_quad");
  if (p.frozen_L) frozen.push_back("L");
  if (!frozen.empty()) j["frozen"] = frozen;
  return j;
}

ElementParameters params_from_json(const json& j) {
  ElementParameters p;
  p.R_lin = j.at("R_lin").get<double>();
  p.R_quad = j.at("R_quad").get<double>();
  p.L = j.at("L").get<double>();
  p.C = j.value("C", kFixedCapacitance);
  if (j.contains("frozen"))
    for (const auto& f : j.at("frozen")) {
      const std::string name = f.get<std::string>();
      if (name == "R_lin") p.frozen_R_lin = true;
      else if (name == "R_quad") p.frozen_R_quad = true;
      else if (name == "L") p.frozen_L = true;
      else throw ValidationError("unknown frozen parameter name: " + name);
    }
  return p;
}

ElementKind kind_from_string(const std::string& s) {
  if (s == "vessel") return ElementKind::Vessel;
  if (s == "junction-outlet-pair") return ElementKind::JunctionOutletPair;
  if (s == "connector") return ElementKind::Connector;
  throw ValidationError("unknown element kind: " + s);
}

json bc_to_json(const BoundaryCondition& bc) {
  if (const auto* in = std::get_if<PrescribedInflow>(&bc))
    return json{{"type", "FLOW"}, {"t", in->waveform.t}, {"Q", in->waveform.q}};
  if (const auto* r = std::get_if<ResistanceBC>(&bc))
    return json{{"type", "RESISTANCE"}, {"Rd", r->Rd}, {"Pd", r->Pd}};
  const auto& w = std::get<WindkesselBC>(bc);
  return json{{"type", "RCR"}, {"Rp", w.Rp}, {"C", w.C}, {"Rd", w.Rd}, {"Pd", w.Pd}};
}

BoundaryCondition bc_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "FLOW") {
    PrescribedInflow in;
    in.waveform.t = j.at("t").get<std::vector<double>>();
    in.waveform.q = j.at("Q").get<std::vector<double>>();
    return in;
  }
  if (type == "RESISTANCE")
    return ResistanceBC{j.at("Rd").get<double>(), j.at("Pd").get<double>()};
  if (type == "RCR")
    return WindkesselBC{j.at("Rp").get<double>(), j.at("C").get<double>(),
                        j.at("Rd").get<double>(), j.at("Pd").get<double>()};
  throw ValidationError("unknown boundary condition type: " + type);
}

} // namespace

std::string network_to_json(const CircuitNetwork& net) {
  json j;
  j["fluid"] = {{"density", net.fluid.density},
                {"viscosity", net.fluid.viscosity},
                {"stenosis_kt", net.fluid.stenosis_kt}};
  j["cycle_period"] = net.cycle_period;
  json elems = json::array();
  for (const auto& e : net.elements) {
    json je{{"id", e.id},
            {"kind", to_string(e.kind)},
            {"inlet", e.inlet},
            {"outlet", e.outlet},
            {"params", params_to_json(e.params)}};
    if (e.geometry)
      je["geometry"] = {{"l", e.geometry->length},
                        {"A", e.geometry->area},
                        {"A_stenosis", e.geometry->stenosis_area}};
    elems.push_back(je);
  }
  j["elements"] = elems;
  json bcs = json::object();
  for (const auto& [node, bc] : net.boundary_conditions)
    bcs[std::to_string(node)] = bc_to_json(bc);
  j["boundary_conditions"] = bcs;
  return j.dump(2) + "\n";
}

CircuitNetwork parse_network_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("network JSON parse error: ") + e.what());
  }
  try {
    CircuitNetwork net;
    const auto& jf = j.at("fluid");
    net.fluid.density = jf.at("density").get<double>();
    net.fluid.viscosity = jf.at("viscosity").get<double>();
    net.fluid.stenosis_kt = jf.value("stenosis_kt", 1.52);
    net.cycle_period = j.at("cycle_period").get<double>();
    for (const auto& je : j.at("elements")) {
      Element e;
      e.id = je.at("id").get<std::string>();
      e.kind = kind_from_string(je.at("kind").get<std::string>());
      e.inlet = je.at("inlet").get<int>();
      e.outlet = je.at("outlet").get<int>();
      e.params = params_from_json(je.at("params"));
      if (je.contains("geometry")) {
        const auto& jg = je.at("geometry");
        e.geometry = VesselGeometry{jg.at("l").get<double>(), jg.at("A").get<double>(),
                                    jg.at("A_stenosis").get<double>()};
      }
      net.elements.push_back(std::move(e));
    }
    for (const auto& [key, val] : j.at("boundary_conditions").items())
      net.boundary_conditions[std::stoi(key)] = bc_from_json(val);
    return net;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("network JSON schema error: ") + e.what());
  }
}

CircuitNetwork read_network_json(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ValidationError("cannot open network file: " + file.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_network_json(ss.str());
}

void write_network_json(const CircuitNetwork& net, const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot write network file: " + file.string());
  os << network_to_json(net);
}

void write_solution_csv(const TimeSeriesSolution& sol, std::ostream& os,
                        bool last_cycle_only) {
  const TimeSeriesSolution* s = &sol;
  TimeSeriesSolution trimmed;
  if (last_cycle_only && sol.time.size() > static_cast<size_t>(sol.steps_per_cycle)) {
    trimmed = last_cycle(sol);
    s = &trimmed;
  }
  os << "time,entity_kind,entity_id,quantity,value\n";
  for (size_t k = 0; k < s->time.size(); ++k) {
    const std::string t = format_double(s->time[k]);
    for (size_t ni = 0; ni < s->node_ids.size(); ++ni)
      os << t << ",node," << s->node_ids[ni] << ",P,"
         << format_double(s->node_pressure(static_cast<Eigen::Index>(ni),
                                           static_cast<Eigen::Index>(k)))
         << "\n";
    for (size_t ei = 0; ei < s->element_ids.size(); ++ei)
      os << t << ",element," << s->element_ids[ei] << ",Q,"
         << format_double(s->element_flow(static_cast<Eigen::Index>(ei),
                                          static_cast<Eigen::Index>(k)))
         << "\n";
  }
}

void write_solution_csv(const TimeSeriesSolution& sol, const std::filesystem::path& file,
                        bool last_cycle_only) {
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot write solution file: " + file.string());
  write_solution_csv(sol, os, last_cycle_only);
}

RawSeries read_series_csv(std::istream& is) {
  RawSeries out;
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("empty series CSV");
  if (line != "time,entity_kind,entity_id,quantity,value")
    throw ValidationError("unexpected series CSV header: " + line);
  double current_t = std::numeric_limits<double>::quiet_NaN();
  size_t n_lines = 1;
  while (std::getline(is, line)) {
    ++n_lines;
    if (line.empty()) continue;
    std::array<std::string, 5> f;
    size_t start = 0;
    for (int i = 0; i < 5; ++i) {
      size_t pos = i < 4 ? line.find(',', start) : line.size();
      if (pos == std::string::npos)
        throw ValidationError("malformed series CSV line " + std::to_string(n_lines));
      f[i] = line.substr(start, pos - start);
      start = pos + 1;
    }
    const double t = std::stod(f[0]);
    const double v = std::stod(f[4]);
    if (out.time.empty() || t != current_t) {
      out.time.push_back(t);
      current_t = t;
    }
    if (f[1] == "node" && f[3] == "P")
      out.node_pressure[std::stoi(f[2])].push_back(v);
    else if (f[1] == "element" && f[3] == "Q")
      out.element_flow[f[2]].push_back(v);
    else
      throw ValidationError("unexpected series CSV row kind '" + f[1] + "," + f[3] + "'");
  }
  const size_t n = out.time.size();
  for (const auto& [id, v] : out.node_pressure)
    if (v.size() != n)
      throw ValidationError("ragged series for node " + std::to_string(id));
  for (const auto& [id, v] : out.element_flow)
    if (v.size() != n) throw ValidationError("ragged series for element " + id);
  return out;
}

RawSeries read_series_csv(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ValidationError("cannot open series file: " + file.string());
  return read_series_csv(is);
}

} // namespace zerod
