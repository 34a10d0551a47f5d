#include <zerod/circuit.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace zerod {

std::vector<int> CircuitNetwork::node_ids() const {
  std::set<int> ids;
  for (const auto& e : elements) {
    ids.insert(e.inlet);
    ids.insert(e.outlet);
  }
  return {ids.begin(), ids.end()};
}

int CircuitNetwork::inflow_node() const {
  int node = -1;
  int count = 0;
  for (const auto& [n, bc] : boundary_conditions) {
    if (std::holds_alternative<PrescribedInflow>(bc)) {
      node = n;
      ++count;
    }
  }
  if (count != 1)
    throw ValidationError("network must have exactly one prescribed-inflow node, found " +
                          std::to_string(count));
  return node;
}

const Element* CircuitNetwork::find_element(const std::string& id) const {
  for (const auto& e : elements)
    if (e.id == id) return &e;
  return nullptr;
}

double waveform_value(const InflowWaveform& w, double period, double t) {
  if (w.t.empty()) throw ValidationError("empty inflow waveform");
  if (w.t.size() == 1) return w.q.front();
  double tau = std::fmod(t, period);
  if (tau < 0.0) tau += period;
  // Table covers [t0, tN] within one period; wrap interpolates tN -> t0+period.
  auto it = std::upper_bound(w.t.begin(), w.t.end(), tau);
  if (it == w.t.begin()) {
    // tau before the first knot: wrap from the last knot.
    double t0 = w.t.back() - period, t1 = w.t.front();
    double a = (tau - t0) / (t1 - t0);
    return w.q.back() + a * (w.q.front() - w.q.back());
  }
  if (it == w.t.end()) {
    double t0 = w.t.back(), t1 = w.t.front() + period;
    if (t1 == t0) return w.q.back();
    double a = (tau - t0) / (t1 - t0);
    return w.q.back() + a * (w.q.front() - w.q.back());
  }
  size_t i = static_cast<size_t>(it - w.t.begin());
  double t0 = w.t[i - 1], t1 = w.t[i];
  double a = (tau - t0) / (t1 - t0);
  return w.q[i - 1] + a * (w.q[i] - w.q[i - 1]);
}

ElementParameters poiseuille_parameters(const FluidProperties& fluid, double length,
                                        double area, double stenosis_area,
                                        double capacitance) {
  fluid.validate();
  if (!(area > 0.0) || !(stenosis_area > 0.0))
    throw ValidationError("invalid geometry: vessel areas must be > 0");
  if (length < 0.0) throw ValidationError("invalid geometry: vessel length must be >= 0");
  ElementParameters p;
  const double a2 = area * area;
  p.R_lin = 8.0 * std::numbers::pi * fluid.viscosity * length / a2;
  const double ratio = area / stenosis_area - 1.0;
  p.R_quad = fluid.stenosis_kt * fluid.density / (2.0 * a2) * ratio * ratio;
  p.L = fluid.density * length / area;
  p.C = capacitance;
  return p;
}

double element_pressure_drop(const ElementParameters& p, double Q, double dQdt,
                             ModelFlavor flavor) {
  double dp = p.R_lin * Q + p.L * dQdt;
  if (flavor == ModelFlavor::RRI) dp += p.R_quad * Q * std::abs(Q);
  return dp;
}

namespace {

void check_bc_values(int node, const BoundaryCondition& bc, double period,
                     std::vector<Diagnostic>& out) {
  const std::string id = std::to_string(node);
  if (const auto* in = std::get_if<PrescribedInflow>(&bc)) {
    const auto& w = in->waveform;
    if (w.t.size() != w.q.size() || w.t.empty()) {
      out.push_back({id, "inflow waveform table is empty or ragged"});
      return;
    }
    if (w.t.front() != 0.0)
      out.push_back({id, "inflow waveform must start at t = 0"});
    if (!std::is_sorted(w.t.begin(), w.t.end()))
      out.push_back({id, "inflow waveform times must be ascending"});
    if (w.t.back() > period)
      out.push_back({id, "inflow waveform extends past one cycle period"});
  } else if (const auto* r = std::get_if<ResistanceBC>(&bc)) {
    if (r->Rd < 0.0) out.push_back({id, "resistance BC requires Rd >= 0"});
  } else if (const auto* w = std::get_if<WindkesselBC>(&bc)) {
    if (w->Rp < 0.0 || w->Rd < 0.0) out.push_back({id, "RCR BC requires Rp, Rd >= 0"});
    if (!(w->C > 0.0)) out.push_back({id, "RCR BC requires C > 0"});
  }
}

} // namespace

std::vector<Diagnostic> validate_network(const CircuitNetwork& net) {
  std::vector<Diagnostic> out;

  if (!(net.cycle_period > 0.0)) out.push_back({"", "cycle period must be > 0"});
  if (!(net.fluid.density > 0.0) || !(net.fluid.viscosity > 0.0) || net.fluid.stenosis_kt < 0.0)
    out.push_back({"", "fluid properties out of range"});

  if (net.elements.empty()) {
    out.push_back({"", "network has no elements"});
    return out;
  }

  std::set<std::string> element_ids;
  std::map<int, int> degree;
  for (const auto& e : net.elements) {
    if (!element_ids.insert(e.id).second)
      out.push_back({e.id, "duplicate element id"});
    if (e.inlet == e.outlet)
      out.push_back({e.id, "element inlet and outlet nodes coincide"});
    ++degree[e.inlet];
    ++degree[e.outlet];
    if (!(e.params.C > 0.0)) out.push_back({e.id, "element capacitance must be > 0"});
    if (e.kind == ElementKind::Connector) {
      if (e.params.R_lin != 0.0 || e.params.R_quad != 0.0 || e.params.L != 0.0)
        out.push_back({e.id, "connector parameters must be zero"});
      if (!e.params.frozen_R_lin || !e.params.frozen_R_quad || !e.params.frozen_L)
        out.push_back({e.id, "connector parameters must be frozen"});
      if (e.geometry && e.geometry->length != 0.0)
        out.push_back({e.id, "connector length must be zero"});
    }
    if (e.kind == ElementKind::Vessel) {
      if (!e.geometry) {
        out.push_back({e.id, "vessel element is missing geometry"});
      } else {
        if (!(e.geometry->area > 0.0) || !(e.geometry->stenosis_area > 0.0))
          out.push_back({e.id, "vessel areas must be > 0"});
        else if (e.geometry->stenosis_area > e.geometry->area * (1.0 + 1e-12))
          out.push_back({e.id, "vessel stenosis area exceeds nominal area"});
        if (e.geometry->length < 0.0)
          out.push_back({e.id, "vessel length must be >= 0"});
      }
    }
  }

  // Topology: connected and acyclic over the undirected element graph.
  {
    std::map<int, std::vector<int>> adj; // node -> element indices
    for (size_t i = 0; i < net.elements.size(); ++i) {
      adj[net.elements[i].inlet].push_back(static_cast<int>(i));
      adj[net.elements[i].outlet].push_back(static_cast<int>(i));
    }
    const size_t n_nodes = adj.size();
    const size_t n_elems = net.elements.size();
    std::set<int> seen;
    std::vector<int> stack{adj.begin()->first};
    std::vector<bool> used(n_elems, false);
    seen.insert(stack.back());
    while (!stack.empty()) {
      int node = stack.back();
      stack.pop_back();
      for (int ei : adj[node]) {
        if (used[ei]) continue;
        used[ei] = true;
        const auto& e = net.elements[ei];
        int other = e.inlet == node ? e.outlet : e.inlet;
        if (seen.insert(other).second) stack.push_back(other);
      }
    }
    if (seen.size() != n_nodes)
      out.push_back({"", "element graph is disconnected"});
    else if (n_elems != n_nodes - 1)
      out.push_back({"", "element graph contains a cycle (tree expected)"});
  }

  // Boundary conditions: exactly one inflow, every leaf exactly one outlet BC.
  int inflow_count = 0;
  for (const auto& [node, bc] : net.boundary_conditions) {
    if (degree.find(node) == degree.end())
      out.push_back({std::to_string(node), "boundary condition on unknown node"});
    if (std::holds_alternative<PrescribedInflow>(bc)) ++inflow_count;
    check_bc_values(node, bc, net.cycle_period, out);
  }
  if (inflow_count != 1)
    out.push_back({"", "expected exactly one prescribed-inflow node, found " +
                           std::to_string(inflow_count)});

  for (const auto& [node, deg] : degree) {
    auto it = net.boundary_conditions.find(node);
    const bool has_bc = it != net.boundary_conditions.end();
    const bool is_inflow = has_bc && std::holds_alternative<PrescribedInflow>(it->second);
    if (deg == 1) {
      if (!has_bc)
        out.push_back({std::to_string(node), "leaf node has no boundary condition"});
    } else {
      if (has_bc && !is_inflow)
        out.push_back({std::to_string(node), "outlet boundary condition on interior node"});
      if (!has_bc && deg < 2)
        out.push_back({std::to_string(node), "interior node touches fewer than 2 elements"});
    }
  }

  return out;
}

CircuitNetwork assemble_network(const std::vector<Element>& elements,
                                const std::map<std::string, ElementParameters>& params,
                                const std::map<int, BoundaryCondition>& bcs,
                                const FluidProperties& fluid, double cycle_period) {
  CircuitNetwork net;
  net.fluid = fluid;
  net.cycle_period = cycle_period;
  net.boundary_conditions = bcs;
  net.elements = elements;
  for (auto& e : net.elements) {
    if (e.kind == ElementKind::Connector) {
      e.params = ElementParameters::frozen_zero();
      continue;
    }
    auto it = params.find(e.id);
    if (it == params.end())
      throw ValidationError("missing parameters for element " + e.id);
    e.params = it->second;
  }
  auto diags = validate_network(net);
  if (!diags.empty()) {
    std::ostringstream oss;
    oss << "network validation failed:";
    for (const auto& d : diags) {
      oss << "\n  ";
      if (!d.entity.empty()) oss << "[" << d.entity << "] ";
      oss << d.message;
    }
    throw ValidationError(oss.str());
  }
  return net;
}

} // namespace zerod
