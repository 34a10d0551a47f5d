#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

// Lumped-parameter (0D) vascular network types. All quantities are CGS:
// lengths cm, time s, mass g, pressure dyn/cm^2, flow cm^3/s,
// resistance dyn.s/cm^5, inductance dyn.s^2/cm^5, capacitance cm^3/dyn.
namespace zerod {

// Thrown for malformed inputs, broken invariants and schema violations.
// CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when an iterative scheme fails to converge (Newton, training).
// CLI maps this to exit code 3.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FluidProperties {
  double density = 1.06;     // g/cm^3
  double viscosity = 0.04;   // g/(cm.s)
  double stenosis_kt = 1.52; // empirical stenosis constant, dimensionless

  void validate() const {
    if (!(density > 0.0)) throw ValidationError("fluid density must be > 0");
    if (!(viscosity > 0.0)) throw ValidationError("fluid viscosity must be > 0");
    if (stenosis_kt < 0.0) throw ValidationError("stenosis constant must be >= 0");
  }
};

// Rigid-wall default; capacitance is carried per element but never calibrated.
inline constexpr double kFixedCapacitance = 1e-10; // cm^3/dyn

// Pressure-drop law selector: RRI keeps the quadratic resistor, RI drops it.
enum class ModelFlavor { RI, RRI };

inline std::string to_string(ModelFlavor f) { return f == ModelFlavor::RI ? "ri" : "rri"; }

// Theta = {R_lin, R_quad, L} plus the fixed capacitance. Calibrated values
// may be negative; no sign constraints. Frozen components are never touched
// by calibration.
struct ElementParameters {
  double R_lin = 0.0;  // dyn.s/cm^5
  double R_quad = 0.0; // dyn.s^2/cm^8
  double L = 0.0;      // dyn.s^2/cm^5
  double C = kFixedCapacitance; // cm^3/dyn, fixed
  bool frozen_R_lin = false;
  bool frozen_R_quad = false;
  bool frozen_L = false;

  static ElementParameters frozen_zero() {
    ElementParameters p;
    p.frozen_R_lin = p.frozen_R_quad = p.frozen_L = true;
    return p;
  }

  void validate() const {
    if (!(C > 0.0)) throw ValidationError("element capacitance must be > 0");
  }
};

enum class ElementKind { Vessel, JunctionOutletPair, Connector };

inline std::string to_string(ElementKind k) {
  switch (k) {
    case ElementKind::Vessel: return "vessel";
    case ElementKind::JunctionOutletPair: return "junction-outlet-pair";
    case ElementKind::Connector: return "connector";
  }
  return "?";
}

struct VesselGeometry {
  double length = 0.0;        // cm
  double area = 0.0;          // cm^2
  double stenosis_area = 0.0; // cm^2, smallest cross-section
};

// Two-terminal network element. Junction-outlet-pair elements represent one
// (inlet, outlet) pair of a bifurcation; connectors are artificial zero-length
// elements whose parameters stay frozen at zero.
struct Element {
  std::string id;
  ElementKind kind = ElementKind::Vessel;
  int inlet = -1;  // node id
  int outlet = -1; // node id
  ElementParameters params;
  std::optional<VesselGeometry> geometry; // vessels only
};

// Periodic prescribed-flow waveform covering exactly one cycle.
struct InflowWaveform {
  std::vector<double> t; // s, ascending, t.front() == 0, t.back() <= period
  std::vector<double> q; // cm^3/s
};

struct PrescribedInflow {
  InflowWaveform waveform;
};

struct ResistanceBC {
  double Rd = 0.0; // dyn.s/cm^5
  double Pd = 0.0; // dyn/cm^2, distal reference pressure
};

struct WindkesselBC { // RCR
  double Rp = 0.0; // proximal resistance
  double C = 0.0;  // compliance, cm^3/dyn
  double Rd = 0.0; // distal resistance
  double Pd = 0.0; // distal reference pressure
};

using BoundaryCondition = std::variant<PrescribedInflow, ResistanceBC, WindkesselBC>;

// A runnable 0D system: a tree of elements plus boundary conditions keyed by
// node id. Exactly one prescribed-inflow node; every leaf carries one outlet BC.
struct CircuitNetwork {
  FluidProperties fluid;
  double cycle_period = 1.0; // s
  std::vector<Element> elements;
  std::map<int, BoundaryCondition> boundary_conditions;

  std::vector<int> node_ids() const; // sorted, unique
  int inflow_node() const;           // throws if not exactly one
  const Element* find_element(const std::string& id) const;
};

// Periodic piecewise-linear evaluation of the waveform at time t (any t >= 0).
double waveform_value(const InflowWaveform& w, double period, double t);

} // namespace zerod
