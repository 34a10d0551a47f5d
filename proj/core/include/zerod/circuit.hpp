#pragma once

#include <zerod/types.hpp>

namespace zerod {

// Poiseuille / empirical-stenosis parameters for a vessel of length l,
// cross-section area A and minimal (stenosis) area A_s:
//   R_lin  = 8 pi mu l / A^2
//   R_quad = Kt rho / (2 A^2) * (A / A_s - 1)^2
//   L      = rho l / A
// The capacitance is set to `capacitance` (fixed, not derived from geometry).
ElementParameters poiseuille_parameters(const FluidProperties& fluid, double length,
                                        double area, double stenosis_area,
                                        double capacitance = kFixedCapacitance);

inline ElementParameters poiseuille_parameters(const FluidProperties& fluid,
                                               const VesselGeometry& g,
                                               double capacitance = kFixedCapacitance) {
  return poiseuille_parameters(fluid, g.length, g.area, g.stenosis_area, capacitance);
}

// Signed pressure drop over one element:
//   RRI: dP = R_lin Q + R_quad Q|Q| + L dQ/dt
//   RI:  dP = R_lin Q + L dQ/dt
// The quadratic term uses Q|Q| so the drop changes sign with the flow.
double element_pressure_drop(const ElementParameters& p, double Q, double dQdt,
                             ModelFlavor flavor = ModelFlavor::RRI);

// One structural problem found by validate_network.
struct Diagnostic {
  std::string entity;  // offending node/element id (may be empty)
  std::string message;
};

// Structural validation: returns one diagnostic per violated CircuitNetwork
// invariant (empty means the network is well-formed). Never throws.
std::vector<Diagnostic> validate_network(const CircuitNetwork& net);

// Builds a validated network from parts. Connector elements always receive
// frozen zero parameters regardless of what `params` says for them.
// Throws ValidationError listing every diagnostic if the result is invalid.
CircuitNetwork assemble_network(const std::vector<Element>& elements,
                                const std::map<std::string, ElementParameters>& params,
                                const std::map<int, BoundaryCondition>& bcs,
                                const FluidProperties& fluid, double cycle_period);

} // namespace zerod
