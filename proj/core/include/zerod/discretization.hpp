#pragma once

#include <zerod/centerline.hpp>
#include <zerod/circuit.hpp>

namespace zerod {

// One junction (inlet, outlet) pair. The circuit node of the outlet may be a
// synthetic connector node after splitting; the geometric path always runs
// from the original junction inlet point to a real centerline point.
struct JunctionOutlet {
  int outlet_node = -1;          // circuit node id
  std::vector<int> path;         // centerline point ids, geometric inlet -> outlet
  double in_junction_length = 0; // l_j, path length from geometric inlet (cm)
  bool feeds_connector = false;  // outlet couples to an artificial connector
  ElementParameters absorbed;    // Poiseuille parameters of absorbed vessel material
  double absorbed_length = 0.0;  // cm
};

// After discretize(): one inlet, n >= 1 outlets. After splitting: exactly 2.
struct JunctionElement {
  std::string id;
  int origin_junction = -1;       // index of the original junction region
  int inlet_node = -1;            // circuit node id (synthetic inside split chains)
  int geometric_inlet_point = -1; // centerline point id of the original inlet
  std::vector<JunctionOutlet> outlets;
};

struct VesselSegment {
  std::string id;
  std::vector<int> points; // centerline point ids, inlet..outlet, size >= 2
  int branch_id = 0;
};

struct ConnectorSegment {
  std::string id;
  int inlet_node = -1;  // synthetic node ids; inlet/outlet coincide in space
  int outlet_node = -1;
  int location_point = -1;   // centerline point the connector sits at
  int origin_junction = -1;
};

// Vessel/junction element graph between centerline points (plus synthetic
// connector nodes). Node ids < synthetic_node_base are centerline point ids.
struct Discretization {
  std::vector<VesselSegment> vessels;
  std::vector<JunctionElement> junctions;
  std::vector<ConnectorSegment> connectors;
  int root_node = -1;
  int synthetic_node_base = 0; // first synthetic node id
  int next_synthetic_node = 0;
  std::vector<std::string> provenance; // human-readable preprocessing notes

  const JunctionElement* find_junction(const std::string& id) const;
};

// Contiguous runs of non-junction points become vessels; connected components
// of junction-flagged points become junctions with one inlet and n outlets.
// Per-outlet l_j is the in-junction centerline path length.
Discretization discretize(const CenterlineTree& tree);

// Algorithm: every junction with n >= 3 outlets becomes a chain of n-1
// bifurcations joined by n-2 zero-length connectors. Outlets are attached in
// ascending l_j order (ties broken by outlet node id); the final bifurcation
// takes the two longest-l_j outlets.
Discretization split_multi_outlet_junctions(const Discretization& disc);

// Moves every junction outlet boundary downstream by the pseudo entrance
// length L_e = factor * r_outlet (snapped to the nearest centerline point at
// >= L_e). A downstream vessel shorter than L_e is absorbed whole and replaced
// by a zero-length connector. Absorbed material contributes the "absorbed"
// Poiseuille parameters recorded on the outlet. factor = 0 is the identity.
Discretization entrance_length_adjust(const Discretization& disc, const CenterlineTree& tree,
                                      const FluidProperties& fluid, double factor = 10.0);

// Circuit elements of a discretization, in deterministic order: vessels,
// junction outlet pairs, connectors. Vessel geometry uses the mean MISR for
// the nominal area and the minimum MISR for the stenosis area.
std::vector<Element> circuit_elements(const Discretization& disc, const CenterlineTree& tree);

// Pair element id for outlet k of a junction.
std::string junction_pair_id(const JunctionElement& j, size_t outlet_index);

// Baseline parameter set: Poiseuille values for vessels, zeros for junction
// pairs (constant-pressure junction), frozen zeros for connectors.
std::map<std::string, ElementParameters> baseline_parameters(const Discretization& disc,
                                                             const CenterlineTree& tree,
                                                             const FluidProperties& fluid);

VesselGeometry vessel_geometry(const std::vector<int>& point_ids, const CenterlineTree& tree);

} // namespace zerod
