#pragma once

#include <zerod/centerline.hpp>
#include <zerod/circuit.hpp>
#include <zerod/solver.hpp>

#include <random>

namespace zerod::test {

// Constant-inflow waveform table.
InflowWaveform constant_inflow(double q);

// Sinusoidal-plus-offset inflow sampled on `knots` points over one period.
InflowWaveform sampled_inflow(double period, int knots, double mean, double a1,
                              double a2 = 0.0, double phase2 = 0.0);

// inflow -> vessel -> resistance BC, the minimal two-node network.
CircuitNetwork single_vessel_network(const ElementParameters& vessel, double inflow_q,
                                     double rd, double pd, double period = 1.0);

CircuitNetwork single_vessel_network(const ElementParameters& vessel,
                                     const InflowWaveform& inflow, double rd, double pd,
                                     double period = 1.0);

// inflow -> near-zero-resistance vessel -> RCR BC.
CircuitNetwork rcr_network(double inflow_q, double rp, double c, double rd, double pd,
                           double period = 1.0);

// Random tree-structured RRI network with ~n_elements elements (vessels and
// junction pairs mixed), resistance/RCR leaves, seeded and deterministic.
CircuitNetwork random_tree_network(int n_elements, unsigned long long seed,
                                   bool with_quadratic = true);

// Deterministic pulmonary-scale balanced tree (vessel -> bifurcation layers)
// with ~n_elements elements, pulsatile inflow and Windkessel leaves.
CircuitNetwork balanced_tree_network(int n_elements, double r_quad = 0.0);

// Random state vector of plausible magnitude for a network's assembler size.
Eigen::VectorXd random_state(int size, unsigned long long seed);

// Point-by-point centerline construction for hand-made fixtures.
struct FixtureTreeBuilder {
  CenterlineTree tree;

  int add(const Eigen::Vector3d& xyz, double misr, const Eigen::Vector3d& tangent,
          int branch, bool junction, int parent);
  std::string json();
};

// Y-shaped centerline: one root vessel, one junction region, two child
// branches. Points per branch and junction-flag counts are configurable.
std::string y_centerline_json(int pts_per_branch = 8, int junction_pad = 2);

// Star centerline: root vessel into one junction region with `n_outlets`
// child branches, in-junction path lengths distinct per outlet.
std::string star_centerline_json(int n_outlets, int pts_per_branch = 8);

// Two junction regions in sequence: root -> J1 -> (leaf, trunk -> J2 -> 2 leaves).
std::string chain_two_junctions_json();

} // namespace zerod::test
