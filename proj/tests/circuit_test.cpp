#include "support.hpp"

#include <zerod/io.hpp>

#include <gtest/gtest.h>

#include <numbers>

using namespace zerod;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(PoiseuilleParameters, ClosedFormValues) {
  FluidProperties fluid; // mu = 0.04, rho = 1.06, Kt = 1.52
  const auto p = poiseuille_parameters(fluid, 10.0, kPi, kPi);
  // 8 pi mu l / A^2 = 3.2 / pi; rho l / A = 10.6 / pi.
  EXPECT_NEAR(p.R_lin, 3.2 / kPi, 1e-15);
  EXPECT_NEAR(p.R_lin, 1.0185916, 1e-6);
  EXPECT_DOUBLE_EQ(p.R_quad, 0.0);
  EXPECT_NEAR(p.L, 10.6 / kPi, 1e-15);
  EXPECT_NEAR(p.L, 3.3740845, 1e-6);
  EXPECT_DOUBLE_EQ(p.C, kFixedCapacitance);
}

TEST(PoiseuilleParameters, ZeroLength) {
  const auto p = poiseuille_parameters(FluidProperties{}, 0.0, 2.3, 2.3);
  EXPECT_DOUBLE_EQ(p.R_lin, 0.0);
  EXPECT_DOUBLE_EQ(p.L, 0.0);
}

TEST(PoiseuilleParameters, StenosisTerm) {
  const auto p = poiseuille_parameters(FluidProperties{}, 10.0, kPi, kPi / 2.0);
  // Kt rho / (2 A^2) (A/As - 1)^2 = 1.52 * 1.06 / (2 pi^2).
  EXPECT_NEAR(p.R_quad, 1.52 * 1.06 / (2.0 * kPi * kPi), 1e-15);
  EXPECT_NEAR(p.R_quad, 0.0816244, 1e-6);
}

TEST(PoiseuilleParameters, InvalidGeometry) {
  EXPECT_THROW(poiseuille_parameters(FluidProperties{}, 1.0, 0.0, 1.0), ValidationError);
  EXPECT_THROW(poiseuille_parameters(FluidProperties{}, 1.0, 1.0, -2.0), ValidationError);
  EXPECT_THROW(poiseuille_parameters(FluidProperties{}, -1.0, 1.0, 1.0), ValidationError);
}

TEST(PoiseuilleParameters, Homogeneity) {
  FluidProperties fluid;
  const auto base = poiseuille_parameters(fluid, 3.7, 1.9, 1.7);
  const auto double_l = poiseuille_parameters(fluid, 7.4, 1.9, 1.7);
  EXPECT_DOUBLE_EQ(double_l.R_lin, 2.0 * base.R_lin);
  EXPECT_DOUBLE_EQ(double_l.L, 2.0 * base.L);
  const auto double_a = poiseuille_parameters(fluid, 3.7, 3.8, 3.4);
  EXPECT_DOUBLE_EQ(double_a.R_lin, base.R_lin / 4.0);
  EXPECT_DOUBLE_EQ(double_a.L, base.L / 2.0);
}

TEST(ElementPressureDrop, ClosedFormValues) {
  ElementParameters p;
  p.R_lin = 2.0;
  p.R_quad = 3.0;
  p.L = 4.0;
  EXPECT_DOUBLE_EQ(element_pressure_drop(p, 5.0, 1.0, ModelFlavor::RRI), 89.0);
  EXPECT_DOUBLE_EQ(element_pressure_drop(p, 0.0, 0.0, ModelFlavor::RRI), 0.0);
  EXPECT_DOUBLE_EQ(element_pressure_drop(p, 5.0, 1.0, ModelFlavor::RI), 14.0);
}

TEST(ElementPressureDrop, OddInFlow) {
  ElementParameters p;
  p.R_lin = 1.7;
  p.R_quad = 0.9;
  p.L = 2.2;
  for (double q : {0.1, 1.0, 7.3, 42.0})
    EXPECT_DOUBLE_EQ(element_pressure_drop(p, -q, 0.0), -element_pressure_drop(p, q, 0.0));
}

TEST(ElementPressureDrop, RIEqualsRRIWithoutQuad) {
  ElementParameters p;
  p.R_lin = 11.0;
  p.R_quad = 0.0;
  p.L = 0.4;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-30.0, 30.0);
  for (int i = 0; i < 100; ++i) {
    const double q = d(rng), dq = d(rng);
    EXPECT_DOUBLE_EQ(element_pressure_drop(p, q, dq, ModelFlavor::RI),
                     element_pressure_drop(p, q, dq, ModelFlavor::RRI));
  }
}

TEST(AssembleNetwork, MinimalNetwork) {
  ElementParameters p;
  p.R_lin = 100.0;
  const auto net = test::single_vessel_network(p, 1.0, 1000.0, 0.0);
  EXPECT_EQ(net.elements.size(), 1u);
  EXPECT_EQ(net.node_ids(), (std::vector<int>{0, 1}));
  EXPECT_TRUE(validate_network(net).empty());
  EXPECT_EQ(net.inflow_node(), 0);
}

TEST(AssembleNetwork, MissingParameterFails) {
  Element e;
  e.id = "vessel_0";
  e.kind = ElementKind::Vessel;
  e.inlet = 0;
  e.outlet = 1;
  e.geometry = VesselGeometry{1.0, 1.0, 1.0};
  std::map<int, BoundaryCondition> bcs;
  bcs[0] = PrescribedInflow{test::constant_inflow(1.0)};
  bcs[1] = ResistanceBC{100.0, 0.0};
  EXPECT_THROW(assemble_network({e}, {}, bcs, FluidProperties{}, 1.0), ValidationError);
}

TEST(AssembleNetwork, AssembleThenValidateRoundTrip) {
  for (unsigned long long seed : {1ull, 2ull, 3ull, 4ull}) {
    const auto net = test::random_tree_network(20, seed);
    EXPECT_TRUE(validate_network(net).empty()) << "seed " << seed;
  }
}

TEST(ValidateNetwork, LeafWithoutBC) {
  ElementParameters p;
  auto net = test::single_vessel_network(p, 1.0, 1000.0, 0.0);
  net.boundary_conditions.erase(1);
  const auto diags = validate_network(net);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].entity, "1"); // names the offending node
  EXPECT_NE(diags[0].message.find("boundary"), std::string::npos);
}

TEST(ValidateNetwork, TwoInflowNodes) {
  ElementParameters p;
  auto net = test::single_vessel_network(p, 1.0, 1000.0, 0.0);
  net.boundary_conditions[1] = PrescribedInflow{test::constant_inflow(2.0)};
  const auto diags = validate_network(net);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_NE(diags[0].message.find("inflow"), std::string::npos);
}

TEST(ValidateNetwork, DetectsCycle) {
  ElementParameters p;
  std::vector<Element> elems;
  for (int i = 0; i < 3; ++i) {
    Element e;
    e.id = "v" + std::to_string(i);
    e.kind = ElementKind::Vessel;
    e.inlet = i;
    e.outlet = (i + 1) % 3;
    e.geometry = VesselGeometry{1.0, 1.0, 1.0};
    e.params = p;
    elems.push_back(e);
  }
  CircuitNetwork net;
  net.elements = elems;
  net.cycle_period = 1.0;
  net.boundary_conditions[0] = PrescribedInflow{test::constant_inflow(1.0)};
  bool found = false;
  for (const auto& d : validate_network(net))
    if (d.message.find("cycle") != std::string::npos) found = true;
  EXPECT_TRUE(found);
}

TEST(ValidateNetwork, ConnectorConstraints) {
  ElementParameters p;
  auto net = test::single_vessel_network(p, 1.0, 1000.0, 0.0);
  net.elements[0].kind = ElementKind::Connector;
  net.elements[0].params.R_lin = 5.0; // connectors must stay frozen at zero
  const auto diags = validate_network(net);
  EXPECT_FALSE(diags.empty());
}

TEST(NetworkJson, RoundTripAndDeterminism) {
  const auto net = test::random_tree_network(12, 99);
  const std::string text = network_to_json(net);
  const auto back = parse_network_json(text);
  ASSERT_EQ(back.elements.size(), net.elements.size());
  for (size_t i = 0; i < net.elements.size(); ++i) {
    EXPECT_EQ(back.elements[i].id, net.elements[i].id);
    EXPECT_EQ(back.elements[i].kind, net.elements[i].kind);
    EXPECT_DOUBLE_EQ(back.elements[i].params.R_lin, net.elements[i].params.R_lin);
    EXPECT_DOUBLE_EQ(back.elements[i].params.R_quad, net.elements[i].params.R_quad);
    EXPECT_DOUBLE_EQ(back.elements[i].params.L, net.elements[i].params.L);
  }
  EXPECT_EQ(back.boundary_conditions.size(), net.boundary_conditions.size());
  EXPECT_EQ(network_to_json(back), text);
  EXPECT_TRUE(validate_network(back).empty());
}

TEST(ValidateNetwork, InflowWaveformMustCoverOneCycle) {
  ElementParameters p;
  auto net = test::single_vessel_network(p, 1.0, 1000.0, 0.0);
  auto& in = std::get<PrescribedInflow>(net.boundary_conditions.at(0));
  in.waveform.t = {0.0, 0.6, 1.4}; // extends past the 1 s cycle
  in.waveform.q = {1.0, 2.0, 1.0};
  bool found = false;
  for (const auto& d : validate_network(net))
    if (d.message.find("cycle") != std::string::npos) found = true;
  EXPECT_TRUE(found);
}

TEST(Waveform, PeriodicInterpolation) {
  InflowWaveform w;
  w.t = {0.0, 0.25, 0.5, 0.75};
  w.q = {1.0, 2.0, 3.0, 2.0};
  EXPECT_DOUBLE_EQ(waveform_value(w, 1.0, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(waveform_value(w, 1.0, 0.375), 2.5);
  // Wrap segment [0.75, 1.0]: interpolates toward q(0).
  EXPECT_DOUBLE_EQ(waveform_value(w, 1.0, 0.875), 1.5);
  EXPECT_DOUBLE_EQ(waveform_value(w, 1.0, 1.25), 2.0);  // periodic
  EXPECT_DOUBLE_EQ(waveform_value(w, 1.0, 10.375), 2.5);
}
