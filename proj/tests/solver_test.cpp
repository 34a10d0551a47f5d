#include "support.hpp"

#include <zerod/io.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace zerod;

namespace {

constexpr double kPi = std::numbers::pi;

// Signed flow imbalance at every interior node, max over the final cycle.
double worst_mass_defect(const CircuitNetwork& net, const TimeSeriesSolution& sol) {
  std::map<int, std::vector<std::pair<int, double>>> incidence;
  for (size_t ei = 0; ei < net.elements.size(); ++ei) {
    incidence[net.elements[ei].outlet].push_back({static_cast<int>(ei), +1.0});
    incidence[net.elements[ei].inlet].push_back({static_cast<int>(ei), -1.0});
  }
  double worst = 0.0;
  for (const auto& [node, inc] : incidence) {
    if (net.boundary_conditions.count(node)) continue; // interior only
    for (Eigen::Index k = 0; k < sol.element_flow.cols(); ++k) {
      double sum = 0.0;
      for (const auto& [ei, sign] : inc) sum += sign * sol.element_flow(ei, k);
      worst = std::max(worst, std::abs(sum));
    }
  }
  return worst;
}

} // namespace

TEST(Simulate, SteadyResistorChain) {
  ElementParameters p;
  p.R_lin = 100.0;
  const auto net = test::single_vessel_network(p, 1.0, 1000.0, 0.0);
  SimulationConfig cfg;
  cfg.steps_per_cycle = 100;
  cfg.max_cycles = 3;
  const auto sol = simulate(net, cfg);
  const auto last = sol.node_pressure.col(sol.node_pressure.cols() - 1);
  EXPECT_NEAR(last[sol.node_row(0)], 1100.0, 1100.0 * 1e-9);
  EXPECT_NEAR(last[sol.node_row(1)], 1000.0, 1000.0 * 1e-9);
}

TEST(ResidualAndJacobian, ZeroAtExactSolution) {
  ElementParameters p;
  p.R_lin = 100.0;
  const auto net = test::single_vessel_network(p, 1.0, 1000.0, 0.0);
  SystemAssembler sys(net, ModelFlavor::RRI);
  Eigen::VectorXd x(sys.size());
  x[sys.pressure_index(0)] = 1100.0;
  x[sys.pressure_index(1)] = 1000.0;
  x[sys.flow_index(0)] = 1.0;
  Eigen::VectorXd r;
  sys.residual(x, x, 1e-3, 0.4, r);
  EXPECT_LT(r.lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(ResidualAndJacobian, ConnectorRowIsPressureEquality) {
  // inflow -> vessel -> connector -> vessel -> resistance BC
  std::vector<Element> elems(3);
  elems[0] = {"v0", ElementKind::Vessel, 0, 1, {}, VesselGeometry{1, 1, 1}};
  elems[1] = {"c0", ElementKind::Connector, 1, 2, {}, std::nullopt};
  elems[2] = {"v1", ElementKind::Vessel, 2, 3, {}, VesselGeometry{1, 1, 1}};
  ElementParameters p;
  p.R_lin = 10.0;
  p.L = 2.0;
  std::map<std::string, ElementParameters> params{{"v0", p}, {"v1", p}};
  std::map<int, BoundaryCondition> bcs;
  bcs[0] = PrescribedInflow{test::constant_inflow(2.0)};
  bcs[3] = ResistanceBC{100.0, 0.0};
  const auto net = assemble_network(elems, params, bcs, FluidProperties{}, 1.0);

  SystemAssembler sys(net, ModelFlavor::RRI);
  const auto x = test::random_state(sys.size(), 5);
  const auto xp = test::random_state(sys.size(), 6);
  Eigen::VectorXd r;
  sys.residual(x, xp, 1e-3, 0.1, r);
  // Row 1 is the connector pressure row: P_in - P_out with no flow terms.
  EXPECT_DOUBLE_EQ(r[1], x[sys.pressure_index(1)] - x[sys.pressure_index(2)]);
}

TEST(Simulate, RLVesselMatchesAnalyticPressureDrop) {
  // Prescribed Q(t) = sin(2 pi t) through R = 2, L = 3:
  // dP(t) = 2 sin(2 pi t) + 6 pi cos(2 pi t).
  const int steps = 1000;
  InflowWaveform w;
  for (int i = 0; i < steps; ++i) {
    w.t.push_back(static_cast<double>(i) / steps);
    w.q.push_back(std::sin(2.0 * kPi * i / steps));
  }
  ElementParameters p;
  p.R_lin = 2.0;
  p.L = 3.0;
  const auto net = test::single_vessel_network(p, w, 10.0, 0.0);
  SimulationConfig cfg;
  cfg.steps_per_cycle = steps;
  cfg.max_cycles = 3;
  cfg.cycle_tolerance = 1e-12; // run all cycles
  const auto sol = simulate(net, cfg);

  const double amplitude = std::sqrt(4.0 + 36.0 * kPi * kPi);
  double worst = 0.0;
  for (size_t k = 0; k < sol.time.size(); ++k) {
    const double t = sol.time[k];
    const double dp_sim = sol.node_pressure(sol.node_row(0), static_cast<Eigen::Index>(k)) -
                          sol.node_pressure(sol.node_row(1), static_cast<Eigen::Index>(k));
    const double dp_exact = 2.0 * std::sin(2.0 * kPi * t) + 6.0 * kPi * std::cos(2.0 * kPi * t);
    worst = std::max(worst, std::abs(dp_sim - dp_exact));
  }
  EXPECT_LT(worst, 0.01 * amplitude);
}

TEST(Simulate, FirstOrderTimeStepConvergence) {
  auto run_error = [](int steps) {
    InflowWaveform w;
    for (int i = 0; i < steps; ++i) {
      w.t.push_back(static_cast<double>(i) / steps);
      w.q.push_back(std::sin(2.0 * kPi * i / steps));
    }
    ElementParameters p;
    p.R_lin = 2.0;
    p.L = 3.0;
    const auto net = test::single_vessel_network(p, w, 10.0, 0.0);
    SimulationConfig cfg;
    cfg.steps_per_cycle = steps;
    cfg.max_cycles = 3;
    cfg.cycle_tolerance = 1e-12;
    const auto sol = simulate(net, cfg);
    double worst = 0.0;
    for (size_t k = 0; k < sol.time.size(); ++k) {
      const double t = sol.time[k];
      const double dp_sim = sol.node_pressure(sol.node_row(0), static_cast<Eigen::Index>(k)) -
                            sol.node_pressure(sol.node_row(1), static_cast<Eigen::Index>(k));
      const double dp_exact =
          2.0 * std::sin(2.0 * kPi * t) + 6.0 * kPi * std::cos(2.0 * kPi * t);
      worst = std::max(worst, std::abs(dp_sim - dp_exact));
    }
    return worst;
  };
  const double coarse = run_error(500);
  const double fine = run_error(1000);
  EXPECT_GE(coarse / fine, 1.8); // first-order integrator
}

TEST(Simulate, WindkesselSteadyStateAndTimeConstant) {
  const double q = 10.0, rp = 100.0, rd = 1000.0, cw = 1e-4, tau = rd * cw;
  const auto net = test::rcr_network(q, rp, cw, rd, 0.0);
  SimulationConfig cfg;
  cfg.steps_per_cycle = 1000;
  cfg.max_cycles = 5;
  cfg.cycle_tolerance = 1e-9;
  cfg.keep_history = true;
  const auto sol = simulate(net, cfg);

  const int inlet = sol.node_row(1); // node with the RCR attached
  const double steady = sol.node_pressure(inlet, sol.node_pressure.cols() - 1);
  EXPECT_NEAR(steady, q * (rp + rd), 0.005 * q * (rp + rd));

  // Fit ln(P_inf - P(t)) over one decade of decay.
  std::vector<double> ts, ys;
  const double d0 = steady - sol.node_pressure(inlet, 1);
  for (Eigen::Index k = 1; k < sol.node_pressure.cols(); ++k) {
    const double d = steady - sol.node_pressure(inlet, k);
    if (d < 0.1 * d0) break;
    ts.push_back(sol.time[k]);
    ys.push_back(std::log(d));
  }
  ASSERT_GT(ts.size(), 10u);
  const double n = static_cast<double>(ts.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sy += ys[i];
    stt += ts[i] * ts[i];
    sty += ts[i] * ys[i];
  }
  const double slope = (n * sty - st * sy) / (n * stt - st * st);
  const double tau_fit = -1.0 / slope;
  EXPECT_NEAR(tau_fit, tau, 0.05 * tau);
}

TEST(ResidualAndJacobian, MatchesFiniteDifferences) {
  double worst = 0.0;
  for (unsigned long long seed = 0; seed < 10; ++seed) {
    const auto net = test::random_tree_network(20, 1000 + seed, true);
    SystemAssembler sys(net, ModelFlavor::RRI);
    const auto x = test::random_state(sys.size(), 77 + seed);
    const auto xp = test::random_state(sys.size(), 177 + seed);
    const double dt = 1e-3, t = 0.37;
    auto [r0, J] = residual_and_jacobian(net, x, xp, dt, t, ModelFlavor::RRI);
    Eigen::MatrixXd dense = Eigen::MatrixXd(J);
    for (int j = 0; j < sys.size(); ++j) {
      // The residual is at most quadratic in the state, so central differences
      // carry no truncation error; a generous step keeps round-off in check.
      const double h = 1e-4 * std::max(10.0, std::abs(x[j]));
      Eigen::VectorXd xp_ = x, xm_ = x;
      xp_[j] += h;
      xm_[j] -= h;
      Eigen::VectorXd rp, rm;
      sys.residual(xp_, xp, dt, t, rp);
      sys.residual(xm_, xp, dt, t, rm);
      for (int i = 0; i < sys.size(); ++i) {
        const double fd = (rp[i] - rm[i]) / (2.0 * h);
        const double an = dense(i, j);
        const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0});
        worst = std::max(worst, err);
      }
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Simulate, MassConservationAtInteriorNodes) {
  for (unsigned long long seed : {11ull, 22ull, 33ull}) {
    const auto net = test::random_tree_network(15, seed, true);
    SimulationConfig cfg;
    cfg.steps_per_cycle = 200;
    cfg.max_cycles = 4;
    const auto sol = simulate(net, cfg);
    const double qmax = sol.element_flow.cwiseAbs().maxCoeff();
    EXPECT_LT(worst_mass_defect(net, sol), 1e-9 * std::max(qmax, 1.0)) << "seed " << seed;
  }
}

TEST(Simulate, LinearityUnderInflowScaling) {
  auto net = test::random_tree_network(12, 5150, false); // RI network
  for (auto& [node, bc] : net.boundary_conditions) {     // P_d = 0 everywhere
    if (auto* r = std::get_if<ResistanceBC>(&bc)) r->Pd = 0.0;
    if (auto* w = std::get_if<WindkesselBC>(&bc)) w->Pd = 0.0;
  }
  const double alpha = 3.7;
  auto scaled = net;
  auto& in = std::get<PrescribedInflow>(
      scaled.boundary_conditions.at(scaled.inflow_node()));
  for (auto& v : in.waveform.q) v *= alpha;

  SimulationConfig cfg;
  cfg.steps_per_cycle = 250;
  cfg.max_cycles = 6;
  cfg.flavor = ModelFlavor::RI;
  const auto a = simulate(net, cfg);
  const auto b = simulate(scaled, cfg);
  const double scale = a.node_pressure.cwiseAbs().maxCoeff();
  const double dev =
      (b.node_pressure - alpha * a.node_pressure).cwiseAbs().maxCoeff() / (alpha * scale);
  EXPECT_LT(dev, 1e-8);
}

TEST(CycleConvergence, PeriodicSignalIsZero) {
  ElementParameters p;
  p.R_lin = 50.0;
  const auto net = test::single_vessel_network(p, 2.0, 500.0, 0.0);
  SimulationConfig cfg;
  cfg.steps_per_cycle = 64;
  cfg.max_cycles = 3;
  cfg.cycle_tolerance = 1e-15;
  cfg.keep_history = true;
  const auto sol = simulate(net, cfg);
  EXPECT_LT(cycle_convergence(sol, 1.0), 1e-12); // steady chain: cycles identical
}

TEST(CycleConvergence, DecayingTransientClosedForm) {
  // Hand-constructed P(t) = 1 + exp(-t) over 3 unit cycles.
  TimeSeriesSolution sol;
  const int S = 1000;
  const double dt = 1e-3;
  sol.node_ids = {0};
  sol.element_ids = {};
  sol.cycle_period = 1.0;
  sol.steps_per_cycle = S;
  sol.node_pressure.resize(1, 3 * S);
  sol.element_flow.resize(0, 3 * S);
  for (int k = 0; k < 3 * S; ++k) {
    const double t = (k + 1) * dt;
    sol.time.push_back(t);
    sol.node_pressure(0, k) = 1.0 + std::exp(-t);
  }
  const double t0 = 1.0 + dt; // first sample of the penultimate cycle
  const double expected =
      std::exp(-t0) * (1.0 - std::exp(-1.0)) / (1.0 + std::exp(-(t0 + 1.0)));
  EXPECT_NEAR(cycle_convergence(sol, 1.0), expected, 1e-12);
}

TEST(CycleConvergence, SingleCycleIsAnError) {
  TimeSeriesSolution sol;
  sol.node_ids = {0};
  sol.cycle_period = 1.0;
  sol.steps_per_cycle = 10;
  sol.node_pressure.resize(1, 10);
  sol.element_flow.resize(0, 10);
  for (int k = 0; k < 10; ++k) {
    sol.time.push_back((k + 1) * 0.1);
    sol.node_pressure(0, k) = 1.0;
  }
  EXPECT_THROW(cycle_convergence(sol, 1.0), ValidationError);
}

TEST(Simulate, DivergenceErrorNamesStep) {
  const auto net = test::random_tree_network(10, 31337, true);
  SimulationConfig cfg;
  cfg.steps_per_cycle = 50;
  cfg.max_cycles = 1;
  cfg.newton_tolerance = 1e-16; // below the round-off floor: cannot converge
  cfg.max_newton_iterations = 5;
  try {
    simulate(net, cfg);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos);
  }
}

TEST(Simulate, RejectsInvalidNetworkAndConfig) {
  ElementParameters p;
  auto net = test::single_vessel_network(p, 1.0, 100.0, 0.0);
  net.boundary_conditions.erase(1);
  EXPECT_THROW(simulate(net, SimulationConfig{}), ValidationError);

  const auto good = test::single_vessel_network(p, 1.0, 100.0, 0.0);
  SimulationConfig cfg;
  cfg.steps_per_cycle = 8; // below the minimum of 16
  EXPECT_THROW(simulate(good, cfg), ValidationError);
}

TEST(SolutionCsv, RoundTripAndByteDeterminism) {
  const auto net = test::random_tree_network(8, 4242, true);
  SimulationConfig cfg;
  cfg.steps_per_cycle = 32;
  cfg.max_cycles = 2;
  const auto sol = simulate(net, cfg);

  std::ostringstream first;
  write_solution_csv(sol, first);
  std::ostringstream second;
  write_solution_csv(sol, second);
  EXPECT_EQ(first.str(), second.str());

  std::istringstream in(first.str());
  const auto raw = read_series_csv(in);
  ASSERT_EQ(raw.time.size(), sol.time.size());
  for (size_t ni = 0; ni < sol.node_ids.size(); ++ni) {
    const auto& series = raw.node_pressure.at(sol.node_ids[ni]);
    for (size_t k = 0; k < sol.time.size(); ++k)
      EXPECT_EQ(series[k], sol.node_pressure(static_cast<Eigen::Index>(ni),
                                             static_cast<Eigen::Index>(k)));
  }
  for (size_t ei = 0; ei < sol.element_ids.size(); ++ei) {
    const auto& series = raw.element_flow.at(sol.element_ids[ei]);
    for (size_t k = 0; k < sol.time.size(); ++k)
      EXPECT_EQ(series[k], sol.element_flow(static_cast<Eigen::Index>(ei),
                                            static_cast<Eigen::Index>(k)));
  }
}
