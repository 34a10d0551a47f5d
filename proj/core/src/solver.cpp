#include <zerod/solver.hpp>

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace zerod {

int TimeSeriesSolution::node_row(int node_id) const {
  auto it = std::lower_bound(node_ids.begin(), node_ids.end(), node_id);
  if (it == node_ids.end() || *it != node_id)
    throw ValidationError("solution has no node " + std::to_string(node_id));
  return static_cast<int>(it - node_ids.begin());
}

int TimeSeriesSolution::element_row(const std::string& element_id) const {
  auto it = std::find(element_ids.begin(), element_ids.end(), element_id);
  if (it == element_ids.end())
    throw ValidationError("solution has no element " + element_id);
  return static_cast<int>(it - element_ids.begin());
}

SystemAssembler::SystemAssembler(const CircuitNetwork& net, ModelFlavor flavor)
    : net_(net), flavor_(flavor) {
  node_ids_ = net.node_ids();
  for (size_t i = 0; i < node_ids_.size(); ++i)
    node_index_[node_ids_[i]] = static_cast<int>(i);
  n_nodes_ = static_cast<int>(node_ids_.size());
  n_elements_ = static_cast<int>(net.elements.size());

  incidence_.assign(n_nodes_, {});
  role_.assign(n_nodes_, NodeRole::Interior);
  resistance_.assign(n_nodes_, nullptr);
  windkessel_.assign(n_nodes_, nullptr);
  inflow_.assign(n_nodes_, nullptr);
  rcr_slot_.assign(n_nodes_, -1);

  for (int ei = 0; ei < n_elements_; ++ei) {
    const auto& e = net.elements[ei];
    incidence_[node_index_.at(e.outlet)].push_back({ei, +1.0});
    incidence_[node_index_.at(e.inlet)].push_back({ei, -1.0});
  }
  for (const auto& [node, bc] : net.boundary_conditions) {
    auto it = node_index_.find(node);
    if (it == node_index_.end()) continue; // caught by validate_network
    const int ni = it->second;
    if (const auto* in = std::get_if<PrescribedInflow>(&bc)) {
      role_[ni] = NodeRole::Inflow;
      inflow_[ni] = in;
    } else if (const auto* r = std::get_if<ResistanceBC>(&bc)) {
      role_[ni] = NodeRole::Resistance;
      resistance_[ni] = r;
    } else {
      role_[ni] = NodeRole::Windkessel;
      windkessel_[ni] = &std::get<WindkesselBC>(bc);
      rcr_slot_[ni] = static_cast<int>(rcr_nodes_.size());
      rcr_nodes_.push_back(node);
    }
  }
  size_ = n_nodes_ + n_elements_ + static_cast<int>(rcr_nodes_.size());
}

int SystemAssembler::pressure_index(int node_id) const {
  auto it = node_index_.find(node_id);
  if (it == node_index_.end())
    throw ValidationError("unknown node id " + std::to_string(node_id));
  return it->second;
}

bool SystemAssembler::state_independent_jacobian() const {
  if (flavor_ == ModelFlavor::RI) return true;
  for (const auto& e : net_.elements)
    if (e.params.R_quad != 0.0) return false;
  return true;
}

Eigen::VectorXd SystemAssembler::initial_state() const {
  double p0 = 0.0;
  for (const auto& [node, bc] : net_.boundary_conditions) {
    if (const auto* r = std::get_if<ResistanceBC>(&bc)) {
      p0 = r->Pd;
      break;
    }
    if (const auto* w = std::get_if<WindkesselBC>(&bc)) {
      p0 = w->Pd;
      break;
    }
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(size_);
  x.head(n_nodes_).setConstant(p0);
  x.tail(static_cast<int>(rcr_nodes_.size())).setConstant(p0);
  return x;
}

// Row layout: [0, M) element pressure rows, [M, M+N) node rows (mass
// conservation, inflow or outlet BC), then one row per RCR capacitor.
void SystemAssembler::residual(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prev,
                               double dt, double t, Eigen::VectorXd& r) const {
  r.resize(size_);
  const int M = n_elements_;

  for (int ei = 0; ei < M; ++ei) {
    const auto& e = net_.elements[ei];
    const double q = x[flow_index(ei)];
    const double dqdt = (q - x_prev[flow_index(ei)]) / dt;
    r[ei] = x[node_index_.find(e.inlet)->second] - x[node_index_.find(e.outlet)->second] -
            element_pressure_drop(e.params, q, dqdt, flavor_);
  }

  for (int ni = 0; ni < n_nodes_; ++ni) {
    double net_in = 0.0; // element flow into the node
    for (const auto& [ei, sign] : incidence_[ni]) net_in += sign * x[flow_index(ei)];
    const int row = M + ni;
    switch (role_[ni]) {
      case NodeRole::Interior:
        r[row] = net_in;
        break;
      case NodeRole::Inflow:
        r[row] = waveform_value(inflow_[ni]->waveform, net_.cycle_period, t) + net_in;
        break;
      case NodeRole::Resistance:
        r[row] = x[ni] - resistance_[ni]->Rd * net_in - resistance_[ni]->Pd;
        break;
      case NodeRole::Windkessel: {
        // Capacitor row in pressure units (well-posed for Rd = 0):
        //   C Rd dPc/dt + (Pc - Pd) - Rd Q_in = 0
        const auto& w = *windkessel_[ni];
        const int ci = n_nodes_ + M + rcr_slot_[ni];
        r[row] = x[ni] - x[ci] - w.Rp * net_in;
        const double dpc = (x[ci] - x_prev[ci]) / dt;
        r[ci] = w.C * w.Rd * dpc + (x[ci] - w.Pd) - w.Rd * net_in;
        break;
      }
    }
  }
}

void SystemAssembler::jacobian(const Eigen::VectorXd& x, double dt,
                               Eigen::SparseMatrix<double>& J) const {
  const int M = n_elements_;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(size_) * 4);

  for (int ei = 0; ei < M; ++ei) {
    const auto& e = net_.elements[ei];
    const double q = x[flow_index(ei)];
    double dDrop_dq = e.params.R_lin + e.params.L / dt;
    if (flavor_ == ModelFlavor::RRI) dDrop_dq += 2.0 * e.params.R_quad * std::abs(q);
    trip.emplace_back(ei, node_index_.find(e.inlet)->second, 1.0);
    trip.emplace_back(ei, node_index_.find(e.outlet)->second, -1.0);
    trip.emplace_back(ei, flow_index(ei), -dDrop_dq);
  }

  for (int ni = 0; ni < n_nodes_; ++ni) {
    const int row = M + ni;
    switch (role_[ni]) {
      case NodeRole::Interior:
      case NodeRole::Inflow:
        for (const auto& [ei, sign] : incidence_[ni])
          trip.emplace_back(row, flow_index(ei), sign);
        break;
      case NodeRole::Resistance:
        trip.emplace_back(row, ni, 1.0);
        for (const auto& [ei, sign] : incidence_[ni])
          trip.emplace_back(row, flow_index(ei), -resistance_[ni]->Rd * sign);
        break;
      case NodeRole::Windkessel: {
        const auto& w = *windkessel_[ni];
        const int ci = n_nodes_ + M + rcr_slot_[ni];
        trip.emplace_back(row, ni, 1.0);
        trip.emplace_back(row, ci, -1.0);
        trip.emplace_back(ci, ci, w.C * w.Rd / dt + 1.0);
        for (const auto& [ei, sign] : incidence_[ni]) {
          trip.emplace_back(row, flow_index(ei), -w.Rp * sign);
          trip.emplace_back(ci, flow_index(ei), -w.Rd * sign);
        }
        break;
      }
    }
  }

  J.resize(size_, size_);
  J.setFromTriplets(trip.begin(), trip.end());
}

void SystemAssembler::update_jacobian_values(const Eigen::VectorXd& x, double dt,
                                             Eigen::SparseMatrix<double>& J) const {
  // Only the per-element flow coefficient depends on the state.
  for (int ei = 0; ei < n_elements_; ++ei) {
    const auto& e = net_.elements[ei];
    const double q = x[flow_index(ei)];
    double dDrop_dq = e.params.R_lin + e.params.L / dt;
    if (flavor_ == ModelFlavor::RRI) dDrop_dq += 2.0 * e.params.R_quad * std::abs(q);
    J.coeffRef(ei, flow_index(ei)) = -dDrop_dq;
  }
}

std::pair<Eigen::VectorXd, Eigen::SparseMatrix<double>> residual_and_jacobian(
    const CircuitNetwork& net, const Eigen::VectorXd& state,
    const Eigen::VectorXd& prev_state, double dt, double t, ModelFlavor flavor) {
  SystemAssembler sys(net, flavor);
  if (state.size() != sys.size() || prev_state.size() != sys.size())
    throw ValidationError("state dimension mismatch: expected " + std::to_string(sys.size()));
  if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
  Eigen::VectorXd r;
  sys.residual(state, prev_state, dt, t, r);
  Eigen::SparseMatrix<double> J;
  sys.jacobian(state, dt, J);
  return {std::move(r), std::move(J)};
}

namespace {

// One backward-difference step solved by Newton iteration with step halving.
// The sparse pattern is analyzed once; later iterations only rewrite the
// state-dependent values before refactorizing.
void newton_step(const SystemAssembler& sys, Eigen::SparseLU<Eigen::SparseMatrix<double>>& lu,
                 Eigen::SparseMatrix<double>& J, bool constant_jacobian, bool& factorized,
                 Eigen::VectorXd& x, const Eigen::VectorXd& x_prev, double dt, double t,
                 const SimulationConfig& cfg, int step_index) {
  Eigen::VectorXd r, x_trial, r_trial;
  sys.residual(x, x_prev, dt, t, r);
  double rnorm = r.lpNorm<Eigen::Infinity>();

  for (int it = 0; it < cfg.max_newton_iterations; ++it) {
    if (rnorm < cfg.newton_tolerance) return;
    if (!constant_jacobian || !factorized) {
      if (!factorized) {
        sys.jacobian(x, dt, J);
        lu.analyzePattern(J);
        factorized = true;
      } else {
        sys.update_jacobian_values(x, dt, J);
      }
      lu.factorize(J);
      if (lu.info() != Eigen::Success)
        throw DivergenceError("singular Jacobian at step " + std::to_string(step_index));
    }
    Eigen::VectorXd dx = lu.solve(-r);
    if (!dx.allFinite())
      throw DivergenceError("linear solve produced non-finite update at step " +
                            std::to_string(step_index));

    // Backtrack if the full step grows the residual (quadratic resistors).
    double alpha = 1.0;
    for (int h = 0; h < 8; ++h) {
      x_trial = x + alpha * dx;
      sys.residual(x_trial, x_prev, dt, t, r_trial);
      double tnorm = r_trial.lpNorm<Eigen::Infinity>();
      if (tnorm < rnorm || tnorm < cfg.newton_tolerance) break;
      alpha *= 0.5;
    }
    x = x_trial;
    r = r_trial;
    double next = r.lpNorm<Eigen::Infinity>();
    // Stalled at the round-off floor counts as converged.
    if (next >= rnorm && next < 64.0 * cfg.newton_tolerance) return;
    rnorm = next;
  }
  if (rnorm < cfg.newton_tolerance) return;
  std::ostringstream oss;
  oss << "Newton did not converge at step " << step_index << " (residual " << rnorm << ")";
  throw DivergenceError(oss.str());
}

} // namespace

TimeSeriesSolution simulate(const CircuitNetwork& net, const SimulationConfig& cfg) {
  cfg.validate();
  auto diags = validate_network(net);
  if (!diags.empty())
    throw ValidationError("simulate requires a valid network (" +
                          std::to_string(diags.size()) + " diagnostics); first: " +
                          diags.front().message);

  SystemAssembler sys(net, cfg.flavor);
  const int S = cfg.steps_per_cycle;
  const double T = net.cycle_period;
  const double dt = T / S;
  const int n_nodes = static_cast<int>(sys.node_ids().size());
  const int n_elem = static_cast<int>(net.elements.size());

  Eigen::VectorXd x = sys.initial_state();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Eigen::SparseMatrix<double> J;
  const bool const_jac = sys.state_independent_jacobian();
  bool factorized = false;
  if (const_jac) {
    sys.jacobian(x, dt, J);
    lu.analyzePattern(J);
    lu.factorize(J);
    if (lu.info() != Eigen::Success) throw DivergenceError("singular Jacobian at step 0");
    factorized = true;
  }

  // History: sample 0 is the initial state at t = 0, then one sample per step.
  std::vector<Eigen::VectorXd> history;
  history.reserve(static_cast<size_t>(S) * 2 + 1);
  std::vector<double> times{0.0};
  history.push_back(x);

  int cycles_done = 0;
  double change = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd x_prev = x;
  for (int c = 0; c < cfg.max_cycles; ++c) {
    for (int s = 0; s < S; ++s) {
      const int step_index = c * S + s + 1;
      const double t = step_index * dt;
      x_prev = x;
      newton_step(sys, lu, J, const_jac, factorized, x, x_prev, dt, t, cfg, step_index);
      if (!cfg.keep_history && static_cast<int>(history.size()) > 2 * S) {
        // final-cycle mode: a sliding window of the last two cycles suffices
        history.erase(history.begin());
        times.erase(times.begin());
      }
      history.push_back(x);
      times.push_back(t);
    }
    cycles_done = c + 1;
    if (cycles_done >= 2) {
      const size_t n = history.size();
      double worst = 0.0;
      for (int ni = 0; ni < n_nodes; ++ni) {
        double num = 0.0, den = 0.0;
        for (int k = 0; k < S; ++k) {
          const double cur = history[n - S + k][ni];
          const double prev = history[n - 2 * S + k][ni];
          num = std::max(num, std::abs(cur - prev));
          den = std::max(den, std::abs(cur));
        }
        worst = std::max(worst, num / std::max(den, 1e-300));
      }
      change = worst;
      if (change < cfg.cycle_tolerance) break;
    }
  }

  // Pack either the full history or the final cycle rebased to (0, T].
  TimeSeriesSolution sol;
  sol.node_ids = sys.node_ids();
  sol.element_ids.reserve(net.elements.size());
  for (const auto& e : net.elements) sol.element_ids.push_back(e.id);
  sol.inflow_node = net.inflow_node();
  sol.cycle_period = T;
  sol.steps_per_cycle = S;
  sol.cycles_completed = cycles_done;
  sol.last_cycle_change = change;

  const size_t first = cfg.keep_history ? 0 : history.size() - static_cast<size_t>(S);
  const size_t count = history.size() - first;
  sol.time.resize(count);
  sol.node_pressure.resize(n_nodes, static_cast<Eigen::Index>(count));
  sol.element_flow.resize(n_elem, static_cast<Eigen::Index>(count));
  for (size_t k = 0; k < count; ++k) {
    sol.time[k] = cfg.keep_history ? times[first + k] : (static_cast<double>(k) + 1.0) * dt;
    const auto& st = history[first + k];
    for (int ni = 0; ni < n_nodes; ++ni) sol.node_pressure(ni, static_cast<Eigen::Index>(k)) = st[ni];
    for (int ei = 0; ei < n_elem; ++ei)
      sol.element_flow(ei, static_cast<Eigen::Index>(k)) = st[sys.flow_index(ei)];
  }
  return sol;
}

double cycle_convergence(const TimeSeriesSolution& sol, double cycle_period) {
  if (sol.time.size() < 2) throw ValidationError("cycle_convergence: need at least 2 samples");
  const double dt = sol.time[1] - sol.time[0];
  const int S = static_cast<int>(std::llround(cycle_period / dt));
  if (S < 1 || static_cast<size_t>(2 * S) > sol.time.size())
    throw ValidationError("cycle_convergence: solution holds fewer than 2 full cycles");
  const Eigen::Index n = static_cast<Eigen::Index>(sol.time.size());
  double worst = 0.0;
  for (Eigen::Index ni = 0; ni < sol.node_pressure.rows(); ++ni) {
    double num = 0.0, den = 0.0;
    for (int k = 0; k < S; ++k) {
      const double cur = sol.node_pressure(ni, n - S + k);
      const double prev = sol.node_pressure(ni, n - 2 * S + k);
      num = std::max(num, std::abs(cur - prev));
      den = std::max(den, std::abs(cur));
    }
    worst = std::max(worst, num / std::max(den, 1e-300));
  }
  return worst;
}

TimeSeriesSolution last_cycle(const TimeSeriesSolution& sol) {
  const int S = sol.steps_per_cycle;
  if (S <= 0 || sol.time.size() < static_cast<size_t>(S))
    throw ValidationError("last_cycle: solution does not hold a full cycle");
  TimeSeriesSolution out = sol;
  const Eigen::Index n = static_cast<Eigen::Index>(sol.time.size());
  const double dt = sol.cycle_period / S;
  out.time.resize(S);
  for (int k = 0; k < S; ++k) out.time[k] = (k + 1.0) * dt;
  out.node_pressure = sol.node_pressure.rightCols(S);
  out.element_flow = sol.element_flow.rightCols(S);
  (void)n;
  return out;
}

} // namespace zerod
