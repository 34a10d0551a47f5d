#pragma once

#include <zerod/circuit.hpp>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace zerod {

struct SimulationConfig {
  int steps_per_cycle = 1000;
  int max_cycles = 10;
  double cycle_tolerance = 1e-4;  // relative cycle-to-cycle pressure change
  double newton_tolerance = 1e-9; // absolute residual max-norm
  int max_newton_iterations = 30;
  ModelFlavor flavor = ModelFlavor::RRI;
  bool keep_history = false; // keep every step instead of the final cycle only

  void validate() const {
    if (steps_per_cycle < 16) throw ValidationError("steps per cycle must be >= 16");
    if (max_cycles < 1) throw ValidationError("number of cycles must be >= 1");
    if (!(cycle_tolerance > 0.0) || !(newton_tolerance > 0.0))
      throw ValidationError("tolerances must be > 0");
    if (max_newton_iterations < 1) throw ValidationError("max Newton iterations must be >= 1");
  }
};

// Node pressures and element flows over a shared time grid. Layout:
// node_pressure(i, k) is P at node_ids[i], time[k]; element_flow(j, k) is the
// flow through element_ids[j].
struct TimeSeriesSolution {
  std::vector<double> time;
  std::vector<int> node_ids;            // sorted ascending
  std::vector<std::string> element_ids; // network element order
  Eigen::MatrixXd node_pressure;        // nodes x samples
  Eigen::MatrixXd element_flow;         // elements x samples
  int inflow_node = -1;
  double cycle_period = 0.0;
  int steps_per_cycle = 0;
  int cycles_completed = 0;
  double last_cycle_change = std::numeric_limits<double>::quiet_NaN();

  int node_row(int node_id) const;
  int element_row(const std::string& element_id) const;
};

// Stacked-unknown layout for the nonlinear system solved each time step:
//   [ node pressures | element flows | RCR capacitor pressures ].
// Residual rows: per-element pressure equations, per-node mass/boundary rows,
// per-RCR capacitor rows.
class SystemAssembler {
 public:
  SystemAssembler(const CircuitNetwork& net, ModelFlavor flavor);

  int size() const { return size_; }
  int pressure_index(int node_id) const;
  int flow_index(int element_index) const { return n_nodes_ + element_index; }
  const std::vector<int>& node_ids() const { return node_ids_; }

  // All flows zero; every pressure (including RCR internal) at the distal
  // pressure of the first outlet BC.
  Eigen::VectorXd initial_state() const;

  void residual(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prev, double dt,
                double t, Eigen::VectorXd& r) const;
  void jacobian(const Eigen::VectorXd& x, double dt, Eigen::SparseMatrix<double>& J) const;

  // Rewrites only the state-dependent entries (the per-element flow
  // coefficients) of a matrix previously produced by jacobian().
  void update_jacobian_values(const Eigen::VectorXd& x, double dt,
                              Eigen::SparseMatrix<double>& J) const;

  // True when the Jacobian does not depend on the state (no active quadratic
  // resistors), so one factorization serves the whole simulation.
  bool state_independent_jacobian() const;

 private:
  enum class NodeRole { Interior, Inflow, Resistance, Windkessel };

  const CircuitNetwork& net_;
  ModelFlavor flavor_;
  std::vector<int> node_ids_;
  std::map<int, int> node_index_;
  std::vector<int> rcr_nodes_; // nodes with Windkessel BCs, ascending
  int n_nodes_ = 0;
  int n_elements_ = 0;
  int size_ = 0;

  // Flat per-node-index tables, precomputed once.
  std::vector<std::vector<std::pair<int, double>>> incidence_; // (element, sign into node)
  std::vector<NodeRole> role_;
  std::vector<const ResistanceBC*> resistance_;  // per node index (or null)
  std::vector<const WindkesselBC*> windkessel_;  // per node index (or null)
  std::vector<const PrescribedInflow*> inflow_;  // per node index (or null)
  std::vector<int> rcr_slot_;                    // per node index (-1 if none)
};

// residual_and_jacobian evaluated in one call (test/diagnostic convenience).
std::pair<Eigen::VectorXd, Eigen::SparseMatrix<double>> residual_and_jacobian(
    const CircuitNetwork& net, const Eigen::VectorXd& state,
    const Eigen::VectorXd& prev_state, double dt, double t,
    ModelFlavor flavor = ModelFlavor::RRI);

// Implicit backward-difference time stepping with Newton iteration per step.
// Runs up to cfg.max_cycles cardiac cycles, stopping early once the relative
// cycle-to-cycle pressure change drops below cfg.cycle_tolerance. Returns the
// final cycle rebased to (0, T], or the full history when cfg.keep_history.
// Throws DivergenceError naming the failing step on Newton non-convergence.
TimeSeriesSolution simulate(const CircuitNetwork& net, const SimulationConfig& cfg = {});

// Max over nodes of the relative L-inf difference between the last two full
// cycles of pressure. Requires at least two full cycles in the solution.
double cycle_convergence(const TimeSeriesSolution& sol, double cycle_period);

// Final-cycle view of a (possibly multi-cycle) solution, time rebased to (0, T].
TimeSeriesSolution last_cycle(const TimeSeriesSolution& sol);

} // namespace zerod
