#pragma once

#include <zerod/reference.hpp>

#include <Eigen/Dense>

namespace zerod {

struct LMSettings {
  double lambda0 = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  int max_iterations = 100;
  double residual_tolerance = 1e-10; // on ||r||_2
  double step_tolerance = 1e-10;     // relative step size
};

// One optimization variable: a non-frozen component of one element's Theta.
struct FreeParameter {
  int element_index;
  enum class Component { RLin, RQuad, Inductance } component;
};

// Levenberg-Marquardt problem over the free element parameters of a network.
// Connectors contribute no variables; capacitances never enter the free set;
// the RI flavor drops every R_quad (held at zero).
struct CalibrationProblem {
  const CircuitNetwork* net = nullptr;
  ModelFlavor flavor = ModelFlavor::RRI;
  LMSettings lm;

  std::vector<FreeParameter> free_parameters() const;
};

enum class CalibrationStatus { ConvergedResidual, ConvergedStep, MaxIterations, Stagnated };

std::string to_string(CalibrationStatus s);

struct CalibrationIteration {
  double residual_norm;
  double lambda;
  bool accepted;
};

struct CalibrationResult {
  std::map<std::string, ElementParameters> parameters; // Theta_opt per element
  double initial_residual_norm = 0.0;
  double residual_norm = 0.0;
  std::vector<CalibrationIteration> trace;
  CalibrationStatus status = CalibrationStatus::MaxIterations;
};

// Governing-equation data-fit residual at the observed states: one row per
// non-frozen element per time sample,
//   row = [R_lin Q + R_quad Q|Q| + L dQ/dt](t_k) - (P_in - P_out)(t_k),
// linear in Theta. The Jacobian holds columns only for free parameters with
// entries Q, Q|Q| and dQ/dt.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> assemble_fit_residual(
    const CalibrationProblem& problem, const ReferenceSeries& reference,
    const std::map<std::string, ElementParameters>& theta);

// Levenberg-Marquardt: solve (J^T J + lambda diag(J^T J)) d = -J^T r, accept
// steps that reduce ||r||, stop on residual tolerance, step tolerance or
// iteration budget. Frozen parameters keep their initial values bit-exactly;
// connectors stay at zero throughout.
CalibrationResult calibrate(const CalibrationProblem& problem, const ReferenceSeries& reference,
                            const std::map<std::string, ElementParameters>& theta_init);

// Direct normal-equations least-squares solve of the same linear-in-Theta fit
// (oracle for the RI case and general cross-check).
std::map<std::string, ElementParameters> linear_least_squares_fit(
    const CalibrationProblem& problem, const ReferenceSeries& reference,
    const std::map<std::string, ElementParameters>& theta_init);

std::string calibration_report_json(const CalibrationResult& result);
void write_calibration_report(const CalibrationResult& result, const std::filesystem::path& file);
CalibrationResult read_calibration_report(const std::filesystem::path& file);

} // namespace zerod
