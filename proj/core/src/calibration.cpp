#include <zerod/calibration.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace zerod {

using nlohmann::json;

std::string to_string(CalibrationStatus s) {
  switch (s) {
    case CalibrationStatus::ConvergedResidual: return "converged_residual";
    case CalibrationStatus::ConvergedStep: return "converged_step";
    case CalibrationStatus::MaxIterations: return "max_iterations";
    case CalibrationStatus::Stagnated: return "stagnated";
  }
  return "?";
}

std::vector<FreeParameter> CalibrationProblem::free_parameters() const {
  if (net == nullptr) throw ValidationError("calibration problem has no network");
  std::vector<FreeParameter> free;
  for (size_t ei = 0; ei < net->elements.size(); ++ei) {
    const auto& e = net->elements[ei];
    if (e.kind == ElementKind::Connector) continue;
    const int i = static_cast<int>(ei);
    if (!e.params.frozen_R_lin) free.push_back({i, FreeParameter::Component::RLin});
    if (flavor == ModelFlavor::RRI && !e.params.frozen_R_quad)
      free.push_back({i, FreeParameter::Component::RQuad});
    if (!e.params.frozen_L) free.push_back({i, FreeParameter::Component::Inductance});
  }
  return free;
}

namespace {

struct ElementSeries {
  const std::vector<double>* p_in;
  const std::vector<double>* p_out;
  const std::vector<double>* q;
  const std::vector<double>* dqdt;
};

// Elements with at least one free parameter plus their reference series; rows
// for fully frozen elements (connectors) are omitted.
struct FitLayout {
  std::vector<int> row_elements; // element indices contributing residual rows
  std::vector<ElementSeries> series;
  std::vector<FreeParameter> free;
  std::map<std::pair<int, int>, int> column_of; // (element, component) -> column
  size_t samples = 0;
};

int component_code(FreeParameter::Component c) { return static_cast<int>(c); }

FitLayout make_layout(const CalibrationProblem& problem, const ReferenceSeries& reference) {
  const auto& net = *problem.net;
  FitLayout lay;
  lay.free = problem.free_parameters();
  lay.samples = reference.samples();
  if (lay.samples < 3) throw ValidationError("reference series too short");
  for (size_t k = 0; k < lay.free.size(); ++k)
    lay.column_of[{lay.free[k].element_index, component_code(lay.free[k].component)}] =
        static_cast<int>(k);

  std::vector<char> has_free(net.elements.size(), 0);
  for (const auto& f : lay.free) has_free[f.element_index] = 1;

  for (size_t ei = 0; ei < net.elements.size(); ++ei) {
    if (!has_free[ei]) continue; // frozen rows omitted
    const auto& e = net.elements[ei];
    auto pin = reference.node_pressure.find(e.inlet);
    auto pout = reference.node_pressure.find(e.outlet);
    auto q = reference.element_flow.find(e.id);
    auto dq = reference.element_dqdt.find(e.id);
    if (pin == reference.node_pressure.end() || pout == reference.node_pressure.end())
      throw ValidationError("reference is missing node series for element " + e.id);
    if (q == reference.element_flow.end() || dq == reference.element_dqdt.end())
      throw ValidationError("reference is missing flow series for element " + e.id);
    lay.row_elements.push_back(static_cast<int>(ei));
    lay.series.push_back({&pin->second, &pout->second, &q->second, &dq->second});
  }
  return lay;
}

void fill_residual_jacobian(const CalibrationProblem& problem, const FitLayout& lay,
                            const std::map<std::string, ElementParameters>& theta,
                            Eigen::VectorXd* r, Eigen::MatrixXd* Jout) {
  const auto& net = *problem.net;
  const int S = static_cast<int>(lay.samples);
  const int rows = static_cast<int>(lay.row_elements.size()) * S;
  const int cols = static_cast<int>(lay.free.size());
  if (r != nullptr) r->resize(rows);
  if (Jout != nullptr) Jout->setZero(rows, cols);

  for (size_t b = 0; b < lay.row_elements.size(); ++b) {
    const int ei = lay.row_elements[b];
    const auto& e = net.elements[ei];
    auto tit = theta.find(e.id);
    if (tit == theta.end()) throw ValidationError("theta is missing element " + e.id);
    const auto& p = tit->second;
    const auto& s = lay.series[b];
    const int row0 = static_cast<int>(b) * S;

    auto col = [&](FreeParameter::Component c) {
      auto it = lay.column_of.find({ei, component_code(c)});
      return it == lay.column_of.end() ? -1 : it->second;
    };
    const int c_rlin = col(FreeParameter::Component::RLin);
    const int c_rquad = col(FreeParameter::Component::RQuad);
    const int c_l = col(FreeParameter::Component::Inductance);

    for (int k = 0; k < S; ++k) {
      const double q = (*s.q)[k];
      const double dq = (*s.dqdt)[k];
      const double dp = (*s.p_in)[k] - (*s.p_out)[k];
      if (r != nullptr)
        (*r)[row0 + k] = element_pressure_drop(p, q, dq, problem.flavor) - dp;
      if (Jout != nullptr) {
        if (c_rlin >= 0) (*Jout)(row0 + k, c_rlin) = q;
        if (c_rquad >= 0) (*Jout)(row0 + k, c_rquad) = q * std::abs(q);
        if (c_l >= 0) (*Jout)(row0 + k, c_l) = dq;
      }
    }
  }
}

void apply_free(const CalibrationProblem& problem, const FitLayout& lay,
                const Eigen::VectorXd& x, std::map<std::string, ElementParameters>& theta) {
  const auto& net = *problem.net;
  for (size_t k = 0; k < lay.free.size(); ++k) {
    const auto& f = lay.free[k];
    auto& p = theta[net.elements[f.element_index].id];
    switch (f.component) {
      case FreeParameter::Component::RLin: p.R_lin = x[k]; break;
      case FreeParameter::Component::RQuad: p.R_quad = x[k]; break;
      case FreeParameter::Component::Inductance: p.L = x[k]; break;
    }
  }
}

Eigen::VectorXd gather_free(const CalibrationProblem& problem, const FitLayout& lay,
                            const std::map<std::string, ElementParameters>& theta) {
  const auto& net = *problem.net;
  Eigen::VectorXd x(lay.free.size());
  for (size_t k = 0; k < lay.free.size(); ++k) {
    const auto& f = lay.free[k];
    auto it = theta.find(net.elements[f.element_index].id);
    if (it == theta.end())
      throw ValidationError("theta init is missing element " +
                            net.elements[f.element_index].id);
    switch (f.component) {
      case FreeParameter::Component::RLin: x[k] = it->second.R_lin; break;
      case FreeParameter::Component::RQuad: x[k] = it->second.R_quad; break;
      case FreeParameter::Component::Inductance: x[k] = it->second.L; break;
    }
  }
  return x;
}

// Initial parameter map with frozen values enforced: connectors zeroed, RI
// quads zeroed, frozen components kept at their initial values.
std::map<std::string, ElementParameters> seeded_theta(
    const CalibrationProblem& problem, const std::map<std::string, ElementParameters>& init) {
  std::map<std::string, ElementParameters> theta;
  for (const auto& e : problem.net->elements) {
    ElementParameters p;
    if (e.kind == ElementKind::Connector) {
      p = ElementParameters::frozen_zero();
    } else {
      auto it = init.find(e.id);
      if (it == init.end()) throw ValidationError("theta init is missing element " + e.id);
      p = it->second;
      p.frozen_R_lin = e.params.frozen_R_lin;
      p.frozen_R_quad = e.params.frozen_R_quad;
      p.frozen_L = e.params.frozen_L;
      if (p.frozen_R_lin) p.R_lin = e.params.R_lin;
      if (p.frozen_R_quad) p.R_quad = e.params.R_quad;
      if (p.frozen_L) p.L = e.params.L;
      if (problem.flavor == ModelFlavor::RI) p.R_quad = 0.0;
    }
    theta[e.id] = p;
  }
  return theta;
}

} // namespace

std::pair<Eigen::VectorXd, Eigen::MatrixXd> assemble_fit_residual(
    const CalibrationProblem& problem, const ReferenceSeries& reference,
    const std::map<std::string, ElementParameters>& theta) {
  FitLayout lay = make_layout(problem, reference);
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  fill_residual_jacobian(problem, lay, theta, &r, &J);
  return {std::move(r), std::move(J)};
}

CalibrationResult calibrate(const CalibrationProblem& problem, const ReferenceSeries& reference,
                            const std::map<std::string, ElementParameters>& theta_init) {
  FitLayout lay = make_layout(problem, reference);
  auto theta = seeded_theta(problem, theta_init);

  CalibrationResult result;
  Eigen::VectorXd x = gather_free(problem, lay, theta);
  if (!x.allFinite()) throw ValidationError("calibration initial parameters are not finite");

  Eigen::VectorXd r;
  fill_residual_jacobian(problem, lay, theta, &r, nullptr);
  if (!r.allFinite())
    throw ValidationError("calibration residual is not finite at the initial parameters");
  double rnorm = r.norm();
  result.initial_residual_norm = rnorm;

  double lambda = problem.lm.lambda0;
  Eigen::MatrixXd J;
  Eigen::VectorXd x_best = x;
  double best_norm = rnorm;
  result.status = CalibrationStatus::MaxIterations;

  auto theta_trial = theta;
  bool need_jacobian = true;
  Eigen::MatrixXd JtJ;
  Eigen::VectorXd Jtr;
  for (int it = 0; it < problem.lm.max_iterations; ++it) {
    if (best_norm <= problem.lm.residual_tolerance) {
      result.status = CalibrationStatus::ConvergedResidual;
      break;
    }
    if (need_jacobian) {
      fill_residual_jacobian(problem, lay, theta, &r, &J);
      JtJ = J.transpose() * J;
      Jtr = J.transpose() * r;
      need_jacobian = false;
    }
    Eigen::MatrixXd A = JtJ;
    for (int d = 0; d < A.rows(); ++d)
      A(d, d) += lambda * std::max(JtJ(d, d), 1e-300);
    Eigen::VectorXd dx = A.ldlt().solve(-Jtr);
    if (!dx.allFinite()) {
      lambda *= problem.lm.lambda_up;
      result.trace.push_back({best_norm, lambda, false});
      continue;
    }

    if (dx.norm() <= problem.lm.step_tolerance * (1.0 + x.norm())) {
      result.trace.push_back({best_norm, lambda, false});
      result.status = CalibrationStatus::ConvergedStep;
      break;
    }

    Eigen::VectorXd x_trial = x + dx;
    apply_free(problem, lay, x_trial, theta_trial);
    Eigen::VectorXd r_trial;
    fill_residual_jacobian(problem, lay, theta_trial, &r_trial, nullptr);
    const double tnorm = r_trial.allFinite() ? r_trial.norm()
                                             : std::numeric_limits<double>::infinity();
    if (tnorm < best_norm) {
      x = x_trial;
      theta = theta_trial;
      best_norm = tnorm;
      x_best = x;
      lambda = std::max(lambda / problem.lm.lambda_down, 1e-16);
      need_jacobian = true;
      result.trace.push_back({tnorm, lambda, true});
    } else {
      lambda *= problem.lm.lambda_up;
      result.trace.push_back({best_norm, lambda, false});
      if (lambda > 1e14) {
        result.status = CalibrationStatus::Stagnated;
        break;
      }
    }
  }
  if (best_norm <= problem.lm.residual_tolerance)
    result.status = CalibrationStatus::ConvergedResidual;

  apply_free(problem, lay, x_best, theta);
  result.parameters = theta;
  result.residual_norm = best_norm;
  return result;
}

std::map<std::string, ElementParameters> linear_least_squares_fit(
    const CalibrationProblem& problem, const ReferenceSeries& reference,
    const std::map<std::string, ElementParameters>& theta_init) {
  FitLayout lay = make_layout(problem, reference);
  auto theta = seeded_theta(problem, theta_init);
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  fill_residual_jacobian(problem, lay, theta, &r, &J);
  Eigen::VectorXd x0 = gather_free(problem, lay, theta);
  // r(x) = r(x0) + J (x - x0); minimize over x.
  Eigen::VectorXd x = x0 - (J.transpose() * J).ldlt().solve(J.transpose() * r);
  apply_free(problem, lay, x, theta);
  return theta;
}

std::string calibration_report_json(const CalibrationResult& result) {
  json j;
  j["status"] = to_string(result.status);
  j["initial_residual_norm"] = result.initial_residual_norm;
  j["residual_norm"] = result.residual_norm;
  json params = json::object();
  for (const auto& [id, p] : result.parameters)
    params[id] = {{"R_lin", p.R_lin}, {"R_quad", p.R_quad}, {"L", p.L}, {"C", p.C}};
  j["parameters"] = params;
  json trace = json::array();
  for (const auto& t : result.trace)
    trace.push_back({{"residual_norm", t.residual_norm},
                     {"lambda", t.lambda},
                     {"accepted", t.accepted}});
  j["trace"] = trace;
  return j.dump(2) + "\n";
}

void write_calibration_report(const CalibrationResult& result,
                              const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot write calibration report: " + file.string());
  os << calibration_report_json(result);
}

CalibrationResult read_calibration_report(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ValidationError("cannot open calibration report: " + file.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("calibration report parse error: ") + e.what());
  }
  CalibrationResult result;
  const std::string status = j.at("status").get<std::string>();
  if (status == "converged_residual") result.status = CalibrationStatus::ConvergedResidual;
  else if (status == "converged_step") result.status = CalibrationStatus::ConvergedStep;
  else if (status == "max_iterations") result.status = CalibrationStatus::MaxIterations;
  else result.status = CalibrationStatus::Stagnated;
  result.initial_residual_norm = j.at("initial_residual_norm").get<double>();
  result.residual_norm = j.at("residual_norm").get<double>();
  for (const auto& [id, jp] : j.at("parameters").items()) {
    ElementParameters p;
    p.R_lin = jp.at("R_lin").get<double>();
    p.R_quad = jp.at("R_quad").get<double>();
    p.L = jp.at("L").get<double>();
    p.C = jp.value("C", kFixedCapacitance);
    result.parameters[id] = p;
  }
  for (const auto& jt : j.at("trace"))
    result.trace.push_back({jt.at("residual_norm").get<double>(),
                            jt.at("lambda").get<double>(),
                            jt.at("accepted").get<bool>()});
  return result;
}

} // namespace zerod
