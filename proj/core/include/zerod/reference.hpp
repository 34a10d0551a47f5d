#pragma once

#include <zerod/io.hpp>

namespace zerod {

// Node pressures, element flows and their time derivatives on one cardiac
// cycle; the calibration target (a projected 3D solution or a synthetic one).
struct ReferenceSeries {
  std::vector<double> time; // uniform grid over one cycle
  double cycle_period = 0.0;
  std::map<int, std::vector<double>> node_pressure;
  std::map<int, std::vector<double>> node_dpdt;
  std::map<std::string, std::vector<double>> element_flow;
  std::map<std::string, std::vector<double>> element_dqdt;

  size_t samples() const { return time.size(); }
};

// Finalizes sampled node/element series into a ReferenceSeries: validates grid
// uniformity and computes dP/dt and dQ/dt by central differences wrapped
// periodically over the cycle. Requires >= 3 samples.
ReferenceSeries project_reference(const RawSeries& raw, double cycle_period);

// Area-weighted averages over a cross-section slice:
//   pressure: P = sum(p_i w_i) / sum(w_i)
//   flux:     Q = sum(un_i w_i)        (un = velocity normal component)
double area_average_pressure(const std::vector<double>& values,
                             const std::vector<double>& weights);
double area_flux(const std::vector<double>& normal_velocity,
                 const std::vector<double>& weights);

// Periodic central difference of a sampled cycle (helper shared with tests).
std::vector<double> periodic_derivative(const std::vector<double>& values, double dt);

ReferenceSeries read_reference_csv(const std::filesystem::path& file, double cycle_period);

TimeSeriesSolution to_time_series(const RawSeries& raw, double cycle_period, int inflow_node);

} // namespace zerod
