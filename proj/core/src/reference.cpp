#include <zerod/reference.hpp>

#include <cmath>

namespace zerod {

std::vector<double> periodic_derivative(const std::vector<double>& values, double dt) {
  const size_t n = values.size();
  if (n < 3) throw ValidationError("periodic derivative needs >= 3 samples");
  std::vector<double> d(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t prev = i == 0 ? n - 1 : i - 1;
    const size_t next = i + 1 == n ? 0 : i + 1;
    d[i] = (values[next] - values[prev]) / (2.0 * dt);
  }
  return d;
}

ReferenceSeries project_reference(const RawSeries& raw, double cycle_period) {
  if (raw.time.size() < 3)
    throw ValidationError("project_reference needs >= 3 samples, got " +
                          std::to_string(raw.time.size()));
  const double dt = raw.time[1] - raw.time[0];
  if (!(dt > 0.0)) throw ValidationError("time grid must be strictly increasing");
  for (size_t i = 1; i + 1 < raw.time.size(); ++i) {
    const double step = raw.time[i + 1] - raw.time[i];
    if (std::abs(step - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
      throw ValidationError("project_reference requires a uniform time grid");
  }

  ReferenceSeries ref;
  ref.time = raw.time;
  ref.cycle_period = cycle_period;
  for (const auto& [id, p] : raw.node_pressure) {
    ref.node_pressure[id] = p;
    ref.node_dpdt[id] = periodic_derivative(p, dt);
  }
  for (const auto& [id, q] : raw.element_flow) {
    ref.element_flow[id] = q;
    ref.element_dqdt[id] = periodic_derivative(q, dt);
  }
  return ref;
}

double area_average_pressure(const std::vector<double>& values,
                             const std::vector<double>& weights) {
  if (values.size() != weights.size())
    throw ValidationError("area_average: values/weights size mismatch");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    num += values[i] * weights[i];
    den += weights[i];
  }
  if (!(den > 0.0)) throw ValidationError("area_average: total weight must be > 0");
  return num / den;
}

double area_flux(const std::vector<double>& normal_velocity,
                 const std::vector<double>& weights) {
  if (normal_velocity.size() != weights.size())
    throw ValidationError("area_flux: values/weights size mismatch");
  double den = 0.0, q = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    q += normal_velocity[i] * weights[i];
    den += weights[i];
  }
  if (!(den > 0.0)) throw ValidationError("area_flux: total weight must be > 0");
  return q;
}

ReferenceSeries read_reference_csv(const std::filesystem::path& file, double cycle_period) {
  return project_reference(read_series_csv(file), cycle_period);
}

TimeSeriesSolution to_time_series(const RawSeries& raw, double cycle_period, int inflow_node) {
  TimeSeriesSolution sol;
  sol.time = raw.time;
  sol.cycle_period = cycle_period;
  sol.steps_per_cycle = static_cast<int>(raw.time.size());
  sol.inflow_node = inflow_node;
  for (const auto& [id, p] : raw.node_pressure) sol.node_ids.push_back(id);
  sol.node_pressure.resize(static_cast<Eigen::Index>(sol.node_ids.size()),
                           static_cast<Eigen::Index>(raw.time.size()));
  Eigen::Index r = 0;
  for (const auto& [id, p] : raw.node_pressure) {
    for (size_t k = 0; k < p.size(); ++k)
      sol.node_pressure(r, static_cast<Eigen::Index>(k)) = p[k];
    ++r;
  }
  for (const auto& [id, q] : raw.element_flow) sol.element_ids.push_back(id);
  sol.element_flow.resize(static_cast<Eigen::Index>(sol.element_ids.size()),
                          static_cast<Eigen::Index>(raw.time.size()));
  r = 0;
  for (const auto& [id, q] : raw.element_flow) {
    for (size_t k = 0; k < q.size(); ++k)
      sol.element_flow(r, static_cast<Eigen::Index>(k)) = q[k];
    ++r;
  }
  return sol;
}

} // namespace zerod
