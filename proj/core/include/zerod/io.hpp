#pragma once

#include <zerod/solver.hpp>

#include <filesystem>
#include <iosfwd>

namespace zerod {

// --- Network configuration (JSON) -----------------------------------------
// Top-level keys: fluid, cycle_period, elements, boundary_conditions.
// BC types: FLOW (waveform table), RESISTANCE (Rd, Pd), RCR (Rp, C, Rd, Pd).
CircuitNetwork read_network_json(const std::filesystem::path& file);
CircuitNetwork parse_network_json(const std::string& text);
std::string network_to_json(const CircuitNetwork& net);
void write_network_json(const CircuitNetwork& net, const std::filesystem::path& file);

// --- Solution / reference time series (CSV) --------------------------------
// Header: time,entity_kind,entity_id,quantity,value with quantities P and Q.
// Rows are time-major: per sample all node pressures (sorted by node id) then
// all element flows (network element order). Doubles use shortest round-trip
// formatting, so re-emitting an unchanged series is byte-identical.
void write_solution_csv(const TimeSeriesSolution& sol, std::ostream& os,
                        bool last_cycle_only = false);
void write_solution_csv(const TimeSeriesSolution& sol, const std::filesystem::path& file,
                        bool last_cycle_only = false);

// Sampled node/element series read back from a solution CSV.
struct RawSeries {
  std::vector<double> time;
  std::map<int, std::vector<double>> node_pressure;
  std::map<std::string, std::vector<double>> element_flow;
};
RawSeries read_series_csv(const std::filesystem::path& file);
RawSeries read_series_csv(std::istream& is);

// Shortest decimal form that round-trips a double (deterministic output).
std::string format_double(double v);

} // namespace zerod
