#pragma once

#include <zerod/discretization.hpp>

#include <optional>

namespace zerod {

// Geometric input vector for the parameter networks. Junction vectors use all
// entries; vessel vectors drop the flow ratio.
struct FeatureVector {
  double r_in = 0, r_out = 0, r_min = 0, r_max = 0; // cm
  double r_out_star = 0, r_min_star = 0, r_max_star = 0;
  double length = 0;     // centerline path length inlet -> outlet, cm
  double length_star = 0;
  double tortuosity = 1; // path length / straight-line distance
  double angle = 0;      // rad, between inlet and outlet tangents
  std::optional<double> flow_ratio; // junctions only: Q_in_avg / Q_out_avg
  double absorbed_R_poiseuille = 0, absorbed_R_stenosis = 0, absorbed_L = 0;
  double calculated_R_poiseuille = 0, calculated_R_stenosis = 0, calculated_L = 0;

  static constexpr int kCount = 18;          // full (junction) vector size
  static constexpr int kVesselCount = 17;    // without flow ratio
  static const std::vector<std::string>& names(); // CSV column order

  // Dense vector in column order; for vessels the flow-ratio slot is skipped.
  std::vector<double> values(bool include_flow_ratio) const;
};

// Cycle-averaged element flows from a baseline simulation, keyed by element id.
using FlowAverages = std::map<std::string, double>;

// One discretization element by role.
struct ElementRef {
  ElementKind kind;
  std::string id;
  const VesselSegment* vessel = nullptr;
  const JunctionElement* junction = nullptr;
  size_t outlet_index = 0;
};

// All featurizable elements in deterministic order (vessels, then junction
// pairs). Pairs feeding artificial connectors carry no geometry and are
// excluded.
std::vector<ElementRef> featurizable_elements(const Discretization& disc);

// Table-of-features extraction along the element's inlet -> outlet centerline
// path. Junction elements require baseline flows (for the flow ratio); the
// calculated parameters use the full path length including the in-junction
// segment, with the outlet radius defining the nominal area.
FeatureVector extract_features(const Discretization& disc, const CenterlineTree& tree,
                               const ElementRef& element,
                               const FlowAverages* baseline_flows,
                               const FluidProperties& fluid,
                               double inflow_cycle_average = 0.0);

// Generation number per circuit element id: the count of original junctions
// between the element and the vasculature inlet. Splitting a junction does not
// inflate gamma; all bifurcations and connectors created from one junction
// share its gamma.
using GenerationMap = std::map<std::string, int>;
GenerationMap generation_numbers(const Discretization& disc);

// --- Feature dataset CSV ----------------------------------------------------
// Columns: the Table-1 features in order, then element_kind, gamma,
// geometry_id, element_id. Vessel rows leave flow_ratio empty.
struct FeatureRow {
  std::string geometry_id;
  std::string element_id;
  ElementKind kind;
  int gamma = 0;
  FeatureVector features;
};

std::string feature_csv_header();
std::string feature_row_to_csv(const FeatureRow& row);
std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& file);
void write_feature_csv(const std::vector<FeatureRow>& rows, const std::filesystem::path& file);

} // namespace zerod
