#pragma once

#include <zerod/features.hpp>
#include <zerod/reference.hpp>

namespace zerod {

// Desk-scale stand-in for the high-fidelity ground truth: random binary
// centerline trees plus a fixed smooth map from geometric features to the
// generating parameters Theta*. Reference series come from forward-simulating
// each tree with Theta* at high time resolution.
struct SyntheticOracle {
  unsigned long long seed = 0;
  int min_depth = 2;
  int max_depth = 3;
  double root_radius_min = 0.40, root_radius_max = 0.50; // cm
  double radius_decay_min = 0.80, radius_decay_max = 0.90;
  double length_radius_min = 8.0, length_radius_max = 16.0;
  double asymmetry = 0.10;
  double min_radius = 0.05; // cm; smaller radii trigger regeneration

  // identity: vessels keep Poiseuille values, junction pairs stay at zero
  // (the reference is the baseline model's own solution).
  // learnable: Theta* scales the calculated Poiseuille parameters by smooth
  // bounded feature-dependent factors in [1.0, 2.5].
  enum class TruthMode { Identity, Learnable };
  TruthMode truth_mode = TruthMode::Learnable;
  ModelFlavor flavor = ModelFlavor::RI; // RRI adds strong quadratic truth terms

  double entrance_length_factor = 10.0;
  int reference_samples = 1024;
  int fine_multiplier = 8; // reference simulated at samples * multiplier steps
  FluidProperties fluid;
};

std::string to_string(SyntheticOracle::TruthMode m);
SyntheticOracle::TruthMode truth_mode_from_string(const std::string& s);

// The fixed feature -> Theta* map (vessels and junction pairs).
ElementParameters truth_parameters(const SyntheticOracle& oracle, ElementKind kind,
                                   const FeatureVector& features, bool feeds_connector);

struct GeometryEntry {
  std::string id;
  std::filesystem::path centerline;
  std::filesystem::path bc;
  std::filesystem::path reference;
  std::filesystem::path truth_network;
};

struct CohortSpec {
  std::string name;
  unsigned long long seed = 0;
  ModelFlavor flavor = ModelFlavor::RI;
  double entrance_length_factor = 10.0;
  std::string truth_mode = "learnable";
  int reference_samples = 1024;
  std::vector<GeometryEntry> geometries; // paths relative to the manifest
  std::vector<std::string> generation_log;
};

// Boundary-condition file: cycle period, fluid, inflow waveform and outlet BCs.
struct BoundarySpec {
  double cycle_period = 1.0;
  FluidProperties fluid;
  int inflow_node = 0;
  InflowWaveform inflow;
  std::map<int, BoundaryCondition> outlets;

  std::map<int, BoundaryCondition> all_bcs() const;
};

std::string boundary_to_json(const BoundarySpec& bc);
BoundarySpec boundary_from_json(const std::string& text);
BoundarySpec read_boundary_json(const std::filesystem::path& file);
void write_boundary_json(const BoundarySpec& bc, const std::filesystem::path& file);

std::string cohort_to_json(const CohortSpec& cohort);
CohortSpec read_cohort_json(const std::filesystem::path& file); // paths resolved
void write_cohort_json(const CohortSpec& cohort, const std::filesystem::path& file);

// Generates `count` trees under out_dir (centerline, BC, truth network and
// reference files plus cohort.json) and returns the manifest. Deterministic:
// a fixed seed reproduces every file byte for byte.
CohortSpec generate_synthetic_cohort(const SyntheticOracle& oracle, int count,
                                     const std::filesystem::path& out_dir,
                                     const std::string& cohort_name = "synthetic");

// Cycle-averaged flow per element of a (final-cycle) solution.
FlowAverages cycle_average_flows(const TimeSeriesSolution& sol);

double waveform_cycle_average(const InflowWaveform& w, double period);

} // namespace zerod
