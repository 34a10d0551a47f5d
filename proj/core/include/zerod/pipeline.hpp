#pragma once

#include <zerod/calibration.hpp>
#include <zerod/prediction.hpp>
#include <zerod/synthesis.hpp>

namespace zerod {

enum class Modality { Baseline, LearnedVessels, LearnedJunctions, LearnedBoth, Optimal };

std::string to_string(Modality m);
const std::vector<Modality>& all_modalities();

// Maximum percent error at the vasculature inlet: with
// t* = argmax_t |P_0D(t) - P_ref(t)| over the cycle,
// MPE = 100 |P_0D(t*) - P_ref(t*)| / |P_ref(t*)|.
double compute_mpe(const TimeSeriesSolution& sol, const ReferenceSeries& ref, int inlet_node);

struct PipelineOptions {
  ModelFlavor flavor = ModelFlavor::RI;
  LossKind loss = LossKind::ProximityWeighted;
  double entrance_length_factor = 10.0;
  unsigned long long seed = 0;
  int trials = 5;
  double holdout_fraction = 0.1;
  int steps_per_cycle = 0; // 0: match the reference grid
  SimulationConfig base_sim;
  TrainConfig training;
  LMSettings lm;
};

// A fully loaded and preprocessed geometry: parsed centerline, raw and
// processed discretizations, baseline parameters, features, generation
// numbers and the reference series.
struct GeometryBundle {
  std::string id;
  CenterlineTree tree;
  BoundarySpec bc;
  Discretization raw_disc;  // straight discretize() output (baseline modality)
  Discretization processed; // split + entrance-length adjusted
  ReferenceSeries reference;
  std::map<std::string, ElementParameters> baseline_raw;
  std::map<std::string, ElementParameters> baseline_processed;
  FlowAverages baseline_flows; // processed-network baseline simulation averages
  std::map<std::string, FeatureVector> features;
  GenerationMap gamma;
  std::optional<CalibrationResult> calibration;

  CircuitNetwork baseline_network() const;
  CircuitNetwork processed_network(const std::map<std::string, ElementParameters>& params) const;
};

GeometryBundle load_geometry(const GeometryEntry& entry, const PipelineOptions& opt,
                             bool calibrate_geometry = true);

// Per-modality parameter assembly (learned modalities mix network predictions
// with baseline values per element kind) followed by a forward simulation and
// MPE scoring. Throws DivergenceError if the forward simulation diverges.
struct ModalityRun {
  TimeSeriesSolution solution;
  double mpe = 0.0;
};
ModalityRun run_modality(const GeometryBundle& geo, Modality modality, const ModelSet* models,
                         const PipelineOptions& opt);

// Training matrices for one network, assembled from calibrated geometries.
struct TrainingTable {
  Eigen::MatrixXd features;
  Eigen::VectorXd targets;
  std::vector<int> gammas;
  std::vector<std::string> geometry_ids; // per row, for the leakage audit
};
TrainingTable collect_training_rows(const std::vector<const GeometryBundle*>& geometries,
                                    ElementClass element_class, TargetKind target);

ModelSet train_models(const std::vector<const GeometryBundle*>& training_geometries,
                      const PipelineOptions& opt, int trial_index);

struct TrialRecord {
  int trial = 0;
  std::vector<std::string> holdout_ids;
  std::vector<std::string> training_ids;
  std::vector<std::string> training_row_geometries; // audit: ids behind every row
  // geometry id -> modality -> MPE (absent when the forward run diverged)
  std::map<std::string, std::map<std::string, double>> mpe;
  std::map<std::string, int> divergence_count; // per modality
};

struct ModalityStats {
  std::vector<double> trial_means;
  double mean = 0.0;
  double ci_half_width = 0.0; // 1.96 * std / sqrt(trials)
  bool degenerate_ci = false; // single usable trial
  int excluded_runs = 0;
};

struct EvaluationReport {
  std::string cohort_name;
  unsigned long long seed = 0;
  std::string flavor;
  std::string loss;
  int trials = 0;
  std::vector<TrialRecord> trial_records;
  std::map<std::string, ModalityStats> stats; // keyed by modality name
};

// Five-trial cross-validation: each trial holds out ~10% of the geometries
// (disjoint across trials where the cohort size permits), trains the networks
// on the remainder and evaluates every modality on the held-out geometries.
EvaluationReport crossval(const CohortSpec& cohort, const PipelineOptions& opt);

// Deterministic emission: report_mpe.csv, report_summary.json and
// report_chart.svg (grouped bar chart with confidence-interval whiskers).
void emit_report(const EvaluationReport& report, const std::filesystem::path& out_dir);

std::vector<std::vector<int>> fold_assignments(int n_geometries, int trials,
                                               double holdout_fraction,
                                               unsigned long long seed);

} // namespace zerod
