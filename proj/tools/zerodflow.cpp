// zerodflow: lumped-parameter vascular flow modeling pipeline.
//
// Subcommands: synth, prep, simulate, calibrate, featurize, train, predict,
// evaluate, crossval. Exit codes: 0 success, 2 validation failure, 3 solver
// divergence.

#include <zerod/io.hpp>
#include <zerod/pipeline.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

using namespace zerod;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::string flavor = "ri";
  std::string loss = "proximity";
  double entrance_length_factor = 10.0;
  unsigned long long seed = 0;
  std::string out_dir = ".";

  ModelFlavor model_flavor() const {
    if (flavor == "ri") return ModelFlavor::RI;
    if (flavor == "rri") return ModelFlavor::RRI;
    throw ValidationError("--flavor must be ri or rri");
  }
  LossKind loss_kind() const {
    if (loss == "mse") return LossKind::MSE;
    if (loss == "proximity") return LossKind::ProximityWeighted;
    throw ValidationError("--loss must be mse or proximity");
  }
  PipelineOptions pipeline() const {
    PipelineOptions opt;
    opt.flavor = model_flavor();
    opt.loss = loss_kind();
    opt.entrance_length_factor = entrance_length_factor;
    opt.seed = seed;
    return opt;
  }
  std::filesystem::path out() const {
    std::filesystem::create_directories(out_dir);
    return out_dir;
  }
};

json discretization_summary(const Discretization& disc) {
  json j;
  json vessels = json::array();
  for (const auto& v : disc.vessels)
    vessels.push_back({{"id", v.id}, {"branch_id", v.branch_id}, {"points", v.points}});
  j["vessels"] = vessels;
  json junctions = json::array();
  for (const auto& jn : disc.junctions) {
    json outs = json::array();
    for (const auto& o : jn.outlets)
      outs.push_back({{"node", o.outlet_node},
                      {"l_j", o.in_junction_length},
                      {"absorbed_length", o.absorbed_length},
                      {"feeds_connector", o.feeds_connector}});
    junctions.push_back({{"id", jn.id},
                         {"inlet_node", jn.inlet_node},
                         {"geometric_inlet", jn.geometric_inlet_point},
                         {"outlets", outs}});
  }
  j["junctions"] = junctions;
  json connectors = json::array();
  for (const auto& c : disc.connectors)
    connectors.push_back(
        {{"id", c.id}, {"inlet", c.inlet_node}, {"outlet", c.outlet_node}});
  j["connectors"] = connectors;
  j["provenance"] = disc.provenance;
  return j;
}

// Shared by prep/predict/featurize: parse, preprocess and featurize one
// geometry, including the baseline forward run for flow ratios.
struct PreppedGeometry {
  CenterlineTree tree;
  BoundarySpec bc;
  Discretization disc;
  std::map<std::string, ElementParameters> baseline;
  FlowAverages flows;
  std::map<std::string, FeatureVector> features;
  GenerationMap gamma;
};

PreppedGeometry prep_geometry(const std::filesystem::path& centerline,
                              const std::filesystem::path& bc_file,
                              const GlobalOptions& global) {
  PreppedGeometry g;
  g.tree = parse_centerline(centerline);
  g.bc = read_boundary_json(bc_file);
  g.disc = entrance_length_adjust(split_multi_outlet_junctions(discretize(g.tree)), g.tree,
                                  g.bc.fluid, global.entrance_length_factor);
  g.baseline = baseline_parameters(g.disc, g.tree, g.bc.fluid);
  const auto net = assemble_network(circuit_elements(g.disc, g.tree), g.baseline,
                                    g.bc.all_bcs(), g.bc.fluid, g.bc.cycle_period);
  SimulationConfig cfg;
  cfg.flavor = global.model_flavor();
  const auto sol = simulate(net, cfg);
  g.flows = cycle_average_flows(sol);
  const double q_avg = waveform_cycle_average(g.bc.inflow, g.bc.cycle_period);
  for (const auto& el : featurizable_elements(g.disc))
    g.features[el.id] = extract_features(g.disc, g.tree, el, &g.flows, g.bc.fluid, q_avg);
  g.gamma = generation_numbers(g.disc);
  return g;
}

std::vector<FeatureRow> feature_rows(const PreppedGeometry& g, const std::string& geometry_id) {
  std::vector<FeatureRow> rows;
  for (const auto& el : featurizable_elements(g.disc)) {
    FeatureRow row;
    row.geometry_id = geometry_id;
    row.element_id = el.id;
    row.kind = el.kind;
    row.gamma = g.gamma.at(el.id);
    row.features = g.features.at(el.id);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot write " + file.string());
  os << text;
}

// Calibrated geometries for training-target collection.
std::vector<GeometryBundle> load_cohort(const CohortSpec& cohort, const PipelineOptions& opt) {
  std::vector<GeometryBundle> geos;
  for (const auto& entry : cohort.geometries) geos.push_back(load_geometry(entry, opt));
  return geos;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lumped-parameter (0D) vascular flow modeling pipeline"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--flavor", global.flavor, "Pressure-drop law: ri or rri")
      ->check(CLI::IsMember({"ri", "rri"}));
  app.add_option("--loss", global.loss, "Training loss: mse or proximity")
      ->check(CLI::IsMember({"mse", "proximity"}));
  app.add_option("--entrance-length-factor", global.entrance_length_factor,
                 "Pseudo entrance length in outlet radii (0 disables)");
  app.add_option("--seed", global.seed, "Random seed");
  app.add_option("--out", global.out_dir, "Output directory");

  // --- synth ---
  auto* synth = app.add_subcommand("synth", "Generate a synthetic oracle cohort");
  int synth_count = 15;
  bool synth_identity = false;
  int depth_min = 2, depth_max = 3;
  std::string cohort_name = "synthetic";
  synth->add_option("--count", synth_count, "Number of geometries (>= 5)");
  synth->add_flag("--identity", synth_identity,
                  "Identity truth map (reference equals the baseline model)");
  synth->add_option("--depth-min", depth_min, "Minimum bifurcation depth");
  synth->add_option("--depth-max", depth_max, "Maximum bifurcation depth");
  synth->add_option("--name", cohort_name, "Cohort name");

  // --- prep ---
  auto* prep = app.add_subcommand("prep", "Centerline -> discretization + features");
  std::string prep_centerline, prep_bc, prep_geometry_id = "geometry";
  prep->add_option("--centerline", prep_centerline, "Centerline JSON")->required();
  prep->add_option("--bc", prep_bc, "Boundary-condition JSON")->required();
  prep->add_option("--geometry-id", prep_geometry_id, "Geometry id for the feature rows");

  // --- simulate ---
  auto* sim = app.add_subcommand("simulate", "Forward 0D simulation of a network file");
  std::string sim_network;
  int sim_steps = 1000, sim_cycles = 10;
  bool last_cycle_only = false;
  sim->add_option("--network", sim_network, "Network configuration JSON")->required();
  sim->add_option("--steps", sim_steps, "Steps per cardiac cycle");
  sim->add_option("--cycles", sim_cycles, "Maximum number of cycles");
  sim->add_flag("--last-cycle-only", last_cycle_only, "Write only the final cycle");

  // --- calibrate ---
  auto* cal = app.add_subcommand("calibrate", "Fit element parameters to a reference series");
  std::string cal_network, cal_reference;
  cal->add_option("--network", cal_network, "Network configuration JSON")->required();
  cal->add_option("--reference", cal_reference, "Reference series CSV")->required();

  // --- featurize ---
  auto* feat = app.add_subcommand("featurize", "Feature dataset for a cohort");
  std::string feat_cohort;
  feat->add_option("--cohort", feat_cohort, "Cohort manifest JSON")->required();

  // --- train ---
  auto* tr = app.add_subcommand("train", "Train the parameter networks on a cohort");
  std::string train_cohort;
  int train_epochs = 5000;
  double train_lr = 1e-3;
  tr->add_option("--cohort", train_cohort, "Cohort manifest JSON")->required();
  tr->add_option("--epochs", train_epochs, "Training epochs");
  tr->add_option("--learning-rate", train_lr, "Adam learning rate");

  // --- predict ---
  auto* pred = app.add_subcommand("predict", "Predict parameters for one geometry");
  std::string pred_models, pred_centerline, pred_bc;
  pred->add_option("--models", pred_models, "Directory of trained model files")->required();
  pred->add_option("--centerline", pred_centerline, "Centerline JSON")->required();
  pred->add_option("--bc", pred_bc, "Boundary-condition JSON")->required();

  // --- evaluate ---
  auto* eval = app.add_subcommand("evaluate", "MPE of a solution against a reference");
  std::string eval_solution, eval_reference, eval_network;
  int eval_node = -1;
  double eval_period = 1.0;
  eval->add_option("--solution", eval_solution, "Solution CSV")->required();
  eval->add_option("--reference", eval_reference, "Reference CSV")->required();
  eval->add_option("--node", eval_node, "Inlet node id");
  eval->add_option("--network", eval_network, "Network JSON (to locate the inlet node)");
  eval->add_option("--cycle-period", eval_period, "Cycle period of the series (s)");

  // --- crossval ---
  auto* cv = app.add_subcommand("crossval", "Five-trial cross-validation study");
  std::string cv_cohort;
  int cv_trials = 5, cv_epochs = 5000;
  cv->add_option("--cohort", cv_cohort, "Cohort manifest JSON")->required();
  cv->add_option("--trials", cv_trials, "Number of trials");
  cv->add_option("--epochs", cv_epochs, "Training epochs per network");

  // Global flags may also appear after the subcommand name.
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      SyntheticOracle oracle;
      oracle.seed = global.seed;
      oracle.flavor = global.model_flavor();
      oracle.entrance_length_factor = global.entrance_length_factor;
      oracle.truth_mode = synth_identity ? SyntheticOracle::TruthMode::Identity
                                         : SyntheticOracle::TruthMode::Learnable;
      oracle.min_depth = depth_min;
      oracle.max_depth = depth_max;
      const auto cohort = generate_synthetic_cohort(oracle, synth_count, global.out(),
                                                    cohort_name);
      std::cout << "cohort " << cohort.name << ": " << cohort.geometries.size()
                << " geometries in " << global.out_dir << "\n";
      for (const auto& note : cohort.generation_log) std::cerr << note << "\n";
    } else if (*prep) {
      const auto g = prep_geometry(prep_centerline, prep_bc, global);
      const auto out = global.out();
      write_text(out / "discretization.json", discretization_summary(g.disc).dump(2) + "\n");
      const auto net = assemble_network(circuit_elements(g.disc, g.tree), g.baseline,
                                        g.bc.all_bcs(), g.bc.fluid, g.bc.cycle_period);
      write_network_json(net, out / "network.json");
      write_feature_csv(feature_rows(g, prep_geometry_id), out / "features.csv");
      std::cout << g.disc.vessels.size() << " vessels, " << g.disc.junctions.size()
                << " junctions, " << g.disc.connectors.size() << " connectors\n";
    } else if (*sim) {
      const auto net = read_network_json(sim_network);
      SimulationConfig cfg;
      cfg.steps_per_cycle = sim_steps;
      cfg.max_cycles = sim_cycles;
      cfg.flavor = global.model_flavor();
      cfg.keep_history = true;
      const auto sol = simulate(net, cfg);
      write_solution_csv(sol, global.out() / "solution.csv", last_cycle_only);
      std::cout << "simulated " << sol.cycles_completed << " cycles; last cycle change "
                << sol.last_cycle_change << "\n";
    } else if (*cal) {
      const auto net = read_network_json(cal_network);
      const auto ref = read_reference_csv(cal_reference, net.cycle_period);
      CalibrationProblem problem;
      problem.net = &net;
      problem.flavor = global.model_flavor();
      std::map<std::string, ElementParameters> init;
      for (const auto& e : net.elements) init[e.id] = e.params;
      const auto result = calibrate(problem, ref, init);
      const auto out = global.out();
      write_calibration_report(result, out / "calibration.json");
      CircuitNetwork calibrated = net;
      for (auto& e : calibrated.elements) e.params = result.parameters.at(e.id);
      write_network_json(calibrated, out / "calibrated_network.json");
      std::cout << "status " << to_string(result.status) << ", residual "
                << result.residual_norm << " (from " << result.initial_residual_norm << ")\n";
    } else if (*feat) {
      const auto cohort = read_cohort_json(feat_cohort);
      std::vector<FeatureRow> rows;
      for (const auto& entry : cohort.geometries) {
        const auto g = prep_geometry(entry.centerline, entry.bc, global);
        auto r = feature_rows(g, entry.id);
        rows.insert(rows.end(), r.begin(), r.end());
      }
      write_feature_csv(rows, global.out() / "dataset.csv");
      std::cout << rows.size() << " feature rows\n";
    } else if (*tr) {
      const auto cohort = read_cohort_json(train_cohort);
      PipelineOptions opt = global.pipeline();
      opt.training.epochs = train_epochs;
      opt.training.learning_rate = train_lr;
      const auto geos = load_cohort(cohort, opt);
      std::vector<const GeometryBundle*> all;
      for (const auto& g : geos) all.push_back(&g);
      const auto models = train_models(all, opt, 0);
      const auto out = global.out();
      models.save(out / "models");
      // Per-network training curves, re-run deterministically for the report.
      for (const auto& [key, predictor] : models.predictors) {
        TrainingTable table = collect_training_rows(all, key.first, key.second);
        Standardizer fs = Standardizer::fit(table.features);
        Eigen::VectorXd y = (table.targets.array() - predictor.target_mean) /
                            predictor.target_std;
        const auto outcome =
            train(fs.apply(table.features), y, table.gammas, key.first, key.second,
                  default_hidden_layers(key.first, key.second), predictor.config);
        std::ofstream os(out / ("train_" + to_string(key.first) + "_" +
                                to_string(key.second) + ".csv"));
        os << "epoch,loss\n";
        for (size_t e = 0; e < outcome.epoch_loss.size(); ++e)
          os << e << "," << format_double(outcome.epoch_loss[e]) << "\n";
      }
      std::cout << "trained " << models.predictors.size() << " networks\n";
    } else if (*pred) {
      const auto models = ModelSet::load(pred_models, global.model_flavor());
      const auto g = prep_geometry(pred_centerline, pred_bc, global);
      const auto params = predict_parameters(models, g.disc, g.features,
                                             global.model_flavor());
      const auto net = assemble_network(circuit_elements(g.disc, g.tree), params,
                                        g.bc.all_bcs(), g.bc.fluid, g.bc.cycle_period);
      write_network_json(net, global.out() / "predicted_network.json");
      std::cout << "predicted parameters for " << params.size() << " elements\n";
    } else if (*eval) {
      int node = eval_node;
      double period = eval_period;
      if (node < 0) {
        if (eval_network.empty())
          throw ValidationError("evaluate needs --node or --network to locate the inlet");
        const auto net = read_network_json(eval_network);
        node = net.inflow_node();
        period = net.cycle_period;
      }
      const auto raw = read_series_csv(eval_solution);
      const auto sol = to_time_series(raw, period, node);
      const auto ref = read_reference_csv(eval_reference, period);
      const double mpe = compute_mpe(sol, ref, node);
      json j{{"inlet_node", node}, {"mpe_percent", mpe}};
      write_text(global.out() / "mpe.json", j.dump(2) + "\n");
      std::cout << "MPE " << mpe << "%\n";
    } else if (*cv) {
      const auto cohort = read_cohort_json(cv_cohort);
      PipelineOptions opt = global.pipeline();
      opt.trials = cv_trials;
      opt.training.epochs = cv_epochs;
      if (app.count("--entrance-length-factor") == 0)
        opt.entrance_length_factor = cohort.entrance_length_factor;
      if (app.count("--flavor") == 0) opt.flavor = cohort.flavor;
      if (app.count("--seed") == 0) opt.seed = cohort.seed;
      const auto report = crossval(cohort, opt);
      emit_report(report, global.out());
      for (const auto& m : all_modalities()) {
        const auto& s = report.stats.at(to_string(m));
        std::cout << to_string(m) << ": mean MPE " << s.mean << "% (ci " << s.ci_half_width
                  << ", excluded " << s.excluded_runs << ")\n";
      }
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "solver divergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
