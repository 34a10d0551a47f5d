#include <zerod/pipeline.hpp>

#include <zerod/solver.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace zerod {

using nlohmann::json;

std::string to_string(Modality m) {
  switch (m) {
    case Modality::Baseline: return "baseline";
    case Modality::LearnedVessels: return "learned-vessels";
    case Modality::LearnedJunctions: return "learned-junctions";
    case Modality::LearnedBoth: return "learned-both";
    case Modality::Optimal: return "optimal";
  }
  return "?";
}

const std::vector<Modality>& all_modalities() {
  static const std::vector<Modality> m{Modality::Baseline, Modality::LearnedVessels,
                                       Modality::LearnedJunctions, Modality::LearnedBoth,
                                       Modality::Optimal};
  return m;
}

double compute_mpe(const TimeSeriesSolution& sol, const ReferenceSeries& ref, int inlet_node) {
  auto rit = ref.node_pressure.find(inlet_node);
  if (rit == ref.node_pressure.end())
    throw ValidationError("reference has no inlet node " + std::to_string(inlet_node));
  const auto& pref = rit->second;
  if (sol.time.size() != pref.size())
    throw ValidationError("MPE: solution and reference grids have different lengths");
  const double tol = 1e-9 * std::max(1.0, ref.cycle_period);
  for (size_t k = 0; k < sol.time.size(); ++k)
    if (std::abs(sol.time[k] - ref.time[k]) > tol)
      throw ValidationError("MPE: solution and reference time grids are misaligned");

  const int row = sol.node_row(inlet_node);
  double worst = -1.0;
  size_t at = 0;
  for (size_t k = 0; k < pref.size(); ++k) {
    const double diff =
        std::abs(sol.node_pressure(row, static_cast<Eigen::Index>(k)) - pref[k]);
    if (diff > worst) {
      worst = diff;
      at = k;
    }
  }
  const double denom = std::abs(pref[at]);
  if (denom == 0.0) throw ValidationError("MPE: reference pressure is zero at t*");
  return 100.0 * worst / denom;
}

CircuitNetwork GeometryBundle::baseline_network() const {
  return assemble_network(circuit_elements(raw_disc, tree), baseline_raw, bc.all_bcs(),
                          bc.fluid, bc.cycle_period);
}

CircuitNetwork GeometryBundle::processed_network(
    const std::map<std::string, ElementParameters>& params) const {
  return assemble_network(circuit_elements(processed, tree), params, bc.all_bcs(), bc.fluid,
                          bc.cycle_period);
}

GeometryBundle load_geometry(const GeometryEntry& entry, const PipelineOptions& opt,
                             bool calibrate_geometry) {
  GeometryBundle geo;
  geo.id = entry.id;
  geo.tree = parse_centerline(entry.centerline);
  geo.bc = read_boundary_json(entry.bc);
  geo.raw_disc = discretize(geo.tree);
  geo.processed = entrance_length_adjust(split_multi_outlet_junctions(geo.raw_disc), geo.tree,
                                         geo.bc.fluid, opt.entrance_length_factor);
  geo.reference = read_reference_csv(entry.reference, geo.bc.cycle_period);
  geo.baseline_raw = baseline_parameters(geo.raw_disc, geo.tree, geo.bc.fluid);
  geo.baseline_processed = baseline_parameters(geo.processed, geo.tree, geo.bc.fluid);

  // Baseline forward run on the processed network: flow-ratio features.
  SimulationConfig cfg = opt.base_sim;
  cfg.steps_per_cycle = opt.steps_per_cycle > 0
                            ? opt.steps_per_cycle
                            : static_cast<int>(geo.reference.samples());
  cfg.flavor = opt.flavor;
  TimeSeriesSolution base = simulate(geo.processed_network(geo.baseline_processed), cfg);
  geo.baseline_flows = cycle_average_flows(base);

  const double q_avg = waveform_cycle_average(geo.bc.inflow, geo.bc.cycle_period);
  for (const auto& el : featurizable_elements(geo.processed))
    geo.features[el.id] =
        extract_features(geo.processed, geo.tree, el, &geo.baseline_flows, geo.bc.fluid, q_avg);
  geo.gamma = generation_numbers(geo.processed);

  if (calibrate_geometry) {
    CircuitNetwork net = geo.processed_network(geo.baseline_processed);
    CalibrationProblem problem;
    problem.net = &net;
    problem.flavor = opt.flavor;
    problem.lm = opt.lm;
    geo.calibration = calibrate(problem, geo.reference, geo.baseline_processed);
  }
  return geo;
}

ModalityRun run_modality(const GeometryBundle& geo, Modality modality, const ModelSet* models,
                         const PipelineOptions& opt) {
  SimulationConfig cfg = opt.base_sim;
  cfg.steps_per_cycle =
      opt.steps_per_cycle > 0 ? opt.steps_per_cycle : static_cast<int>(geo.reference.samples());
  cfg.flavor = opt.flavor;

  CircuitNetwork net;
  if (modality == Modality::Baseline) {
    net = geo.baseline_network();
  } else if (modality == Modality::Optimal) {
    if (!geo.calibration)
      throw ValidationError("optimal modality requires a calibrated geometry");
    net = geo.processed_network(geo.calibration->parameters);
  } else {
    if (models == nullptr)
      throw ValidationError("learned modalities require trained models");
    auto predicted = predict_parameters(*models, geo.processed, geo.features, opt.flavor);
    std::map<std::string, ElementParameters> params = geo.baseline_processed;
    const bool vessels = modality != Modality::LearnedJunctions;
    const bool junctions = modality != Modality::LearnedVessels;
    for (const auto& v : geo.processed.vessels)
      if (vessels) params[v.id] = predicted.at(v.id);
    if (junctions)
      for (const auto& j : geo.processed.junctions)
        for (size_t k = 0; k < j.outlets.size(); ++k) {
          const auto id = junction_pair_id(j, k);
          params[id] = predicted.at(id);
        }
    net = geo.processed_network(params);
  }

  ModalityRun run;
  run.solution = simulate(net, cfg);
  run.mpe = compute_mpe(run.solution, geo.reference, run.solution.inflow_node);
  return run;
}

TrainingTable collect_training_rows(const std::vector<const GeometryBundle*>& geometries,
                                    ElementClass element_class, TargetKind target) {
  const bool junction = element_class == ElementClass::Junction;
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  TrainingTable table;
  for (const auto* geo : geometries) {
    if (!geo->calibration)
      throw ValidationError("training rows require calibrated geometries");
    for (const auto& el : featurizable_elements(geo->processed)) {
      const bool is_junction = el.kind == ElementKind::JunctionOutletPair;
      if (is_junction != junction) continue;
      const auto& f = geo->features.at(el.id);
      const auto& p = geo->calibration->parameters.at(el.id);
      rows.push_back(f.values(junction));
      switch (target) {
        case TargetKind::RLin: targets.push_back(p.R_lin); break;
        case TargetKind::RQuad: targets.push_back(p.R_quad); break;
        case TargetKind::Inductance: targets.push_back(p.L); break;
      }
      table.gammas.push_back(geo->gamma.at(el.id));
      table.geometry_ids.push_back(geo->id);
    }
  }
  if (rows.empty()) throw ValidationError("no training rows for " + to_string(element_class));
  table.features.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(rows.front().size()));
  table.targets.resize(static_cast<Eigen::Index>(targets.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < rows[r].size(); ++c)
      table.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    table.targets[static_cast<Eigen::Index>(r)] = targets[r];
  }
  return table;
}

namespace {

unsigned long long mix_seed(unsigned long long seed, unsigned long long a,
                            unsigned long long b) {
  // splitmix64 over the combined words
  unsigned long long x = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

} // namespace

ModelSet train_models(const std::vector<const GeometryBundle*>& training_geometries,
                      const PipelineOptions& opt, int trial_index) {
  ModelSet set;
  for (ElementClass cls : {ElementClass::Vessel, ElementClass::Junction}) {
    for (TargetKind target : {TargetKind::RLin, TargetKind::RQuad, TargetKind::Inductance}) {
      if (opt.flavor == ModelFlavor::RI && target == TargetKind::RQuad) continue;
      TrainingTable table = collect_training_rows(training_geometries, cls, target);

      Standardizer fs = Standardizer::fit(table.features);
      Eigen::MatrixXd X = fs.apply(table.features);
      const double t_mean = table.targets.mean();
      const double t_std = std::max(
          std::sqrt((table.targets.array() - t_mean).square().mean()), 1e-12);
      Eigen::VectorXd y = (table.targets.array() - t_mean) / t_std;

      TrainConfig cfg = opt.training;
      cfg.loss = opt.loss;
      cfg.seed = mix_seed(opt.seed, static_cast<unsigned long long>(trial_index) * 16 +
                                        static_cast<unsigned long long>(cls) * 4 +
                                        static_cast<unsigned long long>(target),
                          0xabcdef);
      TrainOutcome outcome =
          train(X, y, table.gammas, cls, target, default_hidden_layers(cls, target), cfg);

      TrainedPredictor p;
      p.model = std::move(outcome.model);
      p.feature_standardizer = std::move(fs);
      p.target_mean = t_mean;
      p.target_std = t_std;
      p.config = cfg;
      set.predictors[{cls, target}] = std::move(p);
    }
  }
  return set;
}

std::vector<std::vector<int>> fold_assignments(int n_geometries, int trials,
                                               double holdout_fraction,
                                               unsigned long long seed) {
  if (n_geometries < trials)
    throw ValidationError("cross-validation needs at least as many geometries as trials");
  const int h = std::max(1, static_cast<int>(std::llround(holdout_fraction * n_geometries)));
  std::vector<int> order(n_geometries);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 0x5eed, 0xf01d));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<int>> folds(trials);
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < h; ++i) {
      // Disjoint consecutive blocks when trials*h <= n, wrapping otherwise.
      folds[t].push_back(order[(t * h + i) % n_geometries]);
    }
    std::sort(folds[t].begin(), folds[t].end());
  }
  return folds;
}

EvaluationReport crossval(const CohortSpec& cohort, const PipelineOptions& opt) {
  const int n = static_cast<int>(cohort.geometries.size());
  if (n < 5) throw ValidationError("cross-validation needs at least 5 geometries");

  std::vector<GeometryBundle> geos;
  geos.reserve(n);
  for (const auto& entry : cohort.geometries) geos.push_back(load_geometry(entry, opt));

  const auto folds = fold_assignments(n, opt.trials, opt.holdout_fraction, opt.seed);

  EvaluationReport report;
  report.cohort_name = cohort.name;
  report.seed = opt.seed;
  report.flavor = to_string(opt.flavor);
  report.loss = opt.loss == LossKind::MSE ? "mse" : "proximity";
  report.trials = opt.trials;

  for (int t = 0; t < opt.trials; ++t) {
    TrialRecord rec;
    rec.trial = t;
    std::vector<char> held(n, 0);
    for (int gi : folds[t]) held[gi] = 1;
    std::vector<const GeometryBundle*> training;
    for (int gi = 0; gi < n; ++gi) {
      if (held[gi]) rec.holdout_ids.push_back(geos[gi].id);
      else {
        rec.training_ids.push_back(geos[gi].id);
        training.push_back(&geos[gi]);
      }
    }

    ModelSet models = train_models(training, opt, t);
    {
      // Leakage audit: record the geometry behind every training row.
      TrainingTable vt = collect_training_rows(training, ElementClass::Vessel, TargetKind::RLin);
      TrainingTable jt =
          collect_training_rows(training, ElementClass::Junction, TargetKind::RLin);
      rec.training_row_geometries = vt.geometry_ids;
      rec.training_row_geometries.insert(rec.training_row_geometries.end(),
                                         jt.geometry_ids.begin(), jt.geometry_ids.end());
      for (const auto& id : rec.training_row_geometries)
        if (std::find(rec.holdout_ids.begin(), rec.holdout_ids.end(), id) !=
            rec.holdout_ids.end())
          throw ValidationError("cross-validation leakage: held-out geometry " + id +
                                " appeared in training rows");
    }

    for (int gi : folds[t]) {
      for (Modality m : all_modalities()) {
        try {
          ModalityRun run = run_modality(geos[gi], m, &models, opt);
          rec.mpe[geos[gi].id][to_string(m)] = run.mpe;
        } catch (const DivergenceError&) {
          ++rec.divergence_count[to_string(m)];
        }
      }
    }
    report.trial_records.push_back(std::move(rec));
  }

  // Aggregate: mean over trial means and a normal-approximation 95% CI.
  for (Modality m : all_modalities()) {
    ModalityStats stats;
    for (const auto& rec : report.trial_records) {
      double sum = 0.0;
      int count = 0;
      for (const auto& [geo_id, by_modality] : rec.mpe) {
        auto it = by_modality.find(to_string(m));
        if (it != by_modality.end()) {
          sum += it->second;
          ++count;
        }
      }
      auto ex = rec.divergence_count.find(to_string(m));
      if (ex != rec.divergence_count.end()) stats.excluded_runs += ex->second;
      if (count > 0) stats.trial_means.push_back(sum / count);
    }
    const size_t k = stats.trial_means.size();
    if (k > 0) {
      stats.mean = std::accumulate(stats.trial_means.begin(), stats.trial_means.end(), 0.0) /
                   static_cast<double>(k);
      if (k > 1) {
        double ss = 0.0;
        for (double v : stats.trial_means) ss += (v - stats.mean) * (v - stats.mean);
        const double sd = std::sqrt(ss / static_cast<double>(k - 1));
        stats.ci_half_width = 1.96 * sd / std::sqrt(static_cast<double>(k));
      } else {
        stats.degenerate_ci = true;
      }
    }
    report.stats[to_string(m)] = std::move(stats);
  }
  return report;
}

namespace {

std::string svg_bar_chart(const EvaluationReport& report) {
  // Grouped bars (one per modality) with 95% CI whiskers.
  const auto& order = all_modalities();
  const std::vector<std::string> palette{"#8c8c8c", "#4c72b0", "#dd8452", "#55a868", "#c44e52"};
  double max_val = 1e-9;
  for (const auto& m : order) {
    const auto& s = report.stats.at(to_string(m));
    max_val = std::max(max_val, s.mean + s.ci_half_width);
  }
  const double w = 640, h = 400, margin = 60, bar_gap = 24;
  const double plot_w = w - 2 * margin, plot_h = h - 2 * margin;
  const double bar_w = (plot_w - bar_gap * (order.size() + 1)) / order.size();

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">"
     << "Inlet MPE by parameter modality (" << report.cohort_name << ")</text>\n";
  // axes
  os << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin
     << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
     << h - margin << "\" stroke=\"black\"/>\n";
  os << "<text x=\"16\" y=\"" << h / 2 << "\" font-size=\"12\" text-anchor=\"middle\" "
     << "transform=\"rotate(-90 16 " << h / 2 << ")\">MPE (%)</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = max_val * tick / 4.0;
    const double y = h - margin - plot_h * tick / 4.0;
    os << "<line x1=\"" << margin - 4 << "\" y1=\"" << y << "\" x2=\"" << margin << "\" y2=\""
       << y << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << margin - 8 << "\" y=\"" << y + 4
       << "\" font-size=\"11\" text-anchor=\"end\">" << format_double(std::round(v * 100) / 100)
       << "</text>\n";
  }
  for (size_t i = 0; i < order.size(); ++i) {
    const auto name = to_string(order[i]);
    const auto& s = report.stats.at(name);
    const double x = margin + bar_gap + i * (bar_w + bar_gap);
    const double bh = plot_h * (s.mean / max_val);
    const double y = h - margin - bh;
    os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w << "\" height=\"" << bh
       << "\" fill=\"" << palette[i % palette.size()] << "\"/>\n";
    if (s.ci_half_width > 0.0) {
      const double cx = x + bar_w / 2;
      const double y0 = h - margin - plot_h * ((s.mean + s.ci_half_width) / max_val);
      const double y1 = h - margin - plot_h * (std::max(0.0, s.mean - s.ci_half_width) / max_val);
      os << "<line x1=\"" << cx << "\" y1=\"" << y0 << "\" x2=\"" << cx << "\" y2=\"" << y1
         << "\" stroke=\"black\"/>\n";
      os << "<line x1=\"" << cx - 6 << "\" y1=\"" << y0 << "\" x2=\"" << cx + 6 << "\" y2=\""
         << y0 << "\" stroke=\"black\"/>\n";
      os << "<line x1=\"" << cx - 6 << "\" y1=\"" << y1 << "\" x2=\"" << cx + 6 << "\" y2=\""
         << y1 << "\" stroke=\"black\"/>\n";
    }
    os << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << h - margin + 16
       << "\" font-size=\"11\" text-anchor=\"middle\">" << name << "</text>\n";
    os << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << y - 6
       << "\" font-size=\"10\" text-anchor=\"middle\">"
       << format_double(std::round(s.mean * 100) / 100) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

} // namespace

void emit_report(const EvaluationReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  {
    std::ofstream os(out_dir / "report_mpe.csv");
    if (!os) throw ValidationError("cannot write report_mpe.csv");
    os << "trial,geometry_id,modality,mpe_percent\n";
    for (const auto& rec : report.trial_records)
      for (const auto& [geo, by_modality] : rec.mpe)
        for (const auto& m : all_modalities()) {
          auto it = by_modality.find(to_string(m));
          if (it != by_modality.end())
            os << rec.trial << "," << geo << "," << it->first << ","
               << format_double(it->second) << "\n";
        }
  }

  {
    json j;
    j["cohort"] = report.cohort_name;
    j["seed"] = report.seed;
    j["flavor"] = report.flavor;
    j["loss"] = report.loss;
    j["trials"] = report.trials;
    json stats = json::object();
    for (const auto& [name, s] : report.stats) {
      stats[name] = {{"mean", s.mean},
                     {"ci95_half_width", s.ci_half_width},
                     {"trial_means", s.trial_means},
                     {"degenerate_ci", s.degenerate_ci},
                     {"excluded_runs", s.excluded_runs}};
    }
    j["modalities"] = stats;
    json trials = json::array();
    for (const auto& rec : report.trial_records) {
      json jt;
      jt["trial"] = rec.trial;
      jt["holdout"] = rec.holdout_ids;
      jt["training"] = rec.training_ids;
      jt["divergence_count"] = rec.divergence_count;
      json mpe = json::object();
      for (const auto& [geo, by_modality] : rec.mpe) mpe[geo] = by_modality;
      jt["mpe"] = mpe;
      trials.push_back(jt);
    }
    j["trials_detail"] = trials;
    std::ofstream os(out_dir / "report_summary.json");
    if (!os) throw ValidationError("cannot write report_summary.json");
    os << j.dump(2) << "\n";
  }

  {
    std::ofstream os(out_dir / "report_chart.svg");
    if (!os) throw ValidationError("cannot write report_chart.svg");
    os << svg_bar_chart(report);
  }
}

} // namespace zerod
