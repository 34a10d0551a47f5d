#pragma once

#include <zerod/features.hpp>
#include <zerod/mlp.hpp>

namespace zerod {

// The six parameter networks (four in RI mode, where no quadratic resistor is
// predicted), keyed by element class and target kind.
struct ModelSet {
  std::map<std::pair<ElementClass, TargetKind>, TrainedPredictor> predictors;

  const TrainedPredictor& at(ElementClass c, TargetKind t) const;
  bool has(ElementClass c, TargetKind t) const;

  void save(const std::filesystem::path& dir) const; // one JSON file per network
  static ModelSet load(const std::filesystem::path& dir, ModelFlavor flavor);
};

std::string predictor_filename(ElementClass c, TargetKind t);

// De-standardized network predictions per element. Connectors stay frozen at
// zero, as do bifurcation outlets feeding connectors; the RI flavor forces
// every predicted R_quad to exactly zero.
std::map<std::string, ElementParameters> predict_parameters(
    const ModelSet& models, const Discretization& disc,
    const std::map<std::string, FeatureVector>& features, ModelFlavor flavor);

} // namespace zerod
