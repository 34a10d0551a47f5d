#include <zerod/prediction.hpp>

namespace zerod {

const TrainedPredictor& ModelSet::at(ElementClass c, TargetKind t) const {
  auto it = predictors.find({c, t});
  if (it == predictors.end())
    throw ValidationError("missing model for " + to_string(c) + " " + to_string(t));
  return it->second;
}

bool ModelSet::has(ElementClass c, TargetKind t) const {
  return predictors.find({c, t}) != predictors.end();
}

std::string predictor_filename(ElementClass c, TargetKind t) {
  return "net_" + to_string(c) + "_" + to_string(t) + ".json";
}

void ModelSet::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [key, p] : predictors)
    write_predictor(p, dir / predictor_filename(key.first, key.second));
}

ModelSet ModelSet::load(const std::filesystem::path& dir, ModelFlavor flavor) {
  ModelSet set;
  for (ElementClass c : {ElementClass::Vessel, ElementClass::Junction})
    for (TargetKind t : {TargetKind::RLin, TargetKind::RQuad, TargetKind::Inductance}) {
      if (flavor == ModelFlavor::RI && t == TargetKind::RQuad) continue;
      const auto file = dir / predictor_filename(c, t);
      if (!std::filesystem::exists(file))
        throw ValidationError("missing model file: " + file.string());
      set.predictors[{c, t}] = read_predictor(file);
    }
  return set;
}

std::map<std::string, ElementParameters> predict_parameters(
    const ModelSet& models, const Discretization& disc,
    const std::map<std::string, FeatureVector>& features, ModelFlavor flavor) {
  std::map<std::string, ElementParameters> out;

  auto predict_element = [&](ElementClass cls, const std::string& id) {
    auto fit = features.find(id);
    if (fit == features.end())
      throw ValidationError("predict_parameters: features missing element " + id);
    const auto vals = fit->second.values(cls == ElementClass::Junction);
    const Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(
        vals.data(), static_cast<Eigen::Index>(vals.size()));
    ElementParameters p;
    p.R_lin = models.at(cls, TargetKind::RLin).predict(g);
    p.R_quad = flavor == ModelFlavor::RRI ? models.at(cls, TargetKind::RQuad).predict(g) : 0.0;
    p.L = models.at(cls, TargetKind::Inductance).predict(g);
    return p;
  };

  for (const auto& v : disc.vessels) out[v.id] = predict_element(ElementClass::Vessel, v.id);
  for (const auto& j : disc.junctions)
    for (size_t k = 0; k < j.outlets.size(); ++k) {
      const std::string id = junction_pair_id(j, k);
      if (j.outlets[k].feeds_connector) {
        // No geometry behind an artificial connector: keep the constant-pressure
        // form with the quadratic and inductive terms pinned at zero.
        ElementParameters p;
        p.frozen_R_quad = true;
        p.frozen_L = true;
        out[id] = p;
        continue;
      }
      out[id] = predict_element(ElementClass::Junction, id);
    }
  for (const auto& c : disc.connectors) out[c.id] = ElementParameters::frozen_zero();
  return out;
}

} // namespace zerod
