#include <zerod/mlp.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace zerod {

using nlohmann::json;

std::string to_string(TargetKind t) {
  switch (t) {
    case TargetKind::RLin: return "R_lin";
    case TargetKind::RQuad: return "R_quad";
    case TargetKind::Inductance: return "L";
  }
  return "?";
}

std::string to_string(ElementClass c) {
  return c == ElementClass::Vessel ? "vessel" : "junction";
}

TargetKind target_kind_from_string(const std::string& s) {
  if (s == "R_lin") return TargetKind::RLin;
  if (s == "R_quad") return TargetKind::RQuad;
  if (s == "L") return TargetKind::Inductance;
  throw ValidationError("unknown target kind: " + s);
}

ElementClass element_class_from_string(const std::string& s) {
  if (s == "vessel") return ElementClass::Vessel;
  if (s == "junction") return ElementClass::Junction;
  throw ValidationError("unknown element class: " + s);
}

std::vector<int> default_hidden_layers(ElementClass c, TargetKind t) {
  if (c == ElementClass::Junction && t == TargetKind::Inductance)
    return {20, 20, 20, 20};
  return {10, 10};
}

double forward(const MLPModel& model, const Eigen::VectorXd& features) {
  if (features.size() != model.input_dim)
    throw ValidationError("feature dimension mismatch: expected " +
                          std::to_string(model.input_dim) + ", got " +
                          std::to_string(features.size()));
  Eigen::VectorXd a = features;
  const int n = model.layer_count();
  for (int i = 0; i < n; ++i) {
    a = (model.weights[i] * a + model.biases[i]).eval();
    if (i + 1 < n) a = a.cwiseMax(0.0);
  }
  return a[0];
}

Eigen::VectorXd forward_batch(const MLPModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.input_dim)
    throw ValidationError("feature dimension mismatch in batch forward");
  Eigen::MatrixXd a = X.transpose(); // features x samples
  const int n = model.layer_count();
  for (int i = 0; i < n; ++i) {
    a = ((model.weights[i] * a).colwise() + model.biases[i]).eval();
    if (i + 1 < n) a = a.cwiseMax(0.0);
  }
  return a.row(0).transpose();
}

namespace {

Eigen::VectorXd sample_weights(const std::vector<int>& gammas, Eigen::Index n, LossKind kind) {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (kind == LossKind::ProximityWeighted) {
    if (static_cast<Eigen::Index>(gammas.size()) != n)
      throw ValidationError("gamma count does not match batch size");
    for (Eigen::Index i = 0; i < n; ++i)
      w[i] = std::pow(0.5, static_cast<double>(gammas[i]));
  }
  return w;
}

} // namespace

double loss_value(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets,
                  const std::vector<int>& gammas, LossKind kind) {
  if (predictions.size() != targets.size())
    throw ValidationError("loss: prediction/target size mismatch");
  if (predictions.size() == 0) throw ValidationError("loss of an empty batch");
  const Eigen::VectorXd w = sample_weights(gammas, predictions.size(), kind);
  const Eigen::VectorXd err = predictions - targets;
  return (w.array() * err.array().square()).mean();
}

namespace {

struct ForwardCache {
  std::vector<Eigen::MatrixXd> pre;  // pre-activation per layer (width x samples)
  std::vector<Eigen::MatrixXd> post; // post-activation inputs per layer
};

Eigen::VectorXd forward_with_cache(const MLPModel& model, const Eigen::MatrixXd& X,
                                   ForwardCache& cache) {
  const int n = model.layer_count();
  cache.pre.resize(n);
  cache.post.resize(n);
  Eigen::MatrixXd a = X.transpose();
  for (int i = 0; i < n; ++i) {
    cache.post[i] = a;
    cache.pre[i] = (model.weights[i] * a).colwise() + model.biases[i];
    a = i + 1 < n ? cache.pre[i].cwiseMax(0.0) : cache.pre[i];
  }
  return a.row(0).transpose();
}

struct Gradients {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
};

// Reverse-mode differentiation of the (possibly proximity-weighted) quadratic
// loss through the ReLU recurrence.
Gradients backward(const MLPModel& model, const ForwardCache& cache,
                   const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets,
                   const Eigen::VectorXd& weights) {
  const int n = model.layer_count();
  const Eigen::Index m = predictions.size();
  Gradients g;
  g.dW.resize(n);
  g.db.resize(n);

  // dL/dpred_k = 2 w_k (pred_k - y_k) / m
  Eigen::MatrixXd delta(1, m);
  delta.row(0) =
      (2.0 / static_cast<double>(m)) * (weights.array() * (predictions - targets).array());

  for (int i = n - 1; i >= 0; --i) {
    g.dW[i] = delta * cache.post[i].transpose();
    g.db[i] = delta.rowwise().sum();
    if (i > 0) {
      Eigen::MatrixXd up = model.weights[i].transpose() * delta;
      delta = (cache.pre[i - 1].array() > 0.0).cast<double>() * up.array();
    }
  }
  return g;
}

size_t parameter_count(const MLPModel& model) {
  size_t n = 0;
  for (int i = 0; i < model.layer_count(); ++i)
    n += static_cast<size_t>(model.weights[i].size()) +
         static_cast<size_t>(model.biases[i].size());
  return n;
}

Eigen::VectorXd flatten(const Gradients& g) {
  size_t total = 0;
  for (size_t i = 0; i < g.dW.size(); ++i)
    total += static_cast<size_t>(g.dW[i].size()) + static_cast<size_t>(g.db[i].size());
  Eigen::VectorXd out(total);
  Eigen::Index at = 0;
  for (size_t i = 0; i < g.dW.size(); ++i) {
    for (Eigen::Index c = 0; c < g.dW[i].cols(); ++c)
      for (Eigen::Index r = 0; r < g.dW[i].rows(); ++r) out[at++] = g.dW[i](r, c);
    for (Eigen::Index r = 0; r < g.db[i].size(); ++r) out[at++] = g.db[i][r];
  }
  return out;
}

double* parameter_at(MLPModel& model, size_t flat_index) {
  size_t at = flat_index;
  for (int i = 0; i < model.layer_count(); ++i) {
    const size_t nw = static_cast<size_t>(model.weights[i].size());
    if (at < nw) return model.weights[i].data() + at;
    at -= nw;
    const size_t nb = static_cast<size_t>(model.biases[i].size());
    if (at < nb) return model.biases[i].data() + at;
    at -= nb;
  }
  throw ValidationError("parameter index out of range");
}

} // namespace

Eigen::VectorXd loss_gradient(const MLPModel& model, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y, const std::vector<int>& gammas,
                              LossKind kind) {
  if (X.rows() == 0) throw ValidationError("gradient of an empty batch");
  ForwardCache cache;
  Eigen::VectorXd pred = forward_with_cache(model, X, cache);
  const Eigen::VectorXd w = sample_weights(gammas, pred.size(), kind);
  return flatten(backward(model, cache, pred, y, w));
}

double gradient_check(const MLPModel& model, const Eigen::MatrixXd& X,
                      const Eigen::VectorXd& y, const std::vector<int>& gammas,
                      LossKind kind, double step) {
  const Eigen::VectorXd analytic = loss_gradient(model, X, y, gammas, kind);
  MLPModel probe = model;
  double worst = 0.0;
  for (size_t k = 0; k < parameter_count(model); ++k) {
    double* p = parameter_at(probe, k);
    const double saved = *p;
    *p = saved + step;
    const double lp = loss_value(forward_batch(probe, X), y, gammas, kind);
    *p = saved - step;
    const double lm = loss_value(forward_batch(probe, X), y, gammas, kind);
    *p = saved;
    const double fd = (lp - lm) / (2.0 * step);
    const double a = analytic[static_cast<Eigen::Index>(k)];
    const double denom = std::max({std::abs(a), std::abs(fd), 1.0});
    worst = std::max(worst, std::abs(fd - a) / denom);
  }
  return worst;
}

MLPModel initialize_model(ElementClass element_class, TargetKind target, int input_dim,
                          const std::vector<int>& hidden_layers, unsigned long long seed) {
  if (hidden_layers.empty()) throw ValidationError("at least one hidden layer required");
  MLPModel model;
  model.element_class = element_class;
  model.target = target;
  model.input_dim = input_dim;
  std::mt19937_64 rng(seed);
  auto init_layer = [&](int rows, int cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = dist(rng);
    model.weights.push_back(std::move(w));
    model.biases.push_back(Eigen::VectorXd::Zero(rows));
  };
  int in_dim = input_dim;
  for (int width : hidden_layers) {
    init_layer(width, in_dim);
    in_dim = width;
  }
  init_layer(1, in_dim);
  return model;
}

TrainOutcome train(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const std::vector<int>& gammas, ElementClass element_class,
                   TargetKind target, const std::vector<int>& hidden_layers,
                   const TrainConfig& cfg) {
  cfg.validate();
  if (X.rows() < 1) throw ValidationError("training needs at least one sample");
  if (X.rows() != y.size()) throw ValidationError("training sample/target size mismatch");

  MLPModel model = initialize_model(element_class, target, static_cast<int>(X.cols()),
                                    hidden_layers, cfg.seed);
  std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ULL); // batch-order stream

  const int n_layers = model.layer_count();
  std::vector<Eigen::MatrixXd> mW(n_layers), vW(n_layers);
  std::vector<Eigen::VectorXd> mb(n_layers), vb(n_layers);
  for (int i = 0; i < n_layers; ++i) {
    mW[i] = Eigen::MatrixXd::Zero(model.weights[i].rows(), model.weights[i].cols());
    vW[i] = mW[i];
    mb[i] = Eigen::VectorXd::Zero(model.biases[i].size());
    vb[i] = mb[i];
  }

  const Eigen::Index m = X.rows();
  const int batch = cfg.batch_size <= 0 ? static_cast<int>(m)
                                        : std::min<int>(cfg.batch_size, static_cast<int>(m));
  std::vector<int> index(m);
  std::iota(index.begin(), index.end(), 0);

  TrainOutcome out;
  out.epoch_loss.reserve(cfg.epochs);
  long long adam_t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch < m) std::shuffle(index.begin(), index.end(), rng);
    for (Eigen::Index start = 0; start < m; start += batch) {
      const Eigen::Index count = std::min<Eigen::Index>(batch, m - start);
      Eigen::MatrixXd Xb(count, X.cols());
      Eigen::VectorXd yb(count);
      std::vector<int> gb(count);
      for (Eigen::Index i = 0; i < count; ++i) {
        const int src = index[start + i];
        Xb.row(i) = X.row(src);
        yb[i] = y[src];
        gb[i] = gammas.empty() ? 0 : gammas[src];
      }
      ForwardCache cache;
      Eigen::VectorXd pred = forward_with_cache(model, Xb, cache);
      const Eigen::VectorXd w = sample_weights(gb, pred.size(), cfg.loss);
      Gradients g = backward(model, cache, pred, yb, w);

      ++adam_t;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_t));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_t));
      for (int i = 0; i < n_layers; ++i) {
        mW[i] = cfg.beta1 * mW[i] + (1.0 - cfg.beta1) * g.dW[i];
        vW[i] = cfg.beta2 * vW[i].array().matrix() +
                (1.0 - cfg.beta2) * g.dW[i].array().square().matrix();
        model.weights[i].array() -=
            cfg.learning_rate * (mW[i].array() / bc1) /
            ((vW[i].array() / bc2).sqrt() + cfg.epsilon);
        mb[i] = cfg.beta1 * mb[i] + (1.0 - cfg.beta1) * g.db[i];
        vb[i] = cfg.beta2 * vb[i].array().matrix() +
                (1.0 - cfg.beta2) * g.db[i].array().square().matrix();
        model.biases[i].array() -= cfg.learning_rate * (mb[i].array() / bc1) /
                                   ((vb[i].array() / bc2).sqrt() + cfg.epsilon);
      }
    }
    const double epoch_loss = loss_value(forward_batch(model, X), y, gammas, cfg.loss);
    if (!std::isfinite(epoch_loss))
      throw DivergenceError("training loss diverged at epoch " + std::to_string(epoch));
    out.epoch_loss.push_back(epoch_loss);
  }
  out.model = std::move(model);
  return out;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& X) {
  if (X.rows() < 1) throw ValidationError("standardizer needs at least one row");
  Standardizer s;
  s.mean = X.colwise().mean();
  Eigen::MatrixXd centered = X.rowwise() - s.mean.transpose();
  s.std = (centered.array().square().colwise().mean()).sqrt();
  s.std = s.std.cwiseMax(1e-12);
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& X) const {
  return (X.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

Eigen::VectorXd Standardizer::apply_row(const Eigen::VectorXd& x) const {
  return (x - mean).cwiseQuotient(std);
}

Eigen::VectorXd Standardizer::invert_row(const Eigen::VectorXd& z) const {
  return z.cwiseProduct(std) + mean;
}

double TrainedPredictor::predict(const Eigen::VectorXd& raw_features) const {
  const double z = forward(model, feature_standardizer.apply_row(raw_features));
  return z * target_std + target_mean;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}}; // row-major
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ValidationError("model weight matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  size_t at = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[at++];
  return m;
}

} // namespace

std::string predictor_to_json(const TrainedPredictor& p) {
  json j;
  j["element_class"] = to_string(p.model.element_class);
  j["target"] = to_string(p.model.target);
  j["input_dim"] = p.model.input_dim;
  json layers = json::array();
  for (int i = 0; i < p.model.layer_count(); ++i)
    layers.push_back({{"weights", matrix_to_json(p.model.weights[i])},
                      {"biases", std::vector<double>(p.model.biases[i].begin(),
                                                     p.model.biases[i].end())}});
  j["layers"] = layers;
  j["feature_standardizer"] = {
      {"mean", std::vector<double>(p.feature_standardizer.mean.begin(),
                                   p.feature_standardizer.mean.end())},
      {"std", std::vector<double>(p.feature_standardizer.std.begin(),
                                  p.feature_standardizer.std.end())}};
  j["target_standardizer"] = {{"mean", p.target_mean}, {"std", p.target_std}};
  j["training"] = {{"seed", p.config.seed},
                   {"learning_rate", p.config.learning_rate},
                   {"beta1", p.config.beta1},
                   {"beta2", p.config.beta2},
                   {"epsilon", p.config.epsilon},
                   {"epochs", p.config.epochs},
                   {"batch_size", p.config.batch_size},
                   {"loss", p.config.loss == LossKind::MSE ? "mse" : "proximity"}};
  return j.dump(2) + "\n";
}

TrainedPredictor predictor_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model JSON parse error: ") + e.what());
  }
  TrainedPredictor p;
  try {
    p.model.element_class = element_class_from_string(j.at("element_class").get<std::string>());
    p.model.target = target_kind_from_string(j.at("target").get<std::string>());
    p.model.input_dim = j.at("input_dim").get<int>();
    for (const auto& jl : j.at("layers")) {
      p.model.weights.push_back(matrix_from_json(jl.at("weights")));
      const auto b = jl.at("biases").get<std::vector<double>>();
      p.model.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), b.size()));
    }
    const auto& fs = j.at("feature_standardizer");
    const auto mean = fs.at("mean").get<std::vector<double>>();
    const auto stdv = fs.at("std").get<std::vector<double>>();
    p.feature_standardizer.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
    p.feature_standardizer.std = Eigen::Map<const Eigen::VectorXd>(stdv.data(), stdv.size());
    p.target_mean = j.at("target_standardizer").at("mean").get<double>();
    p.target_std = j.at("target_standardizer").at("std").get<double>();
    const auto& tr = j.at("training");
    p.config.seed = tr.at("seed").get<unsigned long long>();
    p.config.learning_rate = tr.at("learning_rate").get<double>();
    p.config.beta1 = tr.at("beta1").get<double>();
    p.config.beta2 = tr.at("beta2").get<double>();
    p.config.epsilon = tr.at("epsilon").get<double>();
    p.config.epochs = tr.at("epochs").get<int>();
    p.config.batch_size = tr.at("batch_size").get<int>();
    p.config.loss =
        tr.at("loss").get<std::string>() == "mse" ? LossKind::MSE : LossKind::ProximityWeighted;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model JSON schema error: ") + e.what());
  }
  return p;
}

void write_predictor(const TrainedPredictor& p, const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot write model file: " + file.string());
  os << predictor_to_json(p);
}

TrainedPredictor read_predictor(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ValidationError("cannot open model file: " + file.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return predictor_from_json(ss.str());
}

} // namespace zerod
