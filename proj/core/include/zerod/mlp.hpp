#pragma once

#include <zerod/types.hpp>

#include <Eigen/Dense>

#include <filesystem>

namespace zerod {

enum class TargetKind { RLin, RQuad, Inductance };
enum class ElementClass { Vessel, Junction };

std::string to_string(TargetKind t);
std::string to_string(ElementClass c);
TargetKind target_kind_from_string(const std::string& s);
ElementClass element_class_from_string(const std::string& s);

// Hidden widths per network: the junction inductor uses 4 layers of 20,
// everything else 2 layers of 10.
std::vector<int> default_hidden_layers(ElementClass c, TargetKind t);

// Scalar-output ReLU multilayer perceptron:
//   y_0 = ReLU(W_0 g + b_0), y_i = ReLU(W_i y_{i-1} + b_i), out = W_n y_{n-1} + b_n
struct MLPModel {
  ElementClass element_class = ElementClass::Vessel;
  TargetKind target = TargetKind::RLin;
  int input_dim = 0;
  std::vector<Eigen::MatrixXd> weights; // weights[i]: rows = layer width
  std::vector<Eigen::VectorXd> biases;

  int layer_count() const { return static_cast<int>(weights.size()); }
};

// He-style fan-in scaled uniform weights, zero biases, from the seeded
// generator.
MLPModel initialize_model(ElementClass element_class, TargetKind target, int input_dim,
                          const std::vector<int>& hidden_layers, unsigned long long seed);

double forward(const MLPModel& model, const Eigen::VectorXd& features);
Eigen::VectorXd forward_batch(const MLPModel& model, const Eigen::MatrixXd& X); // rows = samples

enum class LossKind { MSE, ProximityWeighted };

// MSE: mean (pred - true)^2. Proximity-weighted: mean of 2^-gamma (pred - true)^2,
// up-weighting elements close to the vasculature inlet.
double loss_value(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets,
                  const std::vector<int>& gammas, LossKind kind);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 5000;
  int batch_size = 0; // 0: full batch
  unsigned long long seed = 0;
  LossKind loss = LossKind::MSE;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
  }
};

struct TrainOutcome {
  MLPModel model;
  std::vector<double> epoch_loss; // full-dataset loss per epoch
};

// Adam over mini-batches with reverse-mode gradients through the recurrence.
// Fully reproducible for a given seed (initialization and batch order).
// Throws DivergenceError naming the epoch if the loss goes non-finite.
TrainOutcome train(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const std::vector<int>& gammas, ElementClass element_class,
                   TargetKind target, const std::vector<int>& hidden_layers,
                   const TrainConfig& cfg);

// Loss gradient with respect to every weight and bias, flattened in layer order.
Eigen::VectorXd loss_gradient(const MLPModel& model, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y, const std::vector<int>& gammas,
                              LossKind kind);

// Max relative error between the analytic gradient and central finite
// differences over every weight and bias.
double gradient_check(const MLPModel& model, const Eigen::MatrixXd& X,
                      const Eigen::VectorXd& y, const std::vector<int>& gammas,
                      LossKind kind, double step = 1e-6);

// Z-score standardization fitted on the training split only.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std; // clamped >= 1e-12

  static Standardizer fit(const Eigen::MatrixXd& X);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd apply_row(const Eigen::VectorXd& x) const;
  Eigen::VectorXd invert_row(const Eigen::VectorXd& z) const;
};

// A trained network bundled with its feature and target standardizers.
struct TrainedPredictor {
  MLPModel model;
  Standardizer feature_standardizer;
  double target_mean = 0.0;
  double target_std = 1.0;
  TrainConfig config;

  double predict(const Eigen::VectorXd& raw_features) const;
};

std::string predictor_to_json(const TrainedPredictor& p);
TrainedPredictor predictor_from_json(const std::string& text);
void write_predictor(const TrainedPredictor& p, const std::filesystem::path& file);
TrainedPredictor read_predictor(const std::filesystem::path& file);

} // namespace zerod
