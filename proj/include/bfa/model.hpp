#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace bfa {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Activation { kRelu, kTanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;  // empty: a single affine layer
  std::size_t num_classes = 0;
  Activation activation = Activation::kRelu;

  // Throws InvalidConfig.
  void validate() const;
  std::size_t num_layers() const { return hidden_dims.size() + 1; }
  bool operator==(const Architecture&) const = default;
};

struct Layer {
  Mat weight;  // out x in
  Vec bias;    // out
};

struct TrainMeta {
  std::string dataset;
  int epochs = 0;
  double train_accuracy = 0.0;
  bool operator==(const TrainMeta&) const = default;
};

// Parameters of a trained classifier. Immutable once built; every
// inference function below is const and safe to call concurrently.
struct ModelParams {
  Architecture arch;
  std::vector<Layer> layers;
  std::uint64_t train_seed = 0;
  TrainMeta train_meta;

  // Checks shape chaining and finiteness. Throws ShapeError / InvalidInput.
  void validate() const;
};

bool bitwise_equal(const ModelParams& a, const ModelParams& b);

struct LabeledPoint {
  Vec x;
  std::size_t y = 0;
};

// He-style uniform init from the seed, zero biases.
ModelParams initialize(const Architecture& arch, std::uint64_t seed);

// Single affine layer: logits = weight * x + bias.
ModelParams make_linear(const Mat& weight, const Vec& bias);

Vec forward(const ModelParams& model, const Vec& x);

// Lowest index wins ties.
std::size_t argmax(const Vec& logits);
std::size_t predict(const ModelParams& model, const Vec& x);

// Softmax cross-entropy, log-sum-exp stabilized.
double cross_entropy(const Vec& logits, std::size_t y);
double loss(const ModelParams& model, const Vec& x, std::size_t y);

struct LossGradient {
  double loss = 0.0;
  std::size_t predicted = 0;
  Vec gradient;  // d loss / d x
};

// Reverse-mode input gradient. The forward pass is shared with the loss.
LossGradient loss_and_gradient(const ModelParams& model, const Vec& x, std::size_t y);
Vec input_gradient(const ModelParams& model, const Vec& x, std::size_t y);

struct TrainHyper {
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double noise_augment_sigma = 0.0;  // > 0: train on Gaussian-perturbed copies
};

// Minibatch SGD with momentum. Deterministic given seed.
ModelParams train(const Architecture& arch, const std::vector<LabeledPoint>& data,
                  const TrainHyper& hyper, std::uint64_t seed,
                  const std::string& dataset_name = "");

double accuracy(const ModelParams& model, const std::vector<LabeledPoint>& data);

// JSON model file with hex-float weights.
std::string serialize_model(const ModelParams& model);
ModelParams parse_model(const std::string& text);
void save_model(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace bfa
