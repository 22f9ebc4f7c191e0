#include "bfa/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>

#include "bfa/error.hpp"
#include "bfa/rng.hpp"

namespace bfa {

std::string to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw InvalidConfig("unknown activation '" + name + "'");
}

void Architecture::validate() const {
  if (input_dim < 1) throw InvalidConfig("input_dim must be >= 1");
  if (num_classes < 2) throw InvalidConfig("num_classes must be >= 2");
  for (std::size_t h : hidden_dims)
    if (h < 1) throw InvalidConfig("hidden layer widths must be >= 1");
}

void ModelParams::validate() const {
  arch.validate();
  if (layers.size() != arch.num_layers())
    throw ShapeError("expected " + std::to_string(arch.num_layers()) + " layers, found " +
                         std::to_string(layers.size()),
                     layers.size());
  std::size_t in = arch.input_dim;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::size_t out = l + 1 < layers.size() ? arch.hidden_dims[l] : arch.num_classes;
    const Layer& layer = layers[l];
    if (static_cast<std::size_t>(layer.weight.rows()) != out ||
        static_cast<std::size_t>(layer.weight.cols()) != in)
      throw ShapeError("weight is " + std::to_string(layer.weight.rows()) + "x" +
                           std::to_string(layer.weight.cols()) + ", expected " +
                           std::to_string(out) + "x" + std::to_string(in),
                       l);
    if (static_cast<std::size_t>(layer.bias.size()) != out)
      throw ShapeError("bias has length " + std::to_string(layer.bias.size()) + ", expected " +
                           std::to_string(out),
                       l);
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
      throw ShapeError("non-finite parameter", l);
    in = out;
  }
}

namespace {

bool same_bits(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::equal(a.data(), a.data() + a.size(), b.data(), [](double u, double v) {
    return std::bit_cast<std::uint64_t>(u) == std::bit_cast<std::uint64_t>(v);
  });
}

void check_input(const ModelParams& model, const Vec& x) {
  if (static_cast<std::size_t>(x.size()) != model.arch.input_dim)
    throw InvalidInput("input has dimension " + std::to_string(x.size()) + ", model expects " +
                       std::to_string(model.arch.input_dim));
  if (!x.allFinite()) throw InvalidInput("input has non-finite entries");
}

void check_label(const ModelParams& model, std::size_t y) {
  if (y >= model.arch.num_classes)
    throw InvalidInput("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(model.arch.num_classes) + ")");
}

template <typename Derived>
void activate(Eigen::MatrixBase<Derived>& z, Activation a) {
  if (a == Activation::kRelu)
    z = z.cwiseMax(0.0);
  else
    z = z.array().tanh().matrix();
}

// Derivative of the activation evaluated from the pre-activation z,
// multiplied into delta in place. relu'(0) = 0.
template <typename D1, typename D2>
void backprop_activation(Eigen::MatrixBase<D1>& delta, const Eigen::MatrixBase<D2>& z, Activation a) {
  if (a == Activation::kRelu) {
    delta = (z.array() > 0.0).select(delta, 0.0);
  } else {
    auto t = z.array().tanh();
    delta = (delta.array() * (1.0 - t * t)).matrix();
  }
}

}  // namespace

bool bitwise_equal(const ModelParams& a, const ModelParams& b) {
  if (!(a.arch == b.arch) || a.train_seed != b.train_seed || a.layers.size() != b.layers.size())
    return false;
  if (a.train_meta.dataset != b.train_meta.dataset || a.train_meta.epochs != b.train_meta.epochs ||
      std::bit_cast<std::uint64_t>(a.train_meta.train_accuracy) !=
          std::bit_cast<std::uint64_t>(b.train_meta.train_accuracy))
    return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    if (!same_bits(a.layers[l].weight, b.layers[l].weight) ||
        !same_bits(a.layers[l].bias, b.layers[l].bias))
      return false;
  return true;
}

ModelParams initialize(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  ModelParams model;
  model.arch = arch;
  model.train_seed = seed;
  Engine engine(mix64(seed));
  std::size_t in = arch.input_dim;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    std::size_t out = l < arch.hidden_dims.size() ? arch.hidden_dims[l] : arch.num_classes;
    double limit = std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> uni(-limit, limit);
    Layer layer{Mat(out, in), Vec::Zero(out)};
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = uni(engine);
    model.layers.push_back(std::move(layer));
    in = out;
  }
  return model;
}

ModelParams make_linear(const Mat& weight, const Vec& bias) {
  ModelParams model;
  model.arch.input_dim = weight.cols();
  model.arch.num_classes = weight.rows();
  model.layers.push_back({weight, bias});
  model.validate();
  return model;
}

Vec forward(const ModelParams& model, const Vec& x) {
  check_input(model, x);
  Vec h = x;
  const std::size_t last = model.layers.size() - 1;
  for (std::size_t l = 0; l < last; ++l) {
    Vec z = model.layers[l].weight * h + model.layers[l].bias;
    activate(z, model.arch.activation);
    h = std::move(z);
  }
  return model.layers[last].weight * h + model.layers[last].bias;
}

std::size_t argmax(const Vec& logits) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = static_cast<std::size_t>(i);
  return best;
}

std::size_t predict(const ModelParams& model, const Vec& x) { return argmax(forward(model, x)); }

double cross_entropy(const Vec& logits, std::size_t y) {
  if (y >= static_cast<std::size_t>(logits.size())) throw InvalidInput("label out of range");
  const double m = logits.maxCoeff();
  return std::max(0.0, std::log((logits.array() - m).exp().sum()) + (m - logits[y]));
}

double loss(const ModelParams& model, const Vec& x, std::size_t y) {
  check_label(model, y);
  return cross_entropy(forward(model, x), y);
}

LossGradient loss_and_gradient(const ModelParams& model, const Vec& x, std::size_t y) {
  check_input(model, x);
  check_label(model, y);
  const std::size_t n = model.layers.size();
  std::vector<Vec> pre(n - 1);
  Vec h = x;
  for (std::size_t l = 0; l + 1 < n; ++l) {
    pre[l] = model.layers[l].weight * h + model.layers[l].bias;
    h = pre[l];
    activate(h, model.arch.activation);
  }
  const Vec logits = model.layers[n - 1].weight * h + model.layers[n - 1].bias;

  const double m = logits.maxCoeff();
  Vec p = (logits.array() - m).exp().matrix();
  const double z = p.sum();
  p /= z;

  LossGradient out;
  out.loss = std::max(0.0, std::log(z) + (m - logits[static_cast<Eigen::Index>(y)]));
  out.predicted = argmax(logits);

  Vec delta = p;
  delta[static_cast<Eigen::Index>(y)] -= 1.0;
  for (std::size_t l = n; l-- > 0;) {
    Vec back = model.layers[l].weight.transpose() * delta;
    if (l > 0) backprop_activation(back, pre[l - 1], model.arch.activation);
    delta = std::move(back);
  }
  out.gradient = std::move(delta);
  return out;
}

Vec input_gradient(const ModelParams& model, const Vec& x, std::size_t y) {
  return loss_and_gradient(model, x, y).gradient;
}

double accuracy(const ModelParams& model, const std::vector<LabeledPoint>& data) {
  if (data.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& p : data) hit += predict(model, p.x) == p.y;
  return static_cast<double>(hit) / static_cast<double>(data.size());
}

ModelParams train(const Architecture& arch, const std::vector<LabeledPoint>& data,
                  const TrainHyper& hyper, std::uint64_t seed, const std::string& dataset_name) {
  arch.validate();
  if (data.empty()) throw InvalidConfig("training data is empty");
  if (hyper.epochs < 1 || hyper.batch_size < 1 || !(hyper.learning_rate > 0.0) ||
      hyper.momentum < 0.0 || hyper.momentum >= 1.0 || hyper.noise_augment_sigma < 0.0)
    throw InvalidConfig("invalid training hyperparameters");
  std::set<std::size_t> classes;
  for (const auto& p : data) {
    if (static_cast<std::size_t>(p.x.size()) != arch.input_dim)
      throw InvalidConfig("training point dimension does not match architecture");
    if (p.y >= arch.num_classes) throw InvalidConfig("training label out of range");
    classes.insert(p.y);
  }
  if (classes.size() < 2) throw InvalidConfig("training data covers a single class");

  ModelParams model = initialize(arch, seed);
  const std::size_t n_layers = model.layers.size();
  std::vector<Layer> velocity;
  for (const auto& layer : model.layers)
    velocity.push_back({Mat::Zero(layer.weight.rows(), layer.weight.cols()),
                        Vec::Zero(layer.bias.size())});

  Engine engine(derive_key(seed, {0x7472616EULL}));
  std::normal_distribution<double> noise(0.0, hyper.noise_augment_sigma > 0.0 ? hyper.noise_augment_sigma : 1.0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  const Eigen::Index d = static_cast<Eigen::Index>(arch.input_dim);
  const Eigen::Index k = static_cast<Eigen::Index>(arch.num_classes);
  std::vector<Mat> pre(n_layers), act(n_layers);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), engine);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch_size);
      const Eigen::Index b = static_cast<Eigen::Index>(stop - start);
      Mat batch(d, b);
      Mat target = Mat::Zero(k, b);
      for (Eigen::Index j = 0; j < b; ++j) {
        const LabeledPoint& p = data[order[start + j]];
        batch.col(j) = p.x;
        if (hyper.noise_augment_sigma > 0.0)
          for (Eigen::Index i = 0; i < d; ++i) batch(i, j) += noise(engine);
        target(static_cast<Eigen::Index>(p.y), j) = 1.0;
      }

      const Mat* h = &batch;
      for (std::size_t l = 0; l < n_layers; ++l) {
        pre[l] = model.layers[l].weight * *h;
        pre[l].colwise() += model.layers[l].bias;
        if (l + 1 < n_layers) {
          act[l] = pre[l];
          activate(act[l], arch.activation);
          h = &act[l];
        }
      }
      Mat& logits = pre[n_layers - 1];
      Mat delta(k, b);
      for (Eigen::Index j = 0; j < b; ++j) {
        const double m = logits.col(j).maxCoeff();
        Vec e = (logits.col(j).array() - m).exp().matrix();
        delta.col(j) = e / e.sum();
      }
      delta = (delta - target) / static_cast<double>(b);

      for (std::size_t l = n_layers; l-- > 0;) {
        const Mat& input = l == 0 ? batch : act[l - 1];
        Mat grad_w = delta * input.transpose();
        Vec grad_b = delta.rowwise().sum();
        if (l > 0) {
          Mat back = model.layers[l].weight.transpose() * delta;
          backprop_activation(back, pre[l - 1], arch.activation);
          delta = std::move(back);
        }
        velocity[l].weight = hyper.momentum * velocity[l].weight + grad_w;
        velocity[l].bias = hyper.momentum * velocity[l].bias + grad_b;
        model.layers[l].weight -= hyper.learning_rate * velocity[l].weight;
        model.layers[l].bias -= hyper.learning_rate * velocity[l].bias;
      }
    }
  }
  if (!std::all_of(model.layers.begin(), model.layers.end(), [](const Layer& l) {
        return l.weight.allFinite() && l.bias.allFinite();
      }))
    throw InvalidConfig("training diverged (non-finite weights); lower the learning rate");

  model.train_meta = {dataset_name, hyper.epochs, accuracy(model, data)};
  return model;
}

}  // namespace bfa
