#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bfa/error.hpp"
#include "bfa/model.hpp"

namespace bfa {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hexfloat(const json& j, std::size_t layer) {
  if (!j.is_string()) throw ShapeError("weight entry is not a hex-float string", layer);
  const std::string& s = j.get_ref<const std::string&>();
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw ShapeError("cannot parse number '" + s + "'", layer);
  return v;
}

const json& field(const json& obj, const char* name, std::size_t doc_size) {
  if (!obj.is_object() || !obj.contains(name))
    throw ParseError(std::string("missing field '") + name + "'", doc_size);
  return obj.at(name);
}

}  // namespace

std::string serialize_model(const ModelParams& model) {
  model.validate();
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["arch"] = {{"input_dim", model.arch.input_dim},
                 {"hidden_dims", model.arch.hidden_dims},
                 {"num_classes", model.arch.num_classes},
                 {"activation", to_string(model.arch.activation)}};
  doc["train_seed"] = model.train_seed;
  doc["train_meta"] = {{"dataset", model.train_meta.dataset},
                       {"epochs", model.train_meta.epochs},
                       {"train_accuracy", hexfloat(model.train_meta.train_accuracy)}};
  json layers = json::array();
  for (const Layer& layer : model.layers) {
    json w = json::array();
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) row.push_back(hexfloat(layer.weight(r, c)));
      w.push_back(std::move(row));
    }
    json b = json::array();
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) b.push_back(hexfloat(layer.bias[i]));
    layers.push_back({{"w", std::move(w)}, {"b", std::move(b)}});
  }
  doc["layers"] = std::move(layers);
  return doc.dump(1) + "\n";
}

ModelParams parse_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed model file: ") + e.what(), e.byte);
  }
  const std::size_t n = text.size();
  try {
    if (field(doc, "format_version", n).get<int>() != kFormatVersion)
      throw ParseError("unsupported format_version", n);

    ModelParams model;
    const json& arch = field(doc, "arch", n);
    model.arch.input_dim = field(arch, "input_dim", n).get<std::size_t>();
    model.arch.hidden_dims = field(arch, "hidden_dims", n).get<std::vector<std::size_t>>();
    model.arch.num_classes = field(arch, "num_classes", n).get<std::size_t>();
    model.arch.activation = activation_from_string(field(arch, "activation", n).get<std::string>());
    model.train_seed = field(doc, "train_seed", n).get<std::uint64_t>();
    const json& meta = field(doc, "train_meta", n);
    model.train_meta.dataset = field(meta, "dataset", n).get<std::string>();
    model.train_meta.epochs = field(meta, "epochs", n).get<int>();
    model.train_meta.train_accuracy = parse_hexfloat(field(meta, "train_accuracy", n), 0);

    const json& layers = field(doc, "layers", n);
    if (!layers.is_array()) throw ParseError("'layers' is not an array", n);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const json& w = field(layers[l], "w", n);
      const json& b = field(layers[l], "b", n);
      if (!w.is_array() || !b.is_array()) throw ShapeError("w/b must be arrays", l);
      const std::size_t rows = w.size();
      const std::size_t cols = rows ? w[0].size() : 0;
      Layer layer{Mat(rows, cols), Vec(b.size())};
      for (std::size_t r = 0; r < rows; ++r) {
        if (!w[r].is_array() || w[r].size() != cols) throw ShapeError("ragged weight matrix", l);
        for (std::size_t c = 0; c < cols; ++c) layer.weight(r, c) = parse_hexfloat(w[r][c], l);
      }
      for (std::size_t i = 0; i < b.size(); ++i) layer.bias[i] = parse_hexfloat(b[i], l);
      model.layers.push_back(std::move(layer));
    }
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what(), n);
  } catch (const InvalidConfig& e) {
    throw ParseError(std::string("invalid architecture: ") + e.what(), n);
  }
}

void save_model(const ModelParams& model, const std::filesystem::path& path) {
  const std::string text = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace bfa
