#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "bfa/attack.hpp"
#include "bfa/boundary.hpp"
#include "bfa/data.hpp"
#include "bfa/error.hpp"
#include "bfa/experiment.hpp"
#include "bfa/model.hpp"

namespace py = pybind11;
using namespace bfa;

namespace {

Eigen::MatrixXd points_matrix(const std::vector<LabeledPoint>& pts) {
  if (pts.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(pts.size()), pts.front().x.size());
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].x.transpose();
  return m;
}

std::vector<std::size_t> labels(const std::vector<LabeledPoint>& pts) {
  std::vector<std::size_t> y;
  y.reserve(pts.size());
  for (const auto& p : pts) y.push_back(p.y);
  return y;
}

std::vector<LabeledPoint> to_points(const Eigen::MatrixXd& x, const std::vector<std::size_t>& y) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw InvalidInput("x and y disagree on the number of rows");
  std::vector<LabeledPoint> out;
  out.reserve(y.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.push_back({x.row(i).transpose(), y[static_cast<std::size_t>(i)]});
  return out;
}

Overrides make_overrides(std::optional<std::uint64_t> seed, std::optional<std::string> out) {
  Overrides o;
  o.seed = seed;
  o.out = std::move(out);
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Boundary-fitting transfer attacks on small classifiers";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<InvalidConfig>(m, "InvalidConfig", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<EmptyStudy>(m, "EmptyStudy", base.ptr());

  m.def("version", &tool_version);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("name", &Dataset::name)
      .def_readonly("num_classes", &Dataset::num_classes)
      .def_property_readonly("train_x", [](const Dataset& d) { return points_matrix(d.train()); })
      .def_property_readonly("train_y", [](const Dataset& d) { return labels(d.train()); })
      .def_property_readonly("test_x", [](const Dataset& d) { return points_matrix(d.test()); })
      .def_property_readonly("test_y", [](const Dataset& d) { return labels(d.test()); })
      .def("coordinate_std", [](const Dataset& d) { return coordinate_std(d); })
      .def("__len__", [](const Dataset& d) { return d.points.size(); });

  m.def("gen_blobs", &gen_blobs, py::arg("classes"), py::arg("dim"), py::arg("n_per_class"), py::arg("spread"),
        py::arg("seed"), py::arg("test_fraction") = 0.5);
  m.def("gen_moons", &gen_moons, py::arg("n_per_class"), py::arg("noise"), py::arg("seed"),
        py::arg("test_fraction") = 0.5);
  m.def("gen_rings", &gen_rings, py::arg("classes"), py::arg("n_per_class"), py::arg("noise"), py::arg("seed"),
        py::arg("test_fraction") = 0.5);

  py::class_<ModelParams>(m, "Model")
      .def_static(
          "train",
          [](const Dataset& d, const std::vector<std::size_t>& hidden, const std::string& activation,
             std::uint64_t seed, int epochs) {
            TrainHyper h;
            h.epochs = epochs;
            const Architecture arch{static_cast<std::size_t>(d.points.front().x.size()), hidden, d.num_classes,
                                    activation_from_string(activation)};
            return train(arch, d.train(), h, seed, d.name);
          },
          py::arg("dataset"), py::arg("hidden") = std::vector<std::size_t>{32, 32}, py::arg("activation") = "relu",
          py::arg("seed") = 0, py::arg("epochs") = 100)
      .def_static("linear", &make_linear, py::arg("weight"), py::arg("bias"))
      .def_static("loads", &parse_model)
      .def_static("load", [](const std::filesystem::path& p) { return load_model(p); })
      .def("dumps", [](const ModelParams& mp) { return serialize_model(mp); })
      .def("save", [](const ModelParams& mp, const std::filesystem::path& p) { save_model(mp, p); })
      .def("logits", [](const ModelParams& mp, const Vec& x) { return forward(mp, x); })
      .def("predict", [](const ModelParams& mp, const Vec& x) { return predict(mp, x); })
      .def("loss", [](const ModelParams& mp, const Vec& x, std::size_t y) { return loss(mp, x, y); })
      .def("input_gradient", [](const ModelParams& mp, const Vec& x, std::size_t y) { return input_gradient(mp, x, y); })
      .def("accuracy",
           [](const ModelParams& mp, const Eigen::MatrixXd& x, const std::vector<std::size_t>& y) {
             return accuracy(mp, to_points(x, y));
           })
      .def_property_readonly("input_dim", [](const ModelParams& mp) { return mp.arch.input_dim; })
      .def_property_readonly("num_classes", [](const ModelParams& mp) { return mp.arch.num_classes; });

  py::class_<BoundaryConfig>(m, "BoundaryConfig")
      .def(py::init([](double sigma, double gamma, int t_max, int n_points) {
             BoundaryConfig c{sigma, gamma, t_max, n_points};
             c.validate();
             return c;
           }),
           py::arg("sigma") = BoundaryConfig{}.sigma, py::arg("gamma") = BoundaryConfig{}.gamma,
           py::arg("t_max") = BoundaryConfig{}.t_max, py::arg("n_points") = BoundaryConfig{}.n_points)
      .def_readonly("sigma", &BoundaryConfig::sigma)
      .def_readonly("gamma", &BoundaryConfig::gamma)
      .def_readonly("t_max", &BoundaryConfig::t_max)
      .def_readonly("n_points", &BoundaryConfig::n_points);

  m.def(
      "averaged_boundary_gradient",
      [](const ModelParams& mp, const Vec& x, std::size_t y_attack, std::size_t source, const BoundaryConfig& cfg,
         std::uint64_t seed) {
        const auto g = averaged_boundary_gradient(mp, x, y_attack, source, cfg, RngStream(seed));
        return py::make_tuple(g.mean, g.fallback_count);
      },
      py::arg("model"), py::arg("x"), py::arg("y_attack"), py::arg("source_class"), py::arg("config"),
      py::arg("seed") = 0);

  m.def(
      "boundary_distance",
      [](const ModelParams& mp, const Vec& x, const Vec& direction, double cap, double tol) {
        const auto d = boundary_distance(mp, x, direction, cap, tol);
        return py::make_tuple(d.distance, d.censored);
      },
      py::arg("model"), py::arg("x"), py::arg("direction"), py::arg("cap") = kDefaultDistanceCap,
      py::arg("tol") = kDefaultDistanceTol);

  m.def("clip_ball", &clip_ball, py::arg("candidate"), py::arg("origin"), py::arg("epsilon"));

  py::class_<AttackResult>(m, "AttackResult")
      .def_readonly("adversarial", &AttackResult::adversarial)
      .def_readonly("success_substitute", &AttackResult::success_substitute)
      .def_readonly("iterate_trace", &AttackResult::iterate_trace)
      .def_readonly("fallback_count", &AttackResult::fallback_count)
      .def_readonly("queries", &AttackResult::queries);

  m.def(
      "run_attack",
      [](const std::string& kind, const ModelParams& mp, const Vec& x, std::size_t y, double epsilon, int iterations,
         double mu, std::optional<BoundaryConfig> boundary, std::uint64_t seed, bool trace) {
        const AttackKind k = attack_kind_from_string(kind);
        AttackConfig c;
        c.epsilon = epsilon;
        c.iterations = iterations;
        c.mu = mu;
        c.seed = seed;
        c.record_trace = trace;
        if (uses_boundary(k)) c.boundary = boundary.value_or(BoundaryConfig{});
        return run_attack(k, mp, x, y, c);
      },
      py::arg("kind"), py::arg("model"), py::arg("x"), py::arg("y"), py::arg("epsilon") = 16.0 / 255.0,
      py::arg("iterations") = 10, py::arg("mu") = 1.0, py::arg("boundary") = std::nullopt, py::arg("seed") = 0,
      py::arg("trace") = false);

  m.def(
      "load_config",
      [](const std::filesystem::path& path, std::optional<std::uint64_t> seed, std::optional<std::string> out) {
        return load_config(path, make_overrides(seed, std::move(out))).hash();
      },
      py::arg("path"), py::arg("seed") = std::nullopt, py::arg("out") = std::nullopt,
      "Validates a config file and returns its hash.");

  m.def(
      "run_command",
      [](const std::string& command, const std::filesystem::path& path, std::optional<std::string> out,
         std::optional<std::uint64_t> seed, const std::string& kind, std::size_t begin,
         std::optional<std::size_t> end) {
        const auto cfg = load_config(path, make_overrides(seed, std::move(out)));
        py::gil_scoped_release release;
        if (command == "train") return cmd_train(cfg);
        if (command == "study") return cmd_study(cfg, kind);
        if (command == "ablate") return cmd_ablate(cfg);
        if (command == "plot") return cmd_plot(cfg);
        if (command == "attack") return cmd_attack(cfg, begin, end.value_or(static_cast<std::size_t>(-1)));
        throw InvalidInput("unknown command \"" + command + "\"");
      },
      py::arg("command"), py::arg("config"), py::arg("out") = std::nullopt, py::arg("seed") = std::nullopt,
      py::arg("kind") = "", py::arg("begin") = 0, py::arg("end") = std::nullopt);
}
