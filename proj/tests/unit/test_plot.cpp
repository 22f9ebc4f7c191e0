#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "bfa/data.hpp"
#include "bfa/error.hpp"
#include "bfa/plot.hpp"

using namespace bfa;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  return v;
}

AttackConfig attack_cfg(double sigma) {
  AttackConfig c;
  c.epsilon = 0.15;
  c.iterations = 10;
  BoundaryConfig b;
  b.sigma = sigma;
  c.boundary = b;
  c.seed = 3;
  return c;
}

struct Moons {
  Dataset ds;
  ModelParams sub, vic;
};

const Moons& moons() {
  static const Moons m = [] {
    Dataset ds = gen_moons(200, 0.1, 91);
    const Architecture arch{2, {16, 16}, 2, Activation::kRelu};
    auto sub = train(arch, ds.train(), TrainHyper{}, 92);
    auto vic = train(arch, ds.train(), TrainHyper{}, 93);
    return Moons{std::move(ds), std::move(sub), std::move(vic)};
  }();
  return m;
}

}  // namespace

TEST_SUITE("plot") {
  TEST_CASE("marching squares traces a straight level set exactly") {
    const auto xs = linspace(0, 1, 21), ys = linspace(0, 1, 17);
    std::vector<double> f;
    for (double y : ys)
      for (double x : xs) f.push_back(2 * x + y);
    const auto segs = marching_squares(xs, ys, f, 1.3);
    REQUIRE_FALSE(segs.empty());
    for (const auto& s : segs) {
      CHECK(2 * s.a[0] + s.a[1] == doctest::Approx(1.3).epsilon(1e-12));
      CHECK(2 * s.b[0] + s.b[1] == doctest::Approx(1.3).epsilon(1e-12));
    }
    CHECK(marching_squares(xs, ys, f, 10.0).empty());
  }

  TEST_CASE("marching squares closes a circle") {
    const auto xs = linspace(-1, 1, 41), ys = linspace(-1, 1, 41);
    std::vector<double> f;
    for (double y : ys)
      for (double x : xs) f.push_back(x * x + y * y);
    const auto segs = marching_squares(xs, ys, f, 0.25);
    double length = 0;
    for (const auto& s : segs) {
      length += std::hypot(s.a[0] - s.b[0], s.a[1] - s.b[1]);
      CHECK(std::hypot(s.a[0], s.a[1]) == doctest::Approx(0.5).epsilon(0.01));
    }
    CHECK(length == doctest::Approx(M_PI).epsilon(0.01));
  }

  TEST_CASE("a linear model's boundary plots as a straight line") {
    Mat W(2, 2);
    W << 1.0, 2.0, -1.0, 0.5;
    Vec b(2);
    b << 0.1, 1.9;
    const auto m = make_linear(W, b);
    Vec x(2);
    x << 0.2, 0.2;
    PlotOptions opt;
    opt.grid = 51;
    const auto scene = build_scene(m, &m, {x, predict(m, x)}, attack_cfg(0.2), opt);
    REQUIRE_FALSE(scene.substitute_boundary.empty());
    const double wx = W(1, 0) - W(0, 0), wy = W(1, 1) - W(0, 1), c = b[1] - b[0];
    for (const auto& s : scene.substitute_boundary)
      for (const auto& p : {s.a, s.b}) CHECK(std::fabs(wx * p[0] + wy * p[1] + c) < 1e-9);
    CHECK(scene.victim_boundary.size() == scene.substitute_boundary.size());
  }

  TEST_CASE("plotted boundary samples satisfy the bracket") {
    const auto& m = moons();
    const LabeledPoint p = m.ds.test()[3];
    const auto cfg = attack_cfg(0.5 * coordinate_std(m.ds));
    const auto scene = build_scene(m.sub, &m.vic, p, cfg, PlotOptions{});
    REQUIRE(scene.samples.size() == static_cast<std::size_t>(cfg.boundary->n_points));
    for (const auto& s : scene.samples) {
      if (s.fell_back) {
        CHECK(s.point == p.x);
        continue;
      }
      CHECK(predict(m.sub, s.point) == scene.substitute_class);
      if (s.shrink_count > 0) {
        const Vec outer = p.x + shrink_scale(cfg.boundary->gamma, s.shrink_count - 1) * s.direction;
        CHECK(predict(m.sub, outer) != scene.substitute_class);
      }
    }
    CHECK(scene.baseline_trace.size() == 11);
    CHECK(scene.boundary_trace.size() == 11);
    CHECK(scene.loss_contours.size() == PlotOptions{}.loss_levels.size());
  }

  TEST_CASE("svg output is byte-deterministic and carries every layer") {
    const auto& m = moons();
    const LabeledPoint p = m.ds.test()[5];
    const auto cfg = attack_cfg(0.5 * coordinate_std(m.ds));
    const std::string a = render_svg(build_scene(m.sub, &m.vic, p, cfg, PlotOptions{}));
    const std::string b = render_svg(build_scene(m.sub, &m.vic, p, cfg, PlotOptions{}));
    CHECK(a == b);
    CHECK(a.rfind("<svg", 0) == 0);
    for (const char* cls : {"substitute-boundary", "victim-boundary", "stroke-dasharray", "boundary-points",
                            "trajectory-baseline", "trajectory-boundary", "class=\"loss\"", "class=\"input\""})
      CHECK_MESSAGE(a.find(cls) != std::string::npos, cls);
    const auto no_victim = render_svg(build_scene(m.sub, nullptr, p, cfg, PlotOptions{}));
    CHECK(no_victim.find("stroke-dasharray") == std::string::npos);
  }

  TEST_CASE("higher-dimensional inputs need a valid slice") {
    const Dataset ds = gen_blobs(3, 4, 40, 0.3, 94);
    const auto m = train({4, {8}, 3, Activation::kRelu}, ds.train(), TrainHyper{}, 95);
    const auto& p = ds.points[0];
    const auto cfg = attack_cfg(0.1);
    CHECK_THROWS_AS(build_scene(m, &m, p, cfg, PlotOptions{}), InvalidInput);
    PlotOptions opt;
    opt.slice = SliceSpec{1, 1};
    CHECK_THROWS_AS(build_scene(m, &m, p, cfg, opt), InvalidInput);
    opt.slice = SliceSpec{0, 4};
    CHECK_THROWS_AS(build_scene(m, &m, p, cfg, opt), InvalidInput);
    opt.slice = SliceSpec{2, 3};
    opt.grid = 31;
    const auto scene = build_scene(m, &m, p, cfg, opt);
    CHECK(scene.x_axis == 2);
    const auto xy = scene.project(p.x);
    CHECK(xy[0] == p.x[2]);
    CHECK(xy[1] == p.x[3]);
    opt.grid = 1;
    CHECK_THROWS_AS(build_scene(m, &m, p, cfg, opt), InvalidInput);
  }
}
