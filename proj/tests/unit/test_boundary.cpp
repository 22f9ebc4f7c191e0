#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "bfa/attack.hpp"
#include "bfa/boundary.hpp"
#include "bfa/data.hpp"
#include "bfa/error.hpp"
#include "bfa/stats.hpp"
#include "oracles.hpp"

using namespace bfa;

namespace {

struct Trained {
  Dataset ds;
  ModelParams model;
  double sigma;
};

const Trained& moons() {
  static const Trained t = [] {
    Dataset ds = gen_moons(300, 0.1, 31);
    ModelParams m = train({2, {32, 32}, 2, Activation::kRelu}, ds.train(), TrainHyper{}, 32, ds.name);
    const double sigma = 0.5 * coordinate_std(ds);
    return Trained{std::move(ds), std::move(m), sigma};
  }();
  return t;
}

const Trained& blobs() {
  static const Trained t = [] {
    Dataset ds = gen_blobs(4, 8, 150, 0.5, 33);
    ModelParams m = train({8, {32, 32}, 4, Activation::kTanh}, ds.train(), TrainHyper{}, 34, ds.name);
    const double sigma = 0.5 * coordinate_std(ds);
    return Trained{std::move(ds), std::move(m), sigma};
  }();
  return t;
}

double cos_sim(const Vec& a, const Vec& b) {
  return cosine(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
}

bool bracketed(const ModelParams& m, const Vec& x, std::size_t source, const BoundarySample& s, double gamma) {
  if (s.fell_back) return s.point == x;
  if (predict(m, s.point) != source) return false;
  if (s.shrink_count == 0) return true;
  const Vec outer = x + shrink_scale(gamma, s.shrink_count - 1) * s.direction;
  return predict(m, outer) != source;
}

}  // namespace

TEST_SUITE("boundary") {
  TEST_CASE("config validation") {
    BoundaryConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.sigma == 20.0 / 255.0);
    CHECK(c.gamma == 0.6);
    CHECK(c.t_max == 5);
    CHECK(c.n_points == 20);
    for (double g : {0.0, 1.0, -0.5, 1.5}) {
      BoundaryConfig b;
      b.gamma = g;
      CHECK_THROWS_AS(b.validate(), InvalidConfig);
    }
    BoundaryConfig b;
    b.sigma = 0.0;
    CHECK_THROWS_AS(b.validate(), InvalidConfig);
    b = BoundaryConfig{};
    b.t_max = 0;
    CHECK_THROWS_AS(b.validate(), InvalidConfig);
    b = BoundaryConfig{};
    b.n_points = 0;
    CHECK_THROWS_AS(b.validate(), InvalidConfig);
  }

  TEST_CASE("shrink scale is repeated multiplication") {
    CHECK(shrink_scale(0.6, 0) == 1.0);
    CHECK(shrink_scale(0.6, 1) == 0.6);
    CHECK(shrink_scale(0.6, 3) == 0.6 * 0.6 * 0.6);
  }

  TEST_CASE("linear model returns the analytically minimal shrink count") {
    std::mt19937_64 rng(41);
    int checked = 0, crossing = 0;
    for (int trial = 0; checked < 300; ++trial) {
      const auto m = oracle::random_linear(3, 2, rng);
      const auto lin = oracle::BinaryLinear::from(m);
      const Vec x = oracle::uniform_point(3, rng);
      const std::size_t src = predict(m, x);
      BoundaryConfig cfg;
      cfg.sigma = 0.5;
      const auto s = sample_boundary_point(m, x, src, src, cfg, RngStream(static_cast<std::uint64_t>(trial)));
      if (lin.shrink_ambiguity(x, s.direction, cfg.gamma) < 1e-7) continue;
      ++checked;
      const auto expect = lin.minimal_shrink(x, s.direction, cfg.gamma, cfg.t_max);
      if (expect) {
        CHECK_FALSE(s.fell_back);
        CHECK(s.shrink_count == *expect);
        crossing += *expect > 0;
      } else {
        CHECK(s.fell_back);
        CHECK(s.point == x);
      }
    }
    CHECK(crossing > 50);
  }

  TEST_CASE("a tiny offset stays inside with shrink count zero") {
    const auto& t = moons();
    BoundaryConfig cfg;
    cfg.sigma = 1e-9;
    for (std::size_t i = 0; i < 20; ++i) {
      const auto& p = t.ds.points[i];
      const std::size_t src = predict(t.model, p.x);
      const auto s = sample_boundary_point(t.model, p.x, src, p.y, cfg, RngStream(i));
      CHECK(s.shrink_count == 0);
      CHECK_FALSE(s.fell_back);
      CHECK(s.point == Vec(p.x + s.direction));
      CHECK(s.evaluations == 2);
    }
  }

  TEST_CASE("source class precondition is enforced") {
    const auto& t = moons();
    const auto& p = t.ds.points[0];
    const std::size_t other = 1 - predict(t.model, p.x);
    CHECK_THROWS_AS(sample_boundary_point(t.model, p.x, other, p.y, BoundaryConfig{}, RngStream(1)), ContractError);
    CHECK_THROWS_AS(averaged_boundary_gradient(t.model, p.x, p.y, other, BoundaryConfig{}, RngStream(1)),
                    ContractError);
  }

  TEST_CASE("samples are bracketed and the gradient is taken at the point") {
    for (const Trained* t : {&moons(), &blobs()}) {
      BoundaryConfig cfg;
      cfg.sigma = t->sigma;
      for (std::size_t i = 0; i < 200; ++i) {
        const auto& p = t->ds.points[i % t->ds.points.size()];
        const std::size_t src = predict(t->model, p.x);
        const auto s = sample_boundary_point(t->model, p.x, src, p.y, cfg, RngStream(1000 + i));
        CHECK(bracketed(t->model, p.x, src, s, cfg.gamma));
        CHECK(s.gradient == input_gradient(t->model, s.point, p.y));
        CHECK(s.evaluations <= cfg.t_max + 2);
      }
    }
  }

  TEST_CASE("fallback rate is small at the default sigma and large at a huge sigma") {
    const auto& t = moons();
    auto rate = [&](double sigma) {
      BoundaryConfig cfg;
      cfg.sigma = sigma;
      int fb = 0;
      for (std::size_t i = 0; i < 1000; ++i) {
        const auto& p = t.ds.points[i % t.ds.points.size()];
        fb += sample_boundary_point(t.model, p.x, predict(t.model, p.x), p.y, cfg, RngStream(5000 + i)).fell_back;
      }
      return fb / 1000.0;
    };
    const double small = rate(t.sigma), huge = rate(2.0);
    MESSAGE("fallback rate at sigma=" << t.sigma << ": " << small << ", at sigma=2: " << huge);
    CHECK(small < 0.05);
    CHECK(huge > small);
  }

  TEST_CASE("averaging with one point reproduces a single draw") {
    const auto& t = blobs();
    BoundaryConfig cfg;
    cfg.sigma = t.sigma;
    cfg.n_points = 1;
    for (std::size_t i = 0; i < 30; ++i) {
      const auto& p = t.ds.points[i];
      const std::size_t src = predict(t.model, p.x);
      const RngStream stream(77 + i);
      const auto g = averaged_boundary_gradient(t.model, p.x, p.y, src, cfg, stream);
      const auto s = sample_boundary_point(t.model, p.x, src, p.y, cfg, stream.child(0));
      CHECK(g.mean == s.gradient);
      CHECK(g.fallback_count == static_cast<int>(s.fell_back));
      CHECK(g.evaluations == s.evaluations);
    }
  }

  TEST_CASE("averaged gradient is the mean of the per-sample gradients") {
    const auto& t = blobs();
    BoundaryConfig cfg;
    cfg.sigma = t.sigma;
    cfg.n_points = 7;
    const auto& p = t.ds.points[3];
    const std::size_t src = predict(t.model, p.x);
    const RngStream stream(99);
    const auto g = averaged_boundary_gradient(t.model, p.x, p.y, src, cfg, stream);
    Vec sum = Vec::Zero(p.x.size());
    int shrink = 0;
    for (int i = 0; i < 7; ++i) {
      const auto s = sample_boundary_point(t.model, p.x, src, p.y, cfg, stream.child(static_cast<std::uint64_t>(i)));
      sum += s.gradient;
      shrink += s.shrink_count;
    }
    CHECK((g.mean - sum / 7.0).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(g.total_shrink == shrink);
  }

  TEST_CASE("linear averaged gradient is collinear with the gradient at x") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 50; ++trial) {
      const auto m = oracle::random_linear(4, 2, rng);
      const Vec x = oracle::uniform_point(4, rng);
      const std::size_t src = predict(m, x);
      BoundaryConfig cfg;
      cfg.sigma = 0.3;
      cfg.n_points = 1 + trial % 20;
      const auto g = averaged_boundary_gradient(m, x, src, src, cfg, RngStream(static_cast<std::uint64_t>(trial)));
      const Vec g0 = input_gradient(m, x, src);
      CHECK(std::fabs(cos_sim(g.mean, g0)) > 1.0 - 1e-12);
    }
  }

  TEST_CASE("averaging is seeded and reduces variance") {
    const auto& t = blobs();
    BoundaryConfig many;
    many.sigma = t.sigma;
    BoundaryConfig one = many;
    one.n_points = 1;
    double cos_many = 0, cos_one = 0;
    int n = 0;
    for (std::size_t i = 0; i < 100; ++i) {
      const auto& p = t.ds.points[i];
      const std::size_t src = predict(t.model, p.x);
      const auto a = averaged_boundary_gradient(t.model, p.x, p.y, src, many, RngStream(10 + i));
      const auto again = averaged_boundary_gradient(t.model, p.x, p.y, src, many, RngStream(10 + i));
      CHECK(a.mean == again.mean);
      const auto b = averaged_boundary_gradient(t.model, p.x, p.y, src, many, RngStream(5000 + i));
      const auto a1 = averaged_boundary_gradient(t.model, p.x, p.y, src, one, RngStream(10 + i));
      const auto b1 = averaged_boundary_gradient(t.model, p.x, p.y, src, one, RngStream(5000 + i));
      cos_many += cos_sim(a.mean, b.mean);
      cos_one += cos_sim(a1.mean, b1.mean);
      ++n;
    }
    CHECK(cos_many / n > cos_one / n);
  }

  TEST_CASE("linear boundary distance matches the closed form") {
    std::mt19937_64 rng(43);
    int uncensored = 0;
    for (int trial = 0; trial < 300; ++trial) {
      const auto m = oracle::random_linear(5, 2, rng);
      const auto lin = oracle::BinaryLinear::from(m);
      const Vec x = oracle::uniform_point(5, rng);
      const Vec dir = trial % 2 ? sign(input_gradient(m, x, predict(m, x)))
                                : Vec(oracle::uniform_point(5, rng).array() - 0.5);
      const auto r = boundary_distance(m, x, dir, 4.0, 1e-4);
      const auto s = lin.distance(x, dir);
      if (s && *s <= 4.0 - 1e-4) {
        ++uncensored;
        CHECK_FALSE(r.censored);
        CHECK(std::fabs(r.distance - static_cast<double>(*s)) <= 1e-4);
        CHECK(r.inside <= static_cast<double>(*s) + 1e-12);
        CHECK(r.distance - r.inside <= 1e-4 * (1 + 1e-9));
      } else if (!s || *s > 4.0) {
        CHECK(r.censored);
        CHECK(r.distance == 4.0);
      }
    }
    CHECK(uncensored > 100);
  }

  TEST_CASE("direction away from every boundary is censored at the cap") {
    Mat W(2, 2);
    W << 1, 0, 0, 1;
    const auto m = make_linear(W, Vec::Zero(2));
    Vec x(2), d(2);
    x << 0.8, 0.2;
    d << 1.0, -1.0;
    const auto r = boundary_distance(m, x, d, 2.5, 1e-4);
    CHECK(r.censored);
    CHECK(r.distance == 2.5);
    CHECK(r.direction_kind == DirectionKind::kSignGradient);
  }

  TEST_CASE("zero or malformed directions are rejected") {
    const auto& t = moons();
    const Vec x = t.ds.points[0].x;
    CHECK_THROWS_AS(boundary_distance(t.model, x, Vec::Zero(2)), InvalidInput);
    CHECK_THROWS_AS(boundary_distance(t.model, x, Vec::Ones(3)), InvalidInput);
    CHECK_THROWS_AS(boundary_distance(t.model, x, Vec::Ones(2), 0.0), InvalidInput);
    CHECK_THROWS_AS(natural_direction_distance(t.model, x, 0.0, RngStream(1)), InvalidInput);
  }

  TEST_CASE("bisection agrees with a dense line scan on a trained MLP") {
    const auto& t = moons();
    const double tol = 1e-3, cap = 1.0;
    std::mt19937_64 rng(44);
    int compared = 0, hidden = 0;
    for (std::size_t i = 0; i < 100; ++i) {
      const auto& p = t.ds.points[i];
      Engine e(rng());
      const Vec dir = gaussian_vector(e, 2, 1.0);
      const Vec u = dir / dir.cwiseAbs().maxCoeff();
      const auto r = boundary_distance(t.model, p.x, dir, cap, tol);
      const auto scan = oracle::dense_scan(t.model, p.x, u, cap, tol / 10);
      if (!scan) {
        CHECK(r.censored);
        continue;
      }
      // A flip that closes again before the next doubling probe is invisible to the search.
      double probe = tol;
      while (probe < *scan && probe < cap) probe *= 2;
      if (predict(t.model, Vec(p.x + std::min(probe, cap) * u)) == predict(t.model, p.x)) {
        ++hidden;
        continue;
      }
      ++compared;
      CHECK(std::fabs(r.distance - *scan) <= 2 * tol);
    }
    MESSAGE("flips hidden between doubling probes: " << hidden);
    CHECK(hidden <= 2);
    CHECK(compared > 50);
  }

  TEST_CASE("enlarging the cap never increases a found distance") {
    const auto& t = blobs();
    for (std::size_t i = 0; i < 50; ++i) {
      const auto& p = t.ds.points[i];
      const Vec dir = input_gradient(t.model, p.x, p.y);
      if (dir.isZero(0.0)) continue;
      const auto a = boundary_distance(t.model, p.x, dir, 0.5, 1e-4);
      const auto b = boundary_distance(t.model, p.x, dir, 4.0, 1e-4);
      if (!a.censored) CHECK(b.distance <= a.distance);
      CHECK(a.distance <= 0.5);
    }
  }

  TEST_CASE("natural direction distance is seeded and matches the closed form on linear models") {
    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 100; ++trial) {
      const auto m = oracle::random_linear(3, 2, rng);
      const auto lin = oracle::BinaryLinear::from(m);
      const Vec x = oracle::uniform_point(3, rng);
      const RngStream stream(static_cast<std::uint64_t>(trial) * 7 + 1);
      const auto r = natural_direction_distance(m, x, 0.2, stream);
      const auto again = natural_direction_distance(m, x, 0.2, stream);
      CHECK(r.distance == again.distance);
      CHECK(r.direction_kind == DirectionKind::kNatural);
      Engine e = stream.engine();
      const Vec d = gaussian_vector(e, 3, 0.2);
      const auto s = lin.distance(x, d);
      if (s && *s < 4.0 - 1e-4) CHECK(std::fabs(r.distance - static_cast<double>(*s)) <= 1e-4);
      if (!s) CHECK(r.censored);
    }
  }

  TEST_CASE("noise-augmented victims sit farther from the boundary along natural directions") {
    const Dataset ds = gen_blobs(4, 16, 300, 0.6, 1);
    const Architecture arch{16, {32, 32}, 4, Activation::kRelu};
    TrainHyper noisy;
    noisy.noise_augment_sigma = 0.2;
    const auto plain = train(arch, ds.train(), TrainHyper{}, 500);
    const auto robust = train(arch, ds.train(), noisy, 500);
    const double sigma = 0.5 * coordinate_std(ds);
    const auto test = ds.test();
    auto mean_distance = [&](const ModelParams& m) {
      double sum = 0;
      int n = 0;
      for (std::size_t i = 0; i < 100; ++i) {
        for (std::uint64_t j = 0; j < 50; ++j) {
          const auto r = natural_direction_distance(m, test[i].x, sigma, RngStream(derive_key(9, {i, j})));
          sum += r.distance;
          ++n;
        }
      }
      return sum / n;
    };
    CHECK(mean_distance(robust) > mean_distance(plain));
  }
}
