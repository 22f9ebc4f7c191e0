#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "bfa/data.hpp"
#include "bfa/error.hpp"
#include "bfa/model.hpp"
#include "bfa/parallel.hpp"
#include "oracles.hpp"

using namespace bfa;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out[i++] = d;
  return out;
}

ModelParams identity2() {
  Mat W(2, 2);
  W << 1, 0, 0, 1;
  return make_linear(W, Vec::Zero(2));
}

bool bits_equal(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

// Loss has a strict minimum at x = 0.5: margin is tanh(x-0.5+c) - tanh(x-0.5-c).
ModelParams bump_model(double c) {
  ModelParams m;
  m.arch = {1, {2}, 2, Activation::kTanh};
  m.layers.resize(2);
  m.layers[0].weight = Mat::Ones(2, 1);
  m.layers[0].bias = vec({-0.5 + c, -0.5 - c});
  m.layers[1].weight = Mat::Zero(2, 2);
  m.layers[1].weight(0, 0) = 1;
  m.layers[1].weight(0, 1) = -1;
  m.layers[1].bias = Vec::Zero(2);
  m.validate();
  return m;
}

const Dataset& moons500() {
  static const Dataset ds = gen_moons(500, 0.1, 11);
  return ds;
}

const ModelParams& moons_mlp() {
  static const ModelParams m =
      train({2, {32, 32}, 2, Activation::kRelu}, moons500().train(), TrainHyper{}, 21, "moons");
  return m;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("forward of the identity linear model returns the input") {
    const Vec l = forward(identity2(), vec({0.3, 0.7}));
    CHECK(l[0] == 0.3);
    CHECK(l[1] == 0.7);
  }

  TEST_CASE("forward is bitwise repeatable") {
    std::mt19937_64 rng(3);
    const auto m = oracle::random_mlp({5, {7, 4}, 3, Activation::kTanh}, rng);
    const Vec x = oracle::uniform_point(5, rng);
    CHECK(bits_equal(forward(m, x), forward(m, x)));
  }

  TEST_CASE("forward rejects a dimension mismatch") {
    CHECK_THROWS_AS(forward(identity2(), vec({0.1, 0.2, 0.3})), InvalidInput);
    CHECK_THROWS_AS(forward(identity2(), vec({0.1, NAN})), InvalidInput);
  }

  TEST_CASE("forward matches a long double reference") {
    std::mt19937_64 rng(4);
    for (auto act : {Activation::kRelu, Activation::kTanh}) {
      const auto m = oracle::random_mlp({6, {9, 5}, 4, act}, rng);
      for (int i = 0; i < 20; ++i) {
        const Vec x = oracle::uniform_point(6, rng);
        const Vec l = forward(m, x);
        const auto ref = oracle::forward_ld(m, x);
        for (Eigen::Index j = 0; j < l.size(); ++j) CHECK(std::fabs(l[j] - static_cast<double>(ref[j])) < 1e-12);
      }
    }
  }

  TEST_CASE("trained two-moons MLP classifies held-out points") {
    CHECK(moons500().test().size() == 500);
    CHECK(accuracy(moons_mlp(), moons500().test()) >= 0.97);
  }

  TEST_CASE("predict takes the argmax with lowest-index ties") {
    CHECK(argmax(vec({0.3, 0.7})) == 1);
    CHECK(argmax(vec({0.5, 0.5})) == 0);
    CHECK(argmax(vec({0.1, -2.0, 3.0})) == 2);
    CHECK(predict(identity2(), vec({0.3, 0.7})) == 1);
    CHECK(predict(identity2(), vec({0.5, 0.5})) == 0);
  }

  TEST_CASE("loss of uniform logits is ln k") {
    for (int k = 2; k <= 12; ++k) {
      const Vec l = Vec::Constant(k, 0.37);
      for (int y = 0; y < k; ++y) CHECK(std::fabs(cross_entropy(l, static_cast<std::size_t>(y)) - std::log(k)) <= 1e-12);
    }
  }

  TEST_CASE("loss is stable for huge logit gaps") {
    const double v = cross_entropy(vec({1000.0, 0.0}), 0);
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
    CHECK(v < 1e-300);
    const double w = cross_entropy(vec({1000.0, 0.0}), 1);
    CHECK(w == doctest::Approx(1000.0).epsilon(1e-15));
  }

  TEST_CASE("loss matches a high-precision softmax") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      const auto m = oracle::random_mlp({4, {6}, 5, trial % 2 ? Activation::kTanh : Activation::kRelu}, rng);
      const Vec x = oracle::uniform_point(4, rng);
      const std::size_t y = rng() % 5;
      const double ref = static_cast<double>(oracle::cross_entropy_ld(oracle::forward_ld(m, x), y));
      CHECK(std::fabs(loss(m, x, y) - ref) <= 1e-12);
      CHECK(loss(m, x, y) >= 0.0);
    }
  }

  TEST_CASE("loss rejects an invalid label") {
    CHECK_THROWS_AS(loss(identity2(), vec({0.1, 0.2}), 2), InvalidInput);
    CHECK_THROWS_AS(input_gradient(identity2(), vec({0.1, 0.2}), 5), InvalidInput);
  }

  TEST_CASE("linear gradient is W^T (softmax - onehot)") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
      const auto m = oracle::random_linear(3, 2, rng);
      const Vec x = oracle::uniform_point(3, rng);
      const std::size_t y = trial % 2;
      const auto l = oracle::forward_ld(m, x);
      const long double p1 = 1.0L / (1.0L + std::exp(l[0] - l[1]));
      const long double p[2] = {1.0L - p1, p1};
      const Vec g = input_gradient(m, x, y);
      for (Eigen::Index i = 0; i < 3; ++i) {
        long double ref = 0;
        for (int k = 0; k < 2; ++k) ref += m.layers[0].weight(k, i) * (p[k] - (static_cast<std::size_t>(k) == y ? 1 : 0));
        CHECK(std::fabs(g[i] - static_cast<double>(ref)) < 1e-12);
      }
    }
  }

  TEST_CASE("gradient vanishes at a strict local minimum") {
    const auto m = bump_model(0.8);
    CHECK(input_gradient(m, vec({0.5}), 0).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(loss(m, vec({0.5}), 0) < loss(m, vec({0.49}), 0));
    CHECK(loss(m, vec({0.5}), 0) < loss(m, vec({0.51}), 0));
  }

  TEST_CASE("gradient matches central differences") {
    std::mt19937_64 rng(7);
    double worst = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
      const std::size_t d = 2 + trial % 5;
      const Architecture arch{d, trial % 3 == 0 ? std::vector<std::size_t>{} : std::vector<std::size_t>{8, 6}, 3,
                              trial % 2 ? Activation::kTanh : Activation::kRelu};
      const auto m = oracle::random_mlp(arch, rng);
      const Vec x = oracle::uniform_point(d, rng);
      const std::size_t y = rng() % 3;
      const Vec fd = oracle::central_difference([&](const Vec& z) { return loss(m, z, y); }, x, 1e-5);
      worst = std::max(worst, oracle::max_relative_error(input_gradient(m, x, y), fd));
    }
    CHECK(worst < 1e-6);
  }

  TEST_CASE("a tiny step against the gradient does not increase the loss") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
      const auto m = oracle::random_mlp({4, {8}, 3, trial % 2 ? Activation::kTanh : Activation::kRelu}, rng);
      const Vec x = oracle::uniform_point(4, rng);
      const std::size_t y = rng() % 3;
      const Vec g = input_gradient(m, x, y);
      const Vec step = x - 1e-6 * g.normalized();
      if (g.norm() == 0.0) continue;
      CHECK(loss(m, step, y) <= loss(m, x, y) + 1e-9);
    }
  }

  TEST_CASE("loss_and_gradient agrees with the separate calls") {
    std::mt19937_64 rng(9);
    const auto m = oracle::random_mlp({3, {5}, 4, Activation::kRelu}, rng);
    const Vec x = oracle::uniform_point(3, rng);
    const auto lg = loss_and_gradient(m, x, 2);
    CHECK(lg.loss == loss(m, x, 2));
    CHECK(lg.predicted == predict(m, x));
    CHECK(bits_equal(lg.gradient, input_gradient(m, x, 2)));
  }

  TEST_CASE("inference is safe to call concurrently") {
    std::mt19937_64 rng(10);
    const auto m = oracle::random_mlp({8, {16, 16}, 4, Activation::kRelu}, rng);
    std::vector<Vec> xs;
    for (int i = 0; i < 64; ++i) xs.push_back(oracle::uniform_point(8, rng));
    std::vector<Vec> seq, par(xs.size());
    for (const auto& x : xs) seq.push_back(input_gradient(m, x, 1));
    parallel_for(xs.size(), [&](std::size_t i) { par[i] = input_gradient(m, xs[i], 1); });
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(bits_equal(seq[i], par[i]));
  }

  TEST_CASE("architecture validation") {
    CHECK_THROWS_AS((Architecture{0, {}, 2, Activation::kRelu}.validate()), InvalidConfig);
    CHECK_THROWS_AS((Architecture{2, {}, 1, Activation::kRelu}.validate()), InvalidConfig);
    CHECK_THROWS_AS((Architecture{2, {0}, 2, Activation::kRelu}.validate()), InvalidConfig);
    const auto lin = initialize({3, {}, 2, Activation::kRelu}, 1);
    CHECK(lin.layers.size() == 1);
    CHECK(lin.layers[0].weight.rows() == 2);
    CHECK(lin.layers[0].weight.cols() == 3);
    CHECK(activation_from_string(to_string(Activation::kTanh)) == Activation::kTanh);
    CHECK_THROWS_AS(activation_from_string("sigmoid"), InvalidConfig);
  }

  TEST_CASE("initialization is seeded with zero biases") {
    const Architecture arch{4, {5}, 3, Activation::kRelu};
    CHECK(bitwise_equal(initialize(arch, 3), initialize(arch, 3)));
    CHECK_FALSE(bitwise_equal(initialize(arch, 3), initialize(arch, 4)));
    for (const auto& l : initialize(arch, 3).layers) CHECK(l.bias.isZero(0.0));
  }

  TEST_CASE("linear model on narrow blobs reaches high train accuracy") {
    const Dataset ds = gen_blobs(3, 2, 100, 0.08, 12);
    TrainHyper h;
    h.epochs = 200;
    const auto m = train({2, {}, 3, Activation::kRelu}, ds.train(), h, 5, ds.name);
    CHECK(m.train_meta.train_accuracy >= 0.95);
    CHECK(m.train_meta.epochs == 200);
    CHECK(m.train_meta.dataset == ds.name);
    CHECK(m.train_meta.train_accuracy == accuracy(m, ds.train()));
  }

  TEST_CASE("training is bitwise deterministic") {
    const Dataset ds = gen_blobs(3, 4, 40, 0.2, 13);
    TrainHyper h;
    h.epochs = 15;
    h.noise_augment_sigma = 0.05;
    const Architecture arch{4, {8}, 3, Activation::kTanh};
    const auto a = train(arch, ds.train(), h, 77);
    const auto b = train(arch, ds.train(), h, 77);
    const auto c = train(arch, ds.train(), h, 78);
    CHECK(bitwise_equal(a, b));
    CHECK_FALSE(bitwise_equal(a, c));
    CHECK(a.train_seed == 77);
  }

  TEST_CASE("training rejects degenerate data and settings") {
    const Architecture arch{2, {}, 2, Activation::kRelu};
    std::vector<LabeledPoint> one_class{{vec({0.1, 0.2}), 0}, {vec({0.3, 0.4}), 0}};
    CHECK_THROWS_AS(train(arch, one_class, TrainHyper{}, 1), InvalidConfig);
    CHECK_THROWS_AS(train(arch, {}, TrainHyper{}, 1), InvalidConfig);
    std::vector<LabeledPoint> ok{{vec({0.1, 0.2}), 0}, {vec({0.3, 0.4}), 1}};
    TrainHyper bad;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(train(arch, ok, bad, 1), InvalidConfig);
    std::vector<LabeledPoint> wrong_label{{vec({0.1, 0.2}), 0}, {vec({0.3, 0.4}), 2}};
    CHECK_THROWS_AS(train(arch, wrong_label, TrainHyper{}, 1), InvalidConfig);
  }

  TEST_CASE("two-moons MLP test accuracy") { CHECK(accuracy(moons_mlp(), moons500().test()) >= 0.97); }
}

TEST_SUITE("model_io") {
  TEST_CASE("save then load is the identity") {
    const auto& m = moons_mlp();
    const auto path = std::filesystem::temp_directory_path() / "bfa_test_model_roundtrip.json";
    save_model(m, path);
    const auto back = load_model(path);
    std::filesystem::remove(path);
    CHECK(bitwise_equal(m, back));
    CHECK(back.train_meta == m.train_meta);
    CHECK(back.train_seed == m.train_seed);
    CHECK(back.arch == m.arch);
    std::mt19937_64 rng(14);
    for (int i = 0; i < 100; ++i) {
      const Vec x = oracle::uniform_point(2, rng);
      CHECK(bits_equal(forward(m, x), forward(back, x)));
    }
    CHECK(serialize_model(back) == serialize_model(m));
  }

  TEST_CASE("round trip keeps awkward doubles exact") {
    Mat W(2, 3);
    W << 0.1, -0.0, 1e-310, 5e-324, -1.7976931348623157e308, 1.0 / 3.0;
    const auto m = make_linear(W, vec({std::nextafter(1.0, 2.0), -2.5}));
    const auto back = parse_model(serialize_model(m));
    CHECK(bitwise_equal(m, back));
    CHECK(std::signbit(back.layers[0].weight(0, 1)));
  }

  TEST_CASE("truncated file is a parse error with an offset") {
    const std::string text = serialize_model(identity2());
    for (std::size_t cut : {std::size_t{0}, std::size_t{1}, text.size() / 3, text.size() / 2, text.size() - 3}) {
      try {
        parse_model(text.substr(0, cut));
        FAIL("expected a parse error at cut " << cut);
      } catch (const ParseError& e) {
        CHECK(e.offset() <= cut + 1);
        CHECK(std::string(e.what()).find("byte") != std::string::npos);
      }
    }
  }

  TEST_CASE("shape mismatch names the layer") {
    std::mt19937_64 rng(15);
    auto m = oracle::random_mlp({3, {4}, 2, Activation::kRelu}, rng);
    std::string text = serialize_model(m);
    // Claim a wider hidden layer than the stored matrices.
    const auto pos = text.find("\"hidden_dims\"");
    REQUIRE(pos != std::string::npos);
    const auto four = text.find('4', pos);
    text[four] = '5';
    try {
      parse_model(text);
      FAIL("expected a shape error");
    } catch (const ShapeError& e) {
      CHECK(e.layer() == 0);
      CHECK(std::string(e.what()).rfind("layer 0", 0) == 0);
    }
  }

  TEST_CASE("missing file and garbage are rejected") {
    CHECK_THROWS_AS(load_model("/nonexistent/dir/model.json"), Error);
    CHECK_THROWS_AS(parse_model("{\"format_version\": 1}"), ParseError);
    CHECK_THROWS_AS(parse_model("not json"), ParseError);
  }
}
