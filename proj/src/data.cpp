#include "bfa/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <set>

#include "bfa/error.hpp"
#include "bfa/format.hpp"
#include "bfa/rng.hpp"

namespace bfa {

std::vector<LabeledPoint> Dataset::train() const {
  std::vector<LabeledPoint> out;
  out.reserve(train_idx.size());
  for (std::size_t i : train_idx) out.push_back(points[i]);
  return out;
}

std::vector<LabeledPoint> Dataset::test() const {
  std::vector<LabeledPoint> out;
  out.reserve(test_idx.size());
  for (std::size_t i : test_idx) out.push_back(points[i]);
  return out;
}

void Dataset::validate() const {
  const std::size_t d = dim();
  for (const auto& p : points) {
    if (static_cast<std::size_t>(p.x.size()) != d) throw InvalidInput(name + ": ragged dataset");
    if (p.y >= num_classes) throw InvalidInput(name + ": label out of range");
    if ((p.x.array() < 0.0).any() || (p.x.array() > 1.0).any())
      throw InvalidInput(name + ": point outside the unit cube");
  }
  std::vector<int> seen(points.size(), 0);
  for (std::size_t i : train_idx) seen.at(i) += 1;
  for (std::size_t i : test_idx) seen.at(i) += 1;
  if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; }))
    throw InvalidInput(name + ": train/test split is not a partition");
  std::set<std::size_t> in_train, in_test;
  for (std::size_t i : train_idx) in_train.insert(points[i].y);
  for (std::size_t i : test_idx) in_test.insert(points[i].y);
  if (in_train.size() != num_classes || in_test.size() != num_classes)
    throw InvalidInput(name + ": some class is missing from a split");
}

void rescale_to_unit_cube(std::vector<Vec>& points) {
  if (points.empty()) return;
  Vec lo = points.front(), hi = points.front();
  for (const Vec& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double range = (hi - lo).maxCoeff();
  const double scale = range > 0.0 ? 1.0 / range : 1.0;
  for (Vec& p : points) p = ((p - lo) * scale).cwiseMax(0.0).cwiseMin(1.0);
}

void stratified_split(Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidConfig("test_fraction must lie in (0, 1)");
  ds.train_idx.clear();
  ds.test_idx.clear();
  Engine engine(derive_key(seed, {0x73706C6974ULL}));
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.points.size(); ++i)
      if (ds.points[i].y == c) members.push_back(i);
    std::shuffle(members.begin(), members.end(), engine);
    std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * members.size()));
    if (members.size() >= 2) n_test = std::clamp<std::size_t>(n_test, 1, members.size() - 1);
    else n_test = 0;
    ds.test_idx.insert(ds.test_idx.end(), members.begin(), members.begin() + n_test);
    ds.train_idx.insert(ds.train_idx.end(), members.begin() + n_test, members.end());
  }
  std::sort(ds.train_idx.begin(), ds.train_idx.end());
  std::sort(ds.test_idx.begin(), ds.test_idx.end());
}

namespace {

Dataset assemble(std::string name, std::vector<Vec> raw, std::vector<std::size_t> labels,
                 std::size_t num_classes, std::uint64_t seed, double test_fraction) {
  rescale_to_unit_cube(raw);
  Dataset ds;
  ds.name = std::move(name);
  ds.num_classes = num_classes;
  ds.gen_seed = seed;
  for (std::size_t i = 0; i < raw.size(); ++i) ds.points.push_back({std::move(raw[i]), labels[i]});
  stratified_split(ds, test_fraction, seed);
  ds.validate();
  return ds;
}

}  // namespace

Dataset gen_blobs(std::size_t classes, std::size_t dim, std::size_t n_per_class, double spread,
                  std::uint64_t seed, double test_fraction) {
  if (classes < 2) throw InvalidConfig("blobs need at least 2 classes");
  if (dim < 1 || n_per_class < 2 || spread < 0.0) throw InvalidConfig("invalid blob parameters");
  Engine engine(derive_key(seed, {0x626C6F62ULL}));
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  // Rejection-sample centers so clusters never sit on top of each other.
  const double min_sep = 0.5;
  std::vector<Vec> centers;
  for (int attempt = 0; centers.size() < classes; ++attempt) {
    Vec c(dim);
    for (std::size_t i = 0; i < dim; ++i) c[i] = uni(engine);
    bool ok = attempt > 10000 || std::all_of(centers.begin(), centers.end(), [&](const Vec& o) {
                return (o - c).norm() >= min_sep;
              });
    if (ok) centers.push_back(std::move(c));
  }

  std::vector<Vec> raw;
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < n_per_class; ++i) {
      Vec p = centers[c];
      if (spread > 0.0) p += gaussian_vector(engine, dim, spread);
      raw.push_back(std::move(p));
      labels.push_back(c);
    }
  return assemble("blobs", std::move(raw), std::move(labels), classes, seed, test_fraction);
}

Dataset gen_moons(std::size_t n_per_class, double noise, std::uint64_t seed, double test_fraction) {
  if (n_per_class < 2 || noise < 0.0) throw InvalidConfig("invalid moons parameters");
  Engine engine(derive_key(seed, {0x6D6F6F6EULL}));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec> raw;
  std::vector<std::size_t> labels;
  const double pi = std::numbers::pi;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const double t = pi * static_cast<double>(i) / static_cast<double>(n_per_class - 1);
      Vec p(2);
      if (c == 0)
        p << std::cos(t), std::sin(t);
      else
        p << 1.0 - std::cos(t), 0.5 - std::sin(t);
      p[0] += noise * gauss(engine);
      p[1] += noise * gauss(engine);
      raw.push_back(std::move(p));
      labels.push_back(c);
    }
  return assemble("moons", std::move(raw), std::move(labels), 2, seed, test_fraction);
}

Dataset gen_rings(std::size_t classes, std::size_t n_per_class, double noise, std::uint64_t seed,
                  double test_fraction) {
  if (classes < 2) throw InvalidConfig("rings need at least 2 classes");
  if (n_per_class < 2 || noise < 0.0) throw InvalidConfig("invalid rings parameters");
  Engine engine(derive_key(seed, {0x72696E67ULL}));
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec> raw;
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const double a = angle(engine);
      const double r = static_cast<double>(c + 1) + noise * gauss(engine);
      Vec p(2);
      p << r * std::cos(a), r * std::sin(a);
      raw.push_back(std::move(p));
      labels.push_back(c);
    }
  return assemble("rings", std::move(raw), std::move(labels), classes, seed, test_fraction);
}

void write_csv(const Dataset& ds, std::ostream& out) {
  const std::size_t d = ds.dim();
  for (std::size_t i = 0; i < d; ++i) out << 'x' << i << ',';
  out << "y\n";
  for (const auto& p : ds.points) {
    for (Eigen::Index i = 0; i < p.x.size(); ++i) out << format_double(p.x[i]) << ',';
    out << p.y << '\n';
  }
}

double coordinate_std(const Dataset& ds) {
  if (ds.points.size() < 2) return 0.0;
  const std::size_t d = ds.dim();
  Vec mean = Vec::Zero(d), sq = Vec::Zero(d);
  for (const auto& p : ds.points) mean += p.x;
  mean /= static_cast<double>(ds.points.size());
  for (const auto& p : ds.points) sq += (p.x - mean).cwiseAbs2();
  sq /= static_cast<double>(ds.points.size() - 1);
  return sq.cwiseSqrt().mean();
}

}  // namespace bfa
