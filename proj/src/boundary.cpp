#include "bfa/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "bfa/error.hpp"

namespace bfa {

void BoundaryConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidConfig("sigma must be > 0");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidConfig("gamma must lie in (0, 1)");
  if (t_max < 1) throw InvalidConfig("t_max must be >= 1");
  if (n_points < 1) throw InvalidConfig("n_points must be >= 1");
}

double shrink_scale(double gamma, int t) {
  double s = 1.0;
  for (int i = 0; i < t; ++i) s *= gamma;
  return s;
}

BoundarySample search_boundary_point(const ModelParams& model, const Vec& x,
                                     std::size_t source_class, std::size_t y_attack,
                                     const BoundaryConfig& cfg, RngStream stream) {
  cfg.validate();
  Engine engine = stream.engine();
  BoundarySample s;
  s.direction = gaussian_vector(engine, x.size(), cfg.sigma);
  double scale = 1.0;
  for (int t = 0; t <= cfg.t_max; ++t, scale *= cfg.gamma) {
    Vec probe = x + scale * s.direction;
    ++s.evaluations;
    if (predict(model, probe) == source_class) {
      s.point = std::move(probe);
      s.shrink_count = t;
      break;
    }
  }
  if (s.point.size() == 0) {
    s.point = x;
    s.shrink_count = cfg.t_max;
    s.fell_back = true;
  }
  s.gradient = input_gradient(model, s.point, y_attack);
  ++s.evaluations;
  return s;
}

BoundarySample sample_boundary_point(const ModelParams& model, const Vec& x,
                                     std::size_t source_class, std::size_t y_attack,
                                     const BoundaryConfig& cfg, RngStream stream) {
  if (predict(model, x) != source_class)
    throw ContractError("sample_boundary_point: x is not classified as the source class");
  return search_boundary_point(model, x, source_class, y_attack, cfg, stream);
}

BoundaryGradient averaged_boundary_gradient(const ModelParams& model, const Vec& x,
                                            std::size_t y_attack, std::size_t source_class,
                                            const BoundaryConfig& cfg, RngStream stream,
                                            bool check_source) {
  cfg.validate();
  if (check_source && predict(model, x) != source_class)
    throw ContractError("averaged_boundary_gradient: x is not classified as the source class");
  BoundaryGradient out;
  for (int i = 0; i < cfg.n_points; ++i) {
    BoundarySample s =
        search_boundary_point(model, x, source_class, y_attack, cfg, stream.child(static_cast<std::uint64_t>(i)));
    if (i == 0)
      out.mean = std::move(s.gradient);
    else
      out.mean += s.gradient;
    out.fallback_count += s.fell_back;
    out.evaluations += s.evaluations;
    out.total_shrink += s.shrink_count;
  }
  if (cfg.n_points > 1) out.mean /= static_cast<double>(cfg.n_points);
  return out;
}

DistanceMeasurement boundary_distance(const ModelParams& model, const Vec& x, const Vec& direction,
                                      double cap, double tol, DirectionKind kind) {
  if (direction.size() != x.size()) throw InvalidInput("direction has the wrong dimension");
  const double norm = direction.size() ? direction.cwiseAbs().maxCoeff() : 0.0;
  if (!(norm > 0.0) || !std::isfinite(norm)) throw InvalidInput("direction must be non-zero and finite");
  if (!(cap > 0.0) || !(tol > 0.0)) throw InvalidInput("cap and tol must be > 0");

  const Vec u = direction / norm;
  DistanceMeasurement m;
  m.direction_kind = kind;
  const std::size_t start = predict(model, x);
  m.evaluations = 1;
  auto flipped = [&](double s) {
    ++m.evaluations;
    return predict(model, x + s * u) != start;
  };

  // Probes sit on the lattice n * tol (clamped to cap), so the bracket a
  // flip resolves to does not depend on cap.
  using Step = std::int64_t;
  const auto cap_steps = static_cast<Step>(std::ceil(cap / tol));
  auto at = [&](Step n) { return std::min(static_cast<double>(n) * tol, cap); };
  Step lo = 0, hi = -1;
  for (Step n = 1; n < cap_steps; n *= 2) {
    if (flipped(at(n))) {
      hi = n;
      break;
    }
    lo = n;
  }
  if (hi < 0) {
    if (!flipped(cap)) {
      m.distance = cap;
      m.censored = true;
      m.inside = cap;
      return m;
    }
    hi = cap_steps;
  }
  while (hi - lo > 1) {
    const Step mid = lo + (hi - lo) / 2;
    if (flipped(at(mid)))
      hi = mid;
    else
      lo = mid;
  }
  m.distance = at(hi);
  m.inside = at(lo);
  return m;
}

DistanceMeasurement natural_direction_distance(const ModelParams& model, const Vec& x, double sigma,
                                               RngStream stream, double cap, double tol) {
  if (!(sigma > 0.0)) throw InvalidInput("sigma must be > 0");
  Engine engine = stream.engine();
  Vec d = gaussian_vector(engine, x.size(), sigma);
  return boundary_distance(model, x, d, cap, tol, DirectionKind::kNatural);
}

}  // namespace bfa
