#pragma once

#include <cstddef>

#include "bfa/model.hpp"
#include "bfa/rng.hpp"

namespace bfa {

struct BoundaryConfig {
  double sigma = 20.0 / 255.0;  // std of the random offset, unit-cube scale
  double gamma = 0.6;           // shrinkage factor in (0, 1)
  int t_max = 5;                // maximum number of shrinkages
  int n_points = 20;            // boundary points averaged per gradient

  void validate() const;  // throws InvalidConfig
};

// gamma^t by repeated multiplication, the same arithmetic the sampler uses.
double shrink_scale(double gamma, int t);

struct BoundarySample {
  Vec point;      // x + gamma^t d, or x on fallback
  Vec direction;  // the raw Gaussian offset d
  int shrink_count = 0;
  Vec gradient;  // d J(point, y_attack) / d point
  bool fell_back = false;
  int evaluations = 0;  // predictions plus the gradient
};

// Draws d ~ N(0, sigma^2 I) and shrinks x + gamma^t d until it is back inside
// source_class. Throws ContractError when x itself is not in source_class.
// The probe is not clipped to the unit cube.
BoundarySample sample_boundary_point(const ModelParams& model, const Vec& x,
                                     std::size_t source_class, std::size_t y_attack,
                                     const BoundaryConfig& cfg, RngStream stream);

// Same search without the precondition check. When x lies outside
// source_class the search may still land inside it; otherwise it falls back.
BoundarySample search_boundary_point(const ModelParams& model, const Vec& x,
                                     std::size_t source_class, std::size_t y_attack,
                                     const BoundaryConfig& cfg, RngStream stream);

struct BoundaryGradient {
  Vec mean;  // G: average of the per-sample gradients
  int fallback_count = 0;
  int evaluations = 0;
  int total_shrink = 0;
};

// Sample i consumes stream.child(i), so results do not depend on evaluation order.
BoundaryGradient averaged_boundary_gradient(const ModelParams& model, const Vec& x,
                                            std::size_t y_attack, std::size_t source_class,
                                            const BoundaryConfig& cfg, RngStream stream,
                                            bool check_source = true);

enum class DirectionKind { kSignGradient, kNatural, kOther };

struct DistanceMeasurement {
  double distance = 0.0;  // L-inf distance to the first prediction flip
  bool censored = false;  // no flip in (0, cap]; distance == cap
  DirectionKind direction_kind = DirectionKind::kSignGradient;
  double inside = 0.0;    // largest probed step still predicting the start class
  int evaluations = 0;
};

inline constexpr double kDefaultDistanceCap = 4.0;
inline constexpr double kDefaultDistanceTol = 1e-4;

// Steps along u = direction / ||direction||_inf, so the step length is the
// L-inf distance. Doubling from tol brackets the first flip, bisection
// narrows it to width <= tol.
DistanceMeasurement boundary_distance(const ModelParams& model, const Vec& x, const Vec& direction,
                                      double cap = kDefaultDistanceCap,
                                      double tol = kDefaultDistanceTol,
                                      DirectionKind kind = DirectionKind::kSignGradient);

DistanceMeasurement natural_direction_distance(const ModelParams& model, const Vec& x, double sigma,
                                               RngStream stream, double cap = kDefaultDistanceCap,
                                               double tol = kDefaultDistanceTol);

}  // namespace bfa
