#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bfa/attack.hpp"
#include "bfa/boundary.hpp"
#include "bfa/model.hpp"

namespace bfa {

using Point2 = std::array<double, 2>;

struct Segment {
  Point2 a;
  Point2 b;
};

// Inputs with more than two coordinates are drawn on the plane through the
// input spanned by x_axis and y_axis; the other coordinates stay fixed.
struct SliceSpec {
  std::size_t x_axis = 0;
  std::size_t y_axis = 1;
};

struct PlotOptions {
  int grid = 121;  // samples per side
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  std::vector<double> loss_levels{0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0};
  std::optional<SliceSpec> slice;  // required when input_dim > 2
  AttackKind baseline = AttackKind::kIFgsm;
  AttackKind boundary_attack = AttackKind::kBfFgsm;
  int width_px = 480;
};

struct LossContour {
  double level = 0.0;
  std::vector<Segment> segments;
};

struct PlotScene {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  std::size_t x_axis = 0, y_axis = 1;
  Vec anchor;                   // the full-dimensional input
  std::size_t label = 0;
  std::size_t substitute_class = 0;
  std::size_t victim_class = 0;
  std::vector<LossContour> loss_contours;       // substitute loss J(., label)
  std::vector<Segment> substitute_boundary;     // boundary of substitute_class's region
  std::vector<Segment> victim_boundary;         // boundary of victim_class's region
  std::vector<BoundarySample> samples;          // full-dimensional boundary samples
  std::string baseline_name, boundary_attack_name;
  std::vector<Vec> baseline_trace, boundary_trace;  // full-dimensional iterates
  std::vector<Point2> project(const std::vector<Vec>& points) const;
  Point2 project(const Vec& p) const;
};

// Segments of the level set {f = level} on a regular grid of values
// f[j * nx + i] at (xs[i], ys[j]). Saddle cells are split by the cell mean.
std::vector<Segment> marching_squares(const std::vector<double>& xs, const std::vector<double>& ys,
                                      const std::vector<double>& f, double level);

// Throws InvalidInput when the input has more than two coordinates and no
// slice is given, or when the slice axes are out of range or equal.
PlotScene build_scene(const ModelParams& substitute, const ModelParams* victim,
                      const LabeledPoint& input, const AttackConfig& attack,
                      const PlotOptions& options);

std::string render_svg(const PlotScene& scene, int width_px = 480);

}  // namespace bfa
