#include "bfa/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "bfa/error.hpp"
#include "bfa/format.hpp"
#include "bfa/rng.hpp"

namespace bfa {

namespace {

constexpr std::uint64_t kPlotStream = 0x706C6F74;

double margin(const Vec& logits, std::size_t c) {
  double best_other = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (static_cast<std::size_t>(j) != c) best_other = std::max(best_other, logits[j]);
  }
  return logits[static_cast<Eigen::Index>(c)] - best_other;
}

Point2 lerp(const Point2& a, const Point2& b, double fa, double fb, double level) {
  double t = fb == fa ? 0.5 : (level - fa) / (fb - fa);
  t = std::clamp(t, 0.0, 1.0);
  return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string path_data(const std::vector<Segment>& segs, const PlotScene& s, int w) {
  auto X = [&](double x) { return (x - s.xmin) / (s.xmax - s.xmin) * w; };
  auto Y = [&](double y) { return (1.0 - (y - s.ymin) / (s.ymax - s.ymin)) * w; };
  std::string d;
  for (const auto& g : segs) {
    d += "M" + px(X(g.a[0])) + " " + px(Y(g.a[1])) + "L" + px(X(g.b[0])) + " " + px(Y(g.b[1]));
  }
  return d;
}

std::string polyline(const std::vector<Point2>& pts, const PlotScene& s, int w) {
  std::string out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) out += ' ';
    out += px((pts[i][0] - s.xmin) / (s.xmax - s.xmin) * w) + "," +
           px((1.0 - (pts[i][1] - s.ymin) / (s.ymax - s.ymin)) * w);
  }
  return out;
}

}  // namespace

Point2 PlotScene::project(const Vec& p) const {
  return {p[static_cast<Eigen::Index>(x_axis)], p[static_cast<Eigen::Index>(y_axis)]};
}

std::vector<Point2> PlotScene::project(const std::vector<Vec>& points) const {
  std::vector<Point2> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(project(p));
  return out;
}

std::vector<Segment> marching_squares(const std::vector<double>& xs, const std::vector<double>& ys,
                                      const std::vector<double>& f, double level) {
  const std::size_t nx = xs.size(), ny = ys.size();
  if (nx < 2 || ny < 2 || f.size() != nx * ny) {
    throw InvalidInput("marching_squares: grid needs at least 2x2 values matching the axes");
  }
  std::vector<Segment> out;
  for (std::size_t j = 0; j + 1 < ny; ++j) {
    for (std::size_t i = 0; i + 1 < nx; ++i) {
      // corners counter-clockwise from bottom-left
      const Point2 p[4] = {{xs[i], ys[j]}, {xs[i + 1], ys[j]}, {xs[i + 1], ys[j + 1]}, {xs[i], ys[j + 1]}};
      const double v[4] = {f[j * nx + i], f[j * nx + i + 1], f[(j + 1) * nx + i + 1], f[(j + 1) * nx + i]};
      bool above[4];
      for (int k = 0; k < 4; ++k) above[k] = v[k] > level;
      Point2 cross[4];
      bool has[4];
      int count = 0;
      for (int e = 0; e < 4; ++e) {
        const int a = e, b = (e + 1) % 4;
        has[e] = above[a] != above[b];
        if (has[e]) {
          cross[e] = lerp(p[a], p[b], v[a], v[b], level);
          ++count;
        }
      }
      if (count == 2) {
        int first = -1, second = -1;
        for (int e = 0; e < 4; ++e) {
          if (!has[e]) continue;
          (first < 0 ? first : second) = e;
        }
        out.push_back({cross[first], cross[second]});
      } else if (count == 4) {
        const bool centre = (v[0] + v[1] + v[2] + v[3]) / 4.0 > level;
        if (centre == above[0]) {
          out.push_back({cross[0], cross[1]});
          out.push_back({cross[2], cross[3]});
        } else {
          out.push_back({cross[3], cross[0]});
          out.push_back({cross[1], cross[2]});
        }
      }
    }
  }
  return out;
}

PlotScene build_scene(const ModelParams& substitute, const ModelParams* victim,
                      const LabeledPoint& input, const AttackConfig& attack,
                      const PlotOptions& options) {
  const auto d = static_cast<std::size_t>(input.x.size());
  if (d != substitute.arch.input_dim) throw InvalidInput("plot: input dimension does not match the substitute");
  if (victim && victim->arch.input_dim != d) throw InvalidInput("plot: input dimension does not match the victim");
  if (d < 2) throw InvalidInput("plot: inputs need at least two coordinates");
  SliceSpec slice;
  if (options.slice) {
    slice = *options.slice;
  } else if (d > 2) {
    throw InvalidInput("plot: input has " + std::to_string(d) + " coordinates; a slice is required");
  }
  if (slice.x_axis >= d || slice.y_axis >= d || slice.x_axis == slice.y_axis) {
    throw InvalidInput("plot: slice axes must be distinct coordinates below " + std::to_string(d));
  }
  if (options.grid < 2) throw InvalidInput("plot: grid must be at least 2");
  if (!(options.xmax > options.xmin) || !(options.ymax > options.ymin)) {
    throw InvalidInput("plot: empty plotting window");
  }
  if (input.y >= substitute.arch.num_classes) throw InvalidInput("plot: label out of range");

  PlotScene s;
  s.xmin = options.xmin;
  s.xmax = options.xmax;
  s.ymin = options.ymin;
  s.ymax = options.ymax;
  s.x_axis = slice.x_axis;
  s.y_axis = slice.y_axis;
  s.anchor = input.x;
  s.label = input.y;
  s.substitute_class = predict(substitute, input.x);
  s.victim_class = victim ? predict(*victim, input.x) : 0;

  const auto n = static_cast<std::size_t>(options.grid);
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    xs[i] = options.xmin + t * (options.xmax - options.xmin);
    ys[i] = options.ymin + t * (options.ymax - options.ymin);
  }
  std::vector<double> loss_grid(n * n), sub_margin(n * n), vic_margin(victim ? n * n : 0);
  Vec p = input.x;
  const auto xa = static_cast<Eigen::Index>(slice.x_axis), ya = static_cast<Eigen::Index>(slice.y_axis);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      p[xa] = xs[i];
      p[ya] = ys[j];
      const Vec logits = forward(substitute, p);
      loss_grid[j * n + i] = cross_entropy(logits, input.y);
      sub_margin[j * n + i] = margin(logits, s.substitute_class);
      if (victim) vic_margin[j * n + i] = margin(forward(*victim, p), s.victim_class);
    }
  }
  for (double level : options.loss_levels) {
    s.loss_contours.push_back({level, marching_squares(xs, ys, loss_grid, level)});
  }
  s.substitute_boundary = marching_squares(xs, ys, sub_margin, 0.0);
  if (victim) s.victim_boundary = marching_squares(xs, ys, vic_margin, 0.0);

  AttackConfig cfg = attack;
  if (!cfg.boundary) cfg.boundary = BoundaryConfig{};
  cfg.record_trace = true;
  cfg.boundary->validate();
  const RngStream stream(derive_key(cfg.seed, {kPlotStream}));
  for (int i = 0; i < cfg.boundary->n_points; ++i) {
    s.samples.push_back(sample_boundary_point(substitute, input.x, s.substitute_class, input.y,
                                              *cfg.boundary, stream.child(static_cast<std::uint64_t>(i))));
  }
  s.baseline_name = to_string(options.baseline);
  s.boundary_attack_name = to_string(options.boundary_attack);
  s.baseline_trace = run_attack(options.baseline, substitute, input.x, input.y, cfg).iterate_trace;
  s.boundary_trace = run_attack(options.boundary_attack, substitute, input.x, input.y, cfg).iterate_trace;
  return s;
}

std::string render_svg(const PlotScene& s, int w) {
  if (w <= 0) throw InvalidInput("render_svg: width must be positive");
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << w
    << "\" viewBox=\"0 0 " << w << ' ' << w << "\">\n";
  o << "<rect width=\"" << w << "\" height=\"" << w << "\" fill=\"white\"/>\n";
  o << "<g fill=\"none\" stroke=\"#9aa5b1\" stroke-width=\"0.8\">\n";
  for (const auto& c : s.loss_contours) {
    if (c.segments.empty()) continue;
    o << "<path class=\"loss\" data-level=\"" << format_double(c.level) << "\" d=\"" << path_data(c.segments, s, w)
      << "\"/>\n";
  }
  o << "</g>\n";
  if (!s.substitute_boundary.empty()) {
    o << "<path class=\"substitute-boundary\" fill=\"none\" stroke=\"black\" stroke-width=\"2\" d=\""
      << path_data(s.substitute_boundary, s, w) << "\"/>\n";
  }
  if (!s.victim_boundary.empty()) {
    o << "<path class=\"victim-boundary\" fill=\"none\" stroke=\"black\" stroke-width=\"2\" "
         "stroke-dasharray=\"6 4\" d=\""
      << path_data(s.victim_boundary, s, w) << "\"/>\n";
  }
  auto trace = [&](const char* cls, const char* colour, const std::vector<Vec>& pts) {
    if (pts.empty()) return;
    o << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << colour
      << "\" stroke-width=\"1.5\" points=\"" << polyline(s.project(pts), s, w) << "\"/>\n";
  };
  trace("trajectory-baseline", "#d97706", s.baseline_trace);
  trace("trajectory-boundary", "#059669", s.boundary_trace);
  o << "<g class=\"boundary-points\" fill=\"#2563eb\">\n";
  for (const auto& b : s.samples) {
    const Point2 q = s.project(b.point);
    const auto xy = polyline({q}, s, w);
    const auto comma = xy.find(',');
    o << "<circle cx=\"" << xy.substr(0, comma) << "\" cy=\"" << xy.substr(comma + 1) << "\" r=\"2.5\"/>\n";
  }
  o << "</g>\n";
  {
    const auto xy = polyline({s.project(s.anchor)}, s, w);
    const auto comma = xy.find(',');
    o << "<circle class=\"input\" cx=\"" << xy.substr(0, comma) << "\" cy=\"" << xy.substr(comma + 1)
      << "\" r=\"4\" fill=\"#dc2626\"/>\n";
  }
  o << "<g font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<text x=\"8\" y=\"16\">label " << s.label << ", substitute class " << s.substitute_class
    << ", victim class " << s.victim_class << "</text>\n"
    << "<text x=\"8\" y=\"30\" fill=\"#d97706\">" << s.baseline_name << "</text>\n"
    << "<text x=\"8\" y=\"44\" fill=\"#059669\">" << s.boundary_attack_name << "</text>\n"
    << "</g>\n</svg>\n";
  return o.str();
}

}  // namespace bfa
