#include "bfa/attack.hpp"

#include <cmath>

#include "bfa/error.hpp"

namespace bfa {

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kIFgsm: return "i_fgsm";
    case AttackKind::kMiFgsm: return "mi_fgsm";
    case AttackKind::kBfFgsm: return "bf_fgsm";
    case AttackKind::kBfMiFgsm: return "bf_mi_fgsm";
  }
  return "?";
}

AttackKind attack_kind_from_string(const std::string& name) {
  if (name == "i_fgsm") return AttackKind::kIFgsm;
  if (name == "mi_fgsm") return AttackKind::kMiFgsm;
  if (name == "bf_fgsm") return AttackKind::kBfFgsm;
  if (name == "bf_mi_fgsm") return AttackKind::kBfMiFgsm;
  throw InvalidConfig("unknown attack '" + name + "'");
}

bool uses_boundary(AttackKind kind) {
  return kind == AttackKind::kBfFgsm || kind == AttackKind::kBfMiFgsm;
}

bool uses_momentum(AttackKind kind) {
  return kind == AttackKind::kMiFgsm || kind == AttackKind::kBfMiFgsm;
}

void AttackConfig::validate(AttackKind kind) const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidConfig("epsilon must be >= 0");
  if (iterations < 1) throw InvalidConfig("iterations must be >= 1");
  const double a = step_size();
  if (!(a >= 0.0) || a > epsilon) throw InvalidConfig("step must lie in [0, epsilon]");
  if (!(mu >= 0.0)) throw InvalidConfig("mu must be >= 0");
  if (uses_boundary(kind)) {
    if (!boundary) throw InvalidConfig(to_string(kind) + " requires a boundary configuration");
    boundary->validate();
  }
}

Vec clip_ball(const Vec& candidate, const Vec& origin, double epsilon) {
  if (candidate.size() != origin.size()) throw InvalidInput("clip_ball: dimension mismatch");
  Vec out(candidate.size());
  for (Eigen::Index i = 0; i < candidate.size(); ++i) {
    const double o = origin[i];
    double lo = o - epsilon, hi = o + epsilon;
    while (o - lo > epsilon) lo = std::nextafter(lo, o);
    while (hi - o > epsilon) hi = std::nextafter(hi, o);
    double v = std::min(std::max(candidate[i], lo), hi);
    out[i] = std::min(std::max(v, 0.0), 1.0);
  }
  return out;
}

Vec sign(const Vec& v) {
  return v.unaryExpr([](double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); });
}

AttackResult run_attack(AttackKind kind, const ModelParams& model, const Vec& x, std::size_t y,
                        const AttackConfig& cfg) {
  cfg.validate(kind);
  if (static_cast<std::size_t>(x.size()) != model.arch.input_dim)
    throw InvalidInput("attack input has the wrong dimension");
  if (y >= model.arch.num_classes) throw InvalidInput("attack label out of range");

  const double alpha = cfg.step_size();
  const bool boundary = uses_boundary(kind);
  const bool momentum = uses_momentum(kind);
  const RngStream base(cfg.seed);

  AttackResult r;
  Vec adv = x;
  Vec accumulator = Vec::Zero(x.size());
  if (cfg.record_trace) r.iterate_trace.push_back(adv);

  for (int t = 0; t < cfg.iterations; ++t) {
    Vec g;
    if (boundary) {
      const std::size_t current = predict(model, adv);
      ++r.queries;
      const std::size_t source = cfg.source_policy == SourcePolicy::kGroundTruth ? y : current;
      BoundaryGradient bg = averaged_boundary_gradient(
          model, adv, y, source, *cfg.boundary, base.child(static_cast<std::uint64_t>(t)), false);
      r.queries += bg.evaluations;
      r.fallback_count += bg.fallback_count;
      r.total_shrink += bg.total_shrink;
      g = std::move(bg.mean);
    } else {
      g = input_gradient(model, adv, y);
      ++r.queries;
    }
    if (momentum) {
      const double l1 = g.cwiseAbs().sum();
      accumulator *= cfg.mu;
      if (l1 > 0.0) accumulator += g / l1;
      g = accumulator;
    }
    adv = clip_ball(adv + alpha * sign(g), x, cfg.epsilon);
    if (cfg.record_trace) r.iterate_trace.push_back(adv);
  }
  r.success_substitute = predict(model, adv) != y;
  r.adversarial = std::move(adv);
  return r;
}

AttackResult i_fgsm(const ModelParams& model, const Vec& x, std::size_t y, const AttackConfig& cfg) {
  return run_attack(AttackKind::kIFgsm, model, x, y, cfg);
}

AttackResult mi_fgsm(const ModelParams& model, const Vec& x, std::size_t y, const AttackConfig& cfg) {
  return run_attack(AttackKind::kMiFgsm, model, x, y, cfg);
}

AttackResult bf_fgsm(const ModelParams& model, const Vec& x, std::size_t y, const AttackConfig& cfg) {
  return run_attack(AttackKind::kBfFgsm, model, x, y, cfg);
}

AttackResult bf_mi_fgsm(const ModelParams& model, const Vec& x, std::size_t y,
                        const AttackConfig& cfg) {
  return run_attack(AttackKind::kBfMiFgsm, model, x, y, cfg);
}

}  // namespace bfa
