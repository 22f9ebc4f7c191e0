#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bfa/boundary.hpp"
#include "bfa/model.hpp"

namespace bfa {

enum class AttackKind { kIFgsm, kMiFgsm, kBfFgsm, kBfMiFgsm };

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& name);
bool uses_boundary(AttackKind kind);
bool uses_momentum(AttackKind kind);

// Which region the boundary search stays in once the iterate is misclassified.
enum class SourcePolicy {
  kCurrentPrediction,  // region of the iterate's current prediction
  kGroundTruth,        // always the ground-truth region
};

struct AttackConfig {
  double epsilon = 16.0 / 255.0;
  int iterations = 10;
  std::optional<double> step;  // defaults to epsilon / iterations
  double mu = 1.0;             // momentum decay; ignored by the non-momentum variants
  std::optional<BoundaryConfig> boundary;
  std::uint64_t seed = 0;
  SourcePolicy source_policy = SourcePolicy::kCurrentPrediction;
  bool record_trace = false;

  double step_size() const { return step ? *step : epsilon / iterations; }
  void validate(AttackKind kind) const;  // throws InvalidConfig
};

struct AttackResult {
  Vec adversarial;
  bool success_substitute = false;
  std::vector<Vec> iterate_trace;  // x'_0 .. x'_T when record_trace is set
  int fallback_count = 0;
  long queries = 0;
  long total_shrink = 0;
};

// Clamp to [origin - eps, origin + eps], then to [0, 1]. The ball bounds are
// nudged inward when needed so |result - origin| <= eps holds in floating point.
Vec clip_ball(const Vec& candidate, const Vec& origin, double epsilon);

// Coordinate-wise sign with sign(0) = 0.
Vec sign(const Vec& v);

AttackResult run_attack(AttackKind kind, const ModelParams& model, const Vec& x, std::size_t y,
                        const AttackConfig& cfg);

AttackResult i_fgsm(const ModelParams& model, const Vec& x, std::size_t y, const AttackConfig& cfg);
AttackResult mi_fgsm(const ModelParams& model, const Vec& x, std::size_t y, const AttackConfig& cfg);
AttackResult bf_fgsm(const ModelParams& model, const Vec& x, std::size_t y, const AttackConfig& cfg);
AttackResult bf_mi_fgsm(const ModelParams& model, const Vec& x, std::size_t y,
                        const AttackConfig& cfg);

}  // namespace bfa
