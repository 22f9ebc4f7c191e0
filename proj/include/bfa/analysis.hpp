#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bfa/attack.hpp"
#include "bfa/boundary.hpp"
#include "bfa/model.hpp"
#include "bfa/stats.hpp"

namespace bfa {

using ModelRef = std::shared_ptr<const ModelParams>;

struct ModelPair {
  ModelRef substitute;
  ModelRef victim;
  std::string pair_id;

  // Same input_dim and num_classes. Throws InvalidConfig.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Gradient cosine similarity between substitute and victim.

enum class CosineProtocol {
  kAtInput,           // victim gradient taken at x
  kAtVictimBoundary,  // victim gradient at its own boundary point along G
};

std::string to_string(CosineProtocol p);
CosineProtocol cosine_protocol_from_string(const std::string& name);

struct CosineReport {
  CosineProtocol protocol = CosineProtocol::kAtVictimBoundary;
  int n_points = 0;
  double mean_original = 0.0;
  double mean_boundary_n1 = 0.0;
  double mean_boundary_nN = 0.0;
  double se_original = 0.0;
  double se_boundary_n1 = 0.0;
  double se_boundary_nN = 0.0;
  MeanSe gain_nN;  // paired (boundary_nN - original)
  std::size_t n_inputs = 0;
  std::size_t processed = 0;
  std::size_t skipped = 0;
  std::size_t victim_censored = 0;  // boundary search along G found no flip; gradient taken at x
  std::vector<double> original, boundary_n1, boundary_nN;  // per processed input
};

// Inputs misclassified by either model are skipped. Throws EmptyStudy when
// nothing remains.
CosineReport cosine_study(const ModelPair& pair, const std::vector<LabeledPoint>& inputs,
                          const BoundaryConfig& cfg, CosineProtocol protocol, std::uint64_t seed,
                          double cap = kDefaultDistanceCap, double tol = kDefaultDistanceTol);

// ---------------------------------------------------------------------------
// Victim boundary distance along first-step attack directions.

enum class FirstStep {
  kIFgsm,       // sign of the substitute gradient at x
  kBfFgsm,      // sign of the averaged boundary gradient at x
  kRandomSign,  // uniformly random +-1 vector (reference)
};

std::string to_string(FirstStep s);
FirstStep first_step_from_string(const std::string& name);

// First-step direction of an attack on the substitute.
Vec first_step_direction(FirstStep step, const ModelParams& substitute, const Vec& x, std::size_t y,
                         const BoundaryConfig& cfg, RngStream stream);

struct DistanceCell {
  MeanSe distance;  // over non-censored processed inputs
  std::size_t processed = 0;
  std::size_t skipped = 0;   // misclassified, zero direction, or censored
  std::size_t censored = 0;  // subset of skipped
  std::vector<double> per_input;  // NaN where excluded, aligned with the inputs
};

struct DistanceTable {
  std::vector<std::string> attacks;
  std::vector<std::string> victims;
  std::vector<std::vector<DistanceCell>> cells;  // [attack][victim]
};

DistanceTable distance_study(const std::vector<ModelPair>& pairs,
                             const std::vector<LabeledPoint>& inputs,
                             const std::vector<FirstStep>& attacks, const BoundaryConfig& cfg,
                             std::uint64_t seed, double cap = kDefaultDistanceCap,
                             double tol = kDefaultDistanceTol);

// Paired (a - b) over inputs where both distances are present.
MeanSe paired_distance_gap(const DistanceCell& a, const DistanceCell& b);

// ---------------------------------------------------------------------------
// Robustness vs. boundary distance along natural directions.

struct RobustnessConfig {
  double sigma = 0.1;  // std of the natural directions
  int n_directions = 20;
  double epsilon = 0.15;  // white-box I-FGSM budget for robust accuracy
  int iterations = 10;
  double cap = kDefaultDistanceCap;
  double tol = kDefaultDistanceTol;
};

struct RobustnessRow {
  std::string model_id;
  MeanSe natural_distance;
  MeanSe adversarial_distance;
  double robust_accuracy = 0.0;
  double clean_accuracy = 0.0;
  std::size_t natural_censored = 0;
  std::size_t adversarial_censored = 0;
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;
  std::optional<double> spearman_natural_vs_robust;  // empty: undefined (no spread)
};

// Throws InvalidConfig with fewer than two models.
RobustnessReport robustness_study(const std::vector<ModelRef>& models,
                                  const std::vector<std::string>& model_ids,
                                  const std::vector<LabeledPoint>& inputs,
                                  const RobustnessConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Transfer success matrix.

struct NamedAttack {
  std::string name;
  AttackKind kind = AttackKind::kIFgsm;
  AttackConfig cfg;
};

struct TransferCell {
  std::size_t successes = 0;
  std::size_t attempts = 0;
  double rate() const { return attempts ? static_cast<double>(successes) / attempts : 0.0; }
};

struct TransferMatrix {
  std::vector<std::string> attacks;
  std::vector<std::string> victims;             // "<pair>:substitute", "<pair>:victim", ...
  std::vector<std::vector<double>> success;     // [attack][victim], in [0, 1]
  std::vector<std::vector<bool>> whitebox_flags;
  std::vector<std::vector<TransferCell>> counts;
  // Per-input outcomes (1 = fooled), aligned across attacks for each column.
  std::vector<std::vector<std::vector<double>>> outcomes;
  std::vector<double> mean_queries;  // per attack
  std::vector<double> fallback_rate;  // per attack: fallbacks / boundary samples
  std::vector<double> mean_shrink;    // per attack: shrink count per boundary sample
};

struct TransferOptions {
  bool include_misclassified = false;  // keep inputs the substitute already gets wrong
};

TransferMatrix transfer_eval(const std::vector<ModelPair>& pairs,
                             const std::vector<LabeledPoint>& inputs,
                             const std::vector<NamedAttack>& attacks, std::uint64_t seed,
                             const TransferOptions& options = {});

// Concatenated black-box outcomes of one attack across every victim column.
std::vector<double> black_box_outcomes(const TransferMatrix& m, const std::string& attack);
std::vector<double> white_box_outcomes(const TransferMatrix& m, const std::string& attack);

// ---------------------------------------------------------------------------
// Hyperparameter ablation.

enum class AblationParameter { kGamma, kNPoints };

std::string to_string(AblationParameter p);
AblationParameter ablation_parameter_from_string(const std::string& name);

struct AblationPoint {
  double value = 0.0;
  MeanSe black_box;  // pooled over every victim column
  double white_box = 0.0;
  double mean_queries = 0.0;
  double fallback_rate = 0.0;
  double mean_shrink = 0.0;
};

struct AblationCurve {
  AblationParameter parameter = AblationParameter::kNPoints;
  std::string attack;
  std::vector<AblationPoint> points;
};

AblationCurve ablate(AblationParameter parameter, const std::vector<double>& grid,
                     const NamedAttack& fixed, const std::vector<ModelPair>& pairs,
                     const std::vector<LabeledPoint>& inputs, std::uint64_t seed);

}  // namespace bfa
