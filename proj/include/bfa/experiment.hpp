#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bfa/analysis.hpp"
#include "bfa/attack.hpp"
#include "bfa/model.hpp"
#include "bfa/plot.hpp"

namespace bfa {

struct DatasetSpec {
  std::string kind;  // blobs | moons | rings | idx
  std::size_t classes = 4;
  std::size_t dim = 16;
  std::size_t n_per_class = 300;
  double spread = 0.6;
  double noise = 0.05;
  std::uint64_t seed = 1;
  double test_fraction = 0.5;
  std::string images, labels;  // idx only
  std::size_t max_items = 0;
  std::size_t downscale = 1;
};

struct ModelSpec {
  std::string id;
  std::vector<std::size_t> hidden{32, 32};
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 0;
  TrainHyper hyper;
  std::string path;  // load this file instead of training when set
};

struct PairSpec {
  std::string id, substitute, victim;
};

struct AttackSpec {
  std::string name;
  AttackKind kind = AttackKind::kIFgsm;
  double epsilon = 0.15;
  int iterations = 10;
  std::optional<double> step;
  double mu = 1.0;
  SourcePolicy source_policy = SourcePolicy::kCurrentPrediction;
};

struct BoundarySpec {
  std::optional<double> sigma;  // empty: derived from the dataset
  double gamma = 0.6;
  int t_max = 5;
  int n_points = 20;
};

struct InputSpec {
  std::string split = "test";
  std::size_t max = 200;
};

struct CosineSpec {
  std::vector<CosineProtocol> protocols{CosineProtocol::kAtInput, CosineProtocol::kAtVictimBoundary};
  double cap = kDefaultDistanceCap, tol = kDefaultDistanceTol;
};

struct DistanceSpec {
  std::vector<FirstStep> directions{FirstStep::kIFgsm, FirstStep::kBfFgsm};
  double cap = kDefaultDistanceCap, tol = kDefaultDistanceTol;
};

struct RobustnessSpec {
  std::vector<std::string> models;
  std::optional<double> sigma;  // empty: the boundary sigma
  int n_directions = 20;
  double epsilon = 0.05;
  int iterations = 10;
  double cap = kDefaultDistanceCap, tol = kDefaultDistanceTol;
};

struct TransferSpec {
  bool include_misclassified = false;
};

struct AblationSpec {
  AblationParameter parameter = AblationParameter::kNPoints;
  std::vector<double> grid{1, 5, 10, 20, 40};
  std::string attack;  // name from attacks; empty: first boundary attack
};

struct PlotSpec {
  std::string pair;  // empty: first pair
  std::size_t input_index = 0;
  int grid = 121;
  std::optional<SliceSpec> slice;
  std::string attack;  // boundary attack name; empty: first boundary attack
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  DatasetSpec dataset;
  std::vector<ModelSpec> models;
  std::vector<PairSpec> pairs;
  std::vector<AttackSpec> attacks;
  std::string attack_model;  // substitute for the attack command; empty: first pair's
  BoundarySpec boundary;
  InputSpec inputs;
  std::vector<std::string> studies;  // run by `study` without --kind
  CosineSpec cosine;
  DistanceSpec distance;
  RobustnessSpec robustness;
  TransferSpec transfer;
  AblationSpec ablation;
  PlotSpec plot;

  // Sorted-key compact JSON of every semantic field (output_dir excluded).
  std::string canonical_json() const;
  // 16 hex digits of FNV-1a 64 over canonical_json().
  std::string hash() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> eps;
  std::optional<int> iters;
  std::optional<int> n_points;
  std::optional<double> gamma;
  std::optional<double> sigma;
};

// Throws ParseError for malformed JSON and InvalidConfig for schema or
// cross-reference violations. Nothing is computed.
ExperimentConfig parse_config(const std::string& text, const Overrides& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

extern const char* const kStudyKinds[4];  // transfer, cosine, distance, robustness

// Each command returns the files it wrote, in write order.
std::vector<std::filesystem::path> cmd_train(const ExperimentConfig& cfg);
std::vector<std::filesystem::path> cmd_attack(const ExperimentConfig& cfg, std::size_t begin,
                                              std::size_t end);
// kind empty: every study listed in cfg.studies.
std::vector<std::filesystem::path> cmd_study(const ExperimentConfig& cfg, const std::string& kind);
std::vector<std::filesystem::path> cmd_ablate(const ExperimentConfig& cfg);
std::vector<std::filesystem::path> cmd_plot(const ExperimentConfig& cfg);

std::string tool_version();

}  // namespace bfa
