#include "bfa/analysis.hpp"

#include <cmath>
#include <limits>

#include "bfa/error.hpp"
#include "bfa/parallel.hpp"

namespace bfa {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::span<const double> view(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

double cos_vec(const Vec& a, const Vec& b) { return cosine(view(a), view(b)); }

BoundaryConfig with_points(BoundaryConfig cfg, int n) {
  cfg.n_points = n;
  return cfg;
}

}  // namespace

void ModelPair::validate() const {
  if (!substitute || !victim) throw InvalidConfig("model pair '" + pair_id + "' is incomplete");
  if (substitute->arch.input_dim != victim->arch.input_dim ||
      substitute->arch.num_classes != victim->arch.num_classes)
    throw InvalidConfig("model pair '" + pair_id + "' disagrees on input_dim or num_classes");
}

std::string to_string(CosineProtocol p) {
  return p == CosineProtocol::kAtInput ? "at_input" : "at_victim_boundary";
}

CosineProtocol cosine_protocol_from_string(const std::string& name) {
  if (name == "at_input") return CosineProtocol::kAtInput;
  if (name == "at_victim_boundary") return CosineProtocol::kAtVictimBoundary;
  throw InvalidConfig("unknown cosine protocol '" + name + "'");
}

CosineReport cosine_study(const ModelPair& pair, const std::vector<LabeledPoint>& inputs,
                          const BoundaryConfig& cfg, CosineProtocol protocol, std::uint64_t seed,
                          double cap, double tol) {
  pair.validate();
  cfg.validate();
  const ModelParams& sub = *pair.substitute;
  const ModelParams& vic = *pair.victim;

  struct Row {
    bool used = false;
    bool censored = false;
    double original = 0.0, n1 = 0.0, nN = 0.0;
  };
  std::vector<Row> rows(inputs.size());

  parallel_for(inputs.size(), [&](std::size_t i) {
    const LabeledPoint& p = inputs[i];
    if (predict(sub, p.x) != p.y || predict(vic, p.x) != p.y) return;
    Row& row = rows[i];
    row.used = true;
    const Vec g_sub = input_gradient(sub, p.x, p.y);
    const Vec g_vic = input_gradient(vic, p.x, p.y);
    row.original = cos_vec(g_sub, g_vic);

    const RngStream stream(derive_key(seed, {i}));
    const Vec g1 = averaged_boundary_gradient(sub, p.x, p.y, p.y, with_points(cfg, 1), stream).mean;
    const Vec gN = averaged_boundary_gradient(sub, p.x, p.y, p.y, cfg, stream).mean;

    auto victim_side = [&](const Vec& G) -> Vec {
      if (protocol == CosineProtocol::kAtInput) return g_vic;
      if (G.cwiseAbs().maxCoeff() == 0.0) return g_vic;
      const DistanceMeasurement m = boundary_distance(vic, p.x, G, cap, tol);
      if (m.censored) {
        row.censored = true;
        return g_vic;
      }
      const Vec u = G / G.cwiseAbs().maxCoeff();
      return input_gradient(vic, p.x + m.inside * u, p.y);
    };
    row.n1 = cos_vec(g1, victim_side(g1));
    row.nN = cos_vec(gN, victim_side(gN));
  });

  CosineReport r;
  r.protocol = protocol;
  r.n_points = cfg.n_points;
  r.n_inputs = inputs.size();
  for (const Row& row : rows) {
    if (!row.used) {
      ++r.skipped;
      continue;
    }
    ++r.processed;
    r.victim_censored += row.censored;
    r.original.push_back(row.original);
    r.boundary_n1.push_back(row.n1);
    r.boundary_nN.push_back(row.nN);
  }
  if (r.processed == 0) throw EmptyStudy("cosine study: every input was misclassified by a model");
  const MeanSe o = mean_se(r.original), a = mean_se(r.boundary_n1), b = mean_se(r.boundary_nN);
  r.mean_original = o.mean;
  r.se_original = o.se;
  r.mean_boundary_n1 = a.mean;
  r.se_boundary_n1 = a.se;
  r.mean_boundary_nN = b.mean;
  r.se_boundary_nN = b.se;
  r.gain_nN = paired_difference(r.boundary_nN, r.original);
  return r;
}

std::string to_string(FirstStep s) {
  switch (s) {
    case FirstStep::kIFgsm: return "i_fgsm";
    case FirstStep::kBfFgsm: return "bf_fgsm";
    case FirstStep::kRandomSign: return "random_sign";
  }
  return "?";
}

FirstStep first_step_from_string(const std::string& name) {
  if (name == "i_fgsm") return FirstStep::kIFgsm;
  if (name == "bf_fgsm") return FirstStep::kBfFgsm;
  if (name == "random_sign") return FirstStep::kRandomSign;
  throw InvalidConfig("unknown first-step direction '" + name + "'");
}

Vec first_step_direction(FirstStep step, const ModelParams& substitute, const Vec& x, std::size_t y,
                         const BoundaryConfig& cfg, RngStream stream) {
  switch (step) {
    case FirstStep::kIFgsm:
      return sign(input_gradient(substitute, x, y));
    case FirstStep::kBfFgsm:
      return sign(averaged_boundary_gradient(substitute, x, y, predict(substitute, x), cfg, stream).mean);
    case FirstStep::kRandomSign: {
      Engine engine = stream.engine();
      std::bernoulli_distribution coin(0.5);
      Vec d(x.size());
      for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = coin(engine) ? 1.0 : -1.0;
      return d;
    }
  }
  return Vec();
}

DistanceTable distance_study(const std::vector<ModelPair>& pairs,
                             const std::vector<LabeledPoint>& inputs,
                             const std::vector<FirstStep>& attacks, const BoundaryConfig& cfg,
                             std::uint64_t seed, double cap, double tol) {
  cfg.validate();
  DistanceTable table;
  for (FirstStep a : attacks) table.attacks.push_back(to_string(a));
  for (const ModelPair& p : pairs) {
    p.validate();
    table.victims.push_back(p.pair_id);
  }
  table.cells.assign(attacks.size(), std::vector<DistanceCell>(pairs.size()));

  for (std::size_t v = 0; v < pairs.size(); ++v) {
    const ModelParams& sub = *pairs[v].substitute;
    const ModelParams& vic = *pairs[v].victim;
    for (std::size_t a = 0; a < attacks.size(); ++a) {
      DistanceCell& cell = table.cells[a][v];
      cell.per_input.assign(inputs.size(), kNaN);
      std::vector<int> censored(inputs.size(), 0);
      parallel_for(inputs.size(), [&](std::size_t i) {
        const LabeledPoint& p = inputs[i];
        if (predict(sub, p.x) != p.y || predict(vic, p.x) != p.y) return;
        const Vec dir = first_step_direction(attacks[a], sub, p.x, p.y, cfg,
                                             RngStream(derive_key(seed, {i})));
        if (dir.cwiseAbs().maxCoeff() == 0.0) return;
        const DistanceMeasurement m = boundary_distance(vic, p.x, dir, cap, tol);
        if (m.censored) {
          censored[i] = 1;
          return;
        }
        cell.per_input[i] = m.distance;
      });
      std::vector<double> kept;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (std::isnan(cell.per_input[i])) {
          ++cell.skipped;
          cell.censored += censored[i];
        } else {
          ++cell.processed;
          kept.push_back(cell.per_input[i]);
        }
      }
      cell.distance = mean_se(kept);
    }
  }
  bool any = false;
  for (const auto& row : table.cells)
    for (const auto& cell : row) any |= cell.processed > 0;
  if (!any) throw EmptyStudy("distance study: no measurement survived filtering and censoring");
  return table;
}

MeanSe paired_distance_gap(const DistanceCell& a, const DistanceCell& b) {
  if (a.per_input.size() != b.per_input.size())
    throw InvalidInput("paired_distance_gap: cells cover different inputs");
  std::vector<double> da, db;
  for (std::size_t i = 0; i < a.per_input.size(); ++i)
    if (!std::isnan(a.per_input[i]) && !std::isnan(b.per_input[i])) {
      da.push_back(a.per_input[i]);
      db.push_back(b.per_input[i]);
    }
  return paired_difference(da, db);
}

RobustnessReport robustness_study(const std::vector<ModelRef>& models,
                                  const std::vector<std::string>& model_ids,
                                  const std::vector<LabeledPoint>& inputs,
                                  const RobustnessConfig& cfg, std::uint64_t seed) {
  if (models.size() < 2) throw InvalidConfig("robustness study needs at least two models");
  if (model_ids.size() != models.size()) throw InvalidConfig("one id per model required");
  if (cfg.n_directions < 1 || !(cfg.sigma > 0.0)) throw InvalidConfig("invalid robustness config");
  for (const auto& m : models) {
    if (!m) throw InvalidConfig("null model");
    if (m->arch.input_dim != models.front()->arch.input_dim ||
        m->arch.num_classes != models.front()->arch.num_classes)
      throw InvalidConfig("robustness study models disagree on input_dim or num_classes");
  }
  if (inputs.empty()) throw EmptyStudy("robustness study: no inputs");

  AttackConfig attack;
  attack.epsilon = cfg.epsilon;
  attack.iterations = cfg.iterations;

  const std::size_t n_models = models.size();
  const std::size_t nd = static_cast<std::size_t>(cfg.n_directions);
  // [model][input * nd + j]; NaN when misclassified or censored.
  std::vector<std::vector<double>> natural(n_models, std::vector<double>(inputs.size() * nd, kNaN));
  std::vector<std::vector<double>> adversarial(n_models, std::vector<double>(inputs.size(), kNaN));
  std::vector<std::vector<int>> robust_hit(n_models, std::vector<int>(inputs.size(), 0));
  std::vector<std::vector<int>> clean_hit(n_models, std::vector<int>(inputs.size(), 0));
  std::vector<std::vector<int>> nat_cens(n_models, std::vector<int>(inputs.size(), 0));
  std::vector<std::vector<int>> adv_cens(n_models, std::vector<int>(inputs.size(), 0));

  parallel_for(n_models * inputs.size(), [&](std::size_t job) {
    const std::size_t k = job / inputs.size(), i = job % inputs.size();
    const ModelParams& model = *models[k];
    const LabeledPoint& p = inputs[i];
    robust_hit[k][i] = !i_fgsm(model, p.x, p.y, attack).success_substitute;
    if (predict(model, p.x) != p.y) return;
    clean_hit[k][i] = 1;
    for (std::size_t j = 0; j < nd; ++j) {
      // Directions depend on (seed, input, j) only, so every model sees the same rays.
      const DistanceMeasurement m = natural_direction_distance(
          model, p.x, cfg.sigma, RngStream(derive_key(seed, {i, j})), cfg.cap, cfg.tol);
      if (m.censored)
        ++nat_cens[k][i];
      else
        natural[k][i * nd + j] = m.distance;
    }
    const Vec g = input_gradient(model, p.x, p.y);
    if (g.cwiseAbs().maxCoeff() > 0.0) {
      const DistanceMeasurement m = boundary_distance(model, p.x, sign(g), cfg.cap, cfg.tol);
      if (m.censored)
        adv_cens[k][i] = 1;
      else
        adversarial[k][i] = m.distance;
    }
  });

  // Means are taken over the rays (and inputs) every model resolved, so a
  // model is not penalized for the long rays that only it leaves censored.
  auto common = [&](const std::vector<std::vector<double>>& table, std::size_t idx) {
    for (std::size_t k = 0; k < n_models; ++k)
      if (std::isnan(table[k][idx])) return false;
    return true;
  };

  RobustnessReport report;
  std::vector<double> natural_means, robust;
  for (std::size_t k = 0; k < n_models; ++k) {
    RobustnessRow row;
    row.model_id = model_ids[k];
    std::vector<double> nat, adv;
    for (std::size_t idx = 0; idx < natural[k].size(); ++idx)
      if (common(natural, idx)) nat.push_back(natural[k][idx]);
    for (std::size_t idx = 0; idx < adversarial[k].size(); ++idx)
      if (common(adversarial, idx)) adv.push_back(adversarial[k][idx]);
    row.natural_distance = mean_se(nat);
    row.adversarial_distance = mean_se(adv);
    std::size_t rh = 0, ch = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      rh += robust_hit[k][i];
      ch += clean_hit[k][i];
      row.natural_censored += nat_cens[k][i];
      row.adversarial_censored += adv_cens[k][i];
    }
    row.robust_accuracy = static_cast<double>(rh) / static_cast<double>(inputs.size());
    row.clean_accuracy = static_cast<double>(ch) / static_cast<double>(inputs.size());
    natural_means.push_back(row.natural_distance.mean);
    robust.push_back(row.robust_accuracy);
    report.rows.push_back(std::move(row));
  }
  if (report.rows.front().natural_distance.n == 0)
    throw EmptyStudy("robustness study: no ray was resolved by every model");
  report.spearman_natural_vs_robust = spearman(natural_means, robust);
  return report;
}

TransferMatrix transfer_eval(const std::vector<ModelPair>& pairs,
                             const std::vector<LabeledPoint>& inputs,
                             const std::vector<NamedAttack>& attacks, std::uint64_t seed,
                             const TransferOptions& options) {
  TransferMatrix m;
  for (const auto& a : attacks) {
    a.cfg.validate(a.kind);
    m.attacks.push_back(a.name);
  }
  for (const auto& p : pairs) {
    p.validate();
    m.victims.push_back(p.pair_id + ":substitute");
    m.victims.push_back(p.pair_id + ":victim");
  }
  const std::size_t n_cols = m.victims.size();
  m.success.assign(attacks.size(), std::vector<double>(n_cols, 0.0));
  m.whitebox_flags.assign(attacks.size(), std::vector<bool>(n_cols, false));
  m.counts.assign(attacks.size(), std::vector<TransferCell>(n_cols));
  m.outcomes.assign(attacks.size(), std::vector<std::vector<double>>(n_cols));
  m.mean_queries.assign(attacks.size(), 0.0);
  m.fallback_rate.assign(attacks.size(), 0.0);
  m.mean_shrink.assign(attacks.size(), 0.0);

  for (std::size_t a = 0; a < attacks.size(); ++a) {
    double queries = 0.0, fallbacks = 0.0, shrink = 0.0, samples = 0.0, runs = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const ModelParams& sub = *pairs[p].substitute;
      const ModelParams& vic = *pairs[p].victim;
      std::vector<std::size_t> eligible;
      for (std::size_t i = 0; i < inputs.size(); ++i)
        if (options.include_misclassified || predict(sub, inputs[i].x) == inputs[i].y)
          eligible.push_back(i);

      struct Outcome {
        bool white = false, black = false;
        long queries = 0, fallbacks = 0, shrink = 0;
      };
      std::vector<Outcome> out(eligible.size());
      parallel_for(eligible.size(), [&](std::size_t k) {
        const LabeledPoint& pt = inputs[eligible[k]];
        AttackConfig cfg = attacks[a].cfg;
        cfg.seed = derive_key(seed, {eligible[k]});
        cfg.record_trace = false;
        const AttackResult r = run_attack(attacks[a].kind, sub, pt.x, pt.y, cfg);
        out[k] = {r.success_substitute, predict(vic, r.adversarial) != pt.y, r.queries,
                  r.fallback_count, r.total_shrink};
      });

      const std::size_t wc = 2 * p, bc = 2 * p + 1;
      m.whitebox_flags[a][wc] = true;
      for (const Outcome& o : out) {
        m.outcomes[a][wc].push_back(o.white ? 1.0 : 0.0);
        m.outcomes[a][bc].push_back(o.black ? 1.0 : 0.0);
        m.counts[a][wc].successes += o.white;
        m.counts[a][bc].successes += o.black;
        queries += static_cast<double>(o.queries);
        fallbacks += static_cast<double>(o.fallbacks);
        shrink += static_cast<double>(o.shrink);
        runs += 1.0;
      }
      m.counts[a][wc].attempts = m.counts[a][bc].attempts = out.size();
      m.success[a][wc] = m.counts[a][wc].rate();
      m.success[a][bc] = m.counts[a][bc].rate();
    }
    if (uses_boundary(attacks[a].kind))
      samples = runs * attacks[a].cfg.iterations * attacks[a].cfg.boundary->n_points;
    m.mean_queries[a] = runs > 0.0 ? queries / runs : 0.0;
    m.fallback_rate[a] = samples > 0.0 ? fallbacks / samples : 0.0;
    m.mean_shrink[a] = samples > 0.0 ? shrink / samples : 0.0;
  }
  return m;
}

namespace {

std::vector<double> collect_outcomes(const TransferMatrix& m, const std::string& attack, bool white) {
  std::size_t a = 0;
  while (a < m.attacks.size() && m.attacks[a] != attack) ++a;
  if (a == m.attacks.size()) throw InvalidInput("attack '" + attack + "' not in transfer matrix");
  std::vector<double> out;
  for (std::size_t c = 0; c < m.victims.size(); ++c)
    if (m.whitebox_flags[a][c] == white)
      out.insert(out.end(), m.outcomes[a][c].begin(), m.outcomes[a][c].end());
  return out;
}

}  // namespace

std::vector<double> black_box_outcomes(const TransferMatrix& m, const std::string& attack) {
  return collect_outcomes(m, attack, false);
}

std::vector<double> white_box_outcomes(const TransferMatrix& m, const std::string& attack) {
  return collect_outcomes(m, attack, true);
}

std::string to_string(AblationParameter p) {
  return p == AblationParameter::kGamma ? "gamma" : "n_points";
}

AblationParameter ablation_parameter_from_string(const std::string& name) {
  if (name == "gamma") return AblationParameter::kGamma;
  if (name == "n_points") return AblationParameter::kNPoints;
  throw InvalidConfig("unknown ablation parameter '" + name + "'");
}

AblationCurve ablate(AblationParameter parameter, const std::vector<double>& grid,
                     const NamedAttack& fixed, const std::vector<ModelPair>& pairs,
                     const std::vector<LabeledPoint>& inputs, std::uint64_t seed) {
  if (grid.empty()) throw InvalidConfig("ablation grid is empty");
  if (!uses_boundary(fixed.kind)) throw InvalidConfig("ablation needs a boundary-fitting attack");
  AblationCurve curve;
  curve.parameter = parameter;
  curve.attack = fixed.name;
  for (double value : grid) {
    NamedAttack a = fixed;
    if (parameter == AblationParameter::kGamma) {
      a.cfg.boundary->gamma = value;
    } else {
      if (value < 1.0 || value != std::floor(value))
        throw InvalidConfig("n_points grid values must be positive integers");
      a.cfg.boundary->n_points = static_cast<int>(value);
    }
    a.cfg.validate(a.kind);
    const TransferMatrix m = transfer_eval(pairs, inputs, {a}, seed);
    AblationPoint pt;
    pt.value = value;
    pt.black_box = mean_se(black_box_outcomes(m, a.name));
    pt.white_box = mean_se(white_box_outcomes(m, a.name)).mean;
    pt.mean_queries = m.mean_queries[0];
    pt.fallback_rate = m.fallback_rate[0];
    pt.mean_shrink = m.mean_shrink[0];
    curve.points.push_back(pt);
  }
  return curve;
}

}  // namespace bfa
