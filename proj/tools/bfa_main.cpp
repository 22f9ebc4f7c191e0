#include <cstdint>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bfa/error.hpp"
#include "bfa/experiment.hpp"

namespace {

enum Exit { kOk = 0, kValidation = 1, kRuntime = 2, kEmptyStudy = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> eps;
  std::optional<int> iters;
  std::optional<int> n_points;
  std::optional<double> gamma;
  std::optional<double> sigma;

  bfa::Overrides overrides() const { return {seed, out, eps, iters, n_points, gamma, sigma}; }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Override the experiment seed");
  app->add_option("--out", c.out, "Override the output directory");
  app->add_option("--eps", c.eps, "Override every attack's L-inf budget");
  app->add_option("--iters", c.iters, "Override every attack's iteration count");
  app->add_option("--n-points", c.n_points, "Override the boundary points per gradient");
  app->add_option("--gamma", c.gamma, "Override the shrinkage factor");
  app->add_option("--sigma", c.sigma, "Override the boundary offset std");
}

// "a:b" half-open, "a" single index, "a:" to the end.
std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
  auto num = [&](const std::string& s) -> std::size_t {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (s.empty() || pos != s.size() || s.front() == '-') throw bfa::InvalidConfig("bad --range \"" + text + "\"");
    return static_cast<std::size_t>(v);
  };
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    const std::size_t a = num(text);
    return {a, a + 1};
  }
  const std::string lo = text.substr(0, colon), hi = text.substr(colon + 1);
  return {lo.empty() ? 0 : num(lo), hi.empty() ? std::numeric_limits<std::size_t>::max() : num(hi)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary fitting attack laboratory"};
  app.set_version_flag("--version", bfa::tool_version());
  app.require_subcommand(1);

  Common train_opts, attack_opts, study_opts, ablate_opts, plot_opts;
  std::string range = ":";
  std::string kind;

  auto* train = app.add_subcommand("train", "Train every configured model and write model files");
  add_common(train, train_opts);
  auto* attack = app.add_subcommand("attack", "Attack a range of inputs on the substitute");
  add_common(attack, attack_opts);
  attack->add_option("--range", range, "Input indices a:b (half-open), a, or a:");
  auto* study = app.add_subcommand("study", "Run analysis studies and write JSON + CSV reports");
  add_common(study, study_opts);
  study->add_option("--kind", kind, "transfer | cosine | distance | robustness")
      ->check(CLI::IsMember({"transfer", "cosine", "distance", "robustness"}));
  auto* ablate = app.add_subcommand("ablate", "Sweep gamma or N for a boundary-fitting attack");
  add_common(ablate, ablate_opts);
  auto* plot = app.add_subcommand("plot", "Render the boundary diagram for one input as SVG");
  add_common(plot, plot_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  Common* opts = train->parsed()    ? &train_opts
                 : attack->parsed() ? &attack_opts
                 : study->parsed()  ? &study_opts
                 : ablate->parsed() ? &ablate_opts
                                    : &plot_opts;
  std::optional<bfa::ExperimentConfig> cfg;
  std::pair<std::size_t, std::size_t> span{0, 0};
  try {
    cfg = bfa::load_config(opts->config, opts->overrides());
    if (attack->parsed()) span = parse_range(range);
  } catch (const std::exception& e) {
    std::cerr << "bfa: " << e.what() << '\n';
    return kValidation;
  }

  try {
    std::vector<std::filesystem::path> written;
    if (train->parsed()) written = bfa::cmd_train(*cfg);
    else if (attack->parsed()) written = bfa::cmd_attack(*cfg, span.first, span.second);
    else if (study->parsed()) written = bfa::cmd_study(*cfg, kind);
    else if (ablate->parsed()) written = bfa::cmd_ablate(*cfg);
    else written = bfa::cmd_plot(*cfg);
    for (const auto& p : written) std::cout << p.string() << '\n';
    return kOk;
  } catch (const bfa::EmptyStudy& e) {
    std::cerr << "bfa: empty study: " << e.what() << '\n';
    return kEmptyStudy;
  } catch (const bfa::InvalidConfig& e) {
    std::cerr << "bfa: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "bfa: error: " << e.what() << '\n';
    return kRuntime;
  }
}
