// Command-line front end: solve, learn, regret-harness, estimator-audit and
// gen-scenario.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "orchestra/experiment.hpp"
#include "orchestra/random_mdp.hpp"

namespace {

using namespace orchestra;

constexpr int kExitValidation = 2;
constexpr int kExitAuditFailure = 3;

struct Overrides {
  std::optional<int> rounds;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy;
  std::optional<double> exponent;
  std::optional<double> eta;
  std::optional<double> exp_tv_rate;
  std::optional<double> greedy_rate;
  std::optional<double> gain_bound;
  std::optional<double> kappa;
  std::optional<int> horizon;
  std::optional<std::string> estimator;
  std::optional<std::string> output_dir;
  bool literal_transition = false;
  bool enqueue_with_match = false;

  void add_to(CLI::App* app) {
    app->add_option("--rounds", rounds, "Number of rounds T");
    app->add_option("--runs", runs, "Number of repetitions N");
    app->add_option("--seed", seed, "Root seed");
    app->add_option("--exponent", exponent, "Polynomial exponent p");
    app->add_option("--eta", eta, "Fixed exponential rate");
    app->add_option("--exp-tv-rate", exp_tv_rate, "Constant c in eta_t = c / sqrt(t)");
    app->add_option("--greedy-rate", greedy_rate, "Greedy projection step constant");
    app->add_option("--gain-bound", gain_bound, "Gain bound passed to the learners");
    app->add_option("--kappa", kappa, "Masking probability");
    app->add_option("--horizon", horizon, "Rollout horizon H");
    app->add_option("--estimator", estimator, "masked or lazy");
    app->add_option("--output-dir", output_dir, "Output directory");
    app->add_flag("--literal-transition", literal_transition,
                  "A match grows the matched queue");
    app->add_flag("--enqueue-with-match", enqueue_with_match,
                  "Allow enqueueing when a match is available");
  }

  void apply(ScenarioConfig& c) const {
    if (rounds) c.learning.rounds = *rounds;
    if (runs) c.learning.runs = *runs;
    if (seed) c.learning.root_seed = *seed;
    if (strategy) c.learning.strategy = *strategy;
    if (exponent) c.learning.exponent = *exponent;
    if (eta) c.learning.eta = *eta;
    if (exp_tv_rate) c.learning.exp_tv_rate = *exp_tv_rate;
    if (greedy_rate) c.learning.greedy_rate = *greedy_rate;
    if (gain_bound) c.learning.gain_bound = *gain_bound;
    if (kappa) c.estimation.kappa = *kappa;
    if (horizon) {
      c.estimation.horizon = *horizon;
      c.estimation.epsilon.reset();
      c.estimation.reward_bias.reset();
    }
    if (estimator) c.estimation.mode = *estimator;
    if (output_dir) c.reporting.output_dir = *output_dir;
    if (literal_transition) c.matching.literal_match_transition = true;
    if (enqueue_with_match) c.matching.enqueue_with_match = true;
    // Round-trip through the parser to validate the result.
    c = parse_scenario(serialize_scenario(c));
  }
};

void print_solve(const SolveResult& r) {
  for (std::size_t k = 0; k < r.expert_values.size(); ++k) {
    std::printf("V_pi%zu(mu0) [%s] = %.4f\n", k + 1, r.expert_names[k].c_str(),
                r.expert_values[k]);
  }
  std::printf("V_q*Pi(mu0) = %.4f\n", r.orchestration_value);
  std::printf("V*(mu0) = %.4f\n", r.optimal_value);
  std::printf("approximation error = %.4f\n", r.approximation_error);
  std::printf("appearance rates:");
  for (double x : r.appearance_rates) std::printf(" %.4f", x);
  std::printf("\n%d states, %.2f s\n", r.num_states, r.seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expert-policy orchestration toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ORCHESTRA_CLI_VERSION);

  std::string scenario_path;
  Overrides overrides;

  auto* solve = app.add_subcommand("solve", "Exact values of a scenario (table.csv)");
  solve->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  overrides.add_to(solve);

  std::string mode = "oracle";
  std::string strategy;
  auto* learn = app.add_subcommand("learn", "Learning curves (curve.csv, band.csv)");
  learn->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  learn->add_option("--mode", mode, "oracle or estimated")
      ->check(CLI::IsMember({"oracle", "estimated"}));
  learn->add_option("--strategy", strategy, "poly, exp-fixed, exp-tv or greedy")
      ->check(CLI::IsMember({"poly", "exp-fixed", "exp-tv", "greedy"}));
  overrides.add_to(learn);

  RegretHarnessOptions harness;
  std::string harness_out = "regret";
  auto* regret = app.add_subcommand("regret-harness", "Adversarial regret checks");
  regret->add_option("--experts", harness.num_experts, "Number of experts K");
  regret->add_option("--gain-bound", harness.gain_bound, "Gain bound M");
  regret->add_option("--rounds", harness.rounds, "Number of rounds T");
  regret->add_option("--seeds", harness.seeds, "Seeds per strategy and generator");
  regret->add_option("--seed", harness.root_seed, "Root seed");
  regret->add_option("--checkpoints", harness.checkpoints, "Checkpoints per run");
  regret->add_option("--eta", harness.eta, "Fixed exponential rate");
  regret->add_option("--output-dir", harness_out, "Output directory");

  AuditOptions audit;
  std::optional<std::string> audit_scenario;
  std::optional<int> audit_horizon;
  double audit_kappa = 0.5;
  std::string audit_out = "audit";
  auto* audit_cmd = app.add_subcommand(
      "estimator-audit", "Boundedness, zero-sum and bias checks of the estimator");
  audit_cmd->add_option("--scenario", audit_scenario,
                        "Scenario JSON file (default: random 5-state MDP)");
  audit_cmd->add_option("--samples", audit.samples, "Draws per audited pair")
      ->check(CLI::Range(1000, 100000000));
  audit_cmd->add_option("--pairs", audit.pairs, "Number of audited (state, expert) pairs");
  audit_cmd->add_option("--seed", audit.seed, "Seed");
  audit_cmd->add_option("--kappa", audit_kappa, "Masking probability");
  audit_cmd->add_option("--horizon", audit_horizon, "Rollout horizon H");
  audit_cmd->add_option("--output-dir", audit_out, "Output directory");

  std::uint64_t gen_seed = 1;
  std::string gen_out = "generated.json";
  auto* gen = app.add_subcommand("gen-scenario", "Random 8-class scenario file");
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--output", gen_out, "Output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) {
      ScenarioConfig c = load_scenario(scenario_path);
      overrides.apply(c);
      SolveResult r;
      const auto path = cmd_solve(c, &r);
      print_solve(r);
      std::printf("wrote %s\n", path.string().c_str());
    } else if (learn->parsed()) {
      ScenarioConfig c = load_scenario(scenario_path);
      if (!strategy.empty()) overrides.strategy = strategy;
      overrides.apply(c);
      LearnResult r;
      const auto dir = cmd_learn(c, parse_learn_mode(mode), &r);
      double final_mean = 0.0;
      for (const auto& run : r.values) final_mean += run.back();
      final_mean /= static_cast<double>(r.values.size());
      std::printf("target V_q*Pi(mu0) = %.4f, V*(mu0) = %.4f\n", r.orchestration_value,
                  r.optimal_value);
      std::printf("mean final value over %zu runs = %.4f\n", r.values.size(), final_mean);
      std::printf("wrote %s\n", dir.string().c_str());
    } else if (regret->parsed()) {
      const auto result = run_regret_harness(harness);
      std::filesystem::path dir(harness_out);
      if (!dir.is_absolute()) dir = output_root() / dir;
      write_atomically(dir / "regret.csv", regret_csv(result));
      std::printf("%zu checkpoints, %d bound violations\n", result.rows.size(),
                  result.violations);
      std::printf("wrote %s\n", (dir / "regret.csv").string().c_str());
    } else if (audit_cmd->parsed()) {
      AuditReport report;
      if (audit_scenario) {
        ScenarioConfig c = load_scenario(*audit_scenario);
        const ScenarioModel model = build_scenario(c);
        EstimationConfig ec = estimation_config(c, model.matching.mdp.reward_max());
        if (audit_horizon) {
          ec = EstimationConfig::from_horizon(c.matching.discount, *audit_horizon,
                                              ec.kappa, EstimatorMode::kMasked);
        }
        report = audit_estimator(model.matching.mdp, model.experts, ec, audit);
      } else {
        RandomMdpSpec spec;
        const TabularMdp mdp = random_mdp(spec, 7);
        const ExpertSet experts = random_experts(mdp, 3, 7);
        const EstimationConfig ec = EstimationConfig::from_horizon(
            spec.discount, audit_horizon.value_or(20), audit_kappa, EstimatorMode::kMasked);
        report = audit_estimator(mdp, experts, ec, audit);
      }
      std::filesystem::path dir(audit_out);
      if (!dir.is_absolute()) dir = output_root() / dir;
      write_atomically(dir / "audit.csv", audit_csv(report));
      std::printf("boundedness: %s (%ld draws, %ld violations, max |A| = %.6g, bound %.6g)\n",
                  report.bounded_ok ? "pass" : "FAIL", report.draws,
                  report.bound_violations, report.max_abs, report.bound);
      std::printf("zero-sum: %s (max %.3g)\n", report.zero_sum_ok ? "pass" : "FAIL",
                  report.max_zero_sum);
      for (const auto& p : report.pairs) {
        std::printf("bias s=%d k=%d: mean %.6g, exact %.6g, |diff| %.3g <= %.3g %s\n",
                    p.state, p.expert + 1, p.mean, p.exact, std::abs(p.mean - p.exact),
                    p.tolerance, p.pass ? "pass" : "FAIL");
      }
      if (!report.passed()) return kExitAuditFailure;
    } else if (gen->parsed()) {
      const ScenarioConfig c = generate_scenario(gen_seed);
      std::filesystem::path path(gen_out);
      if (!path.is_absolute()) path = output_root() / path;
      write_atomically(path, serialize_scenario(c));
      std::printf("wrote %s\n", path.string().c_str());
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
