#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "orchestra/adversarial.hpp"
#include "orchestra/estimation.hpp"
#include "orchestra/matching.hpp"
#include "orchestra/orchestration.hpp"

namespace orchestra {

struct ExpertsSection {
  std::vector<std::string> kinds;
  std::uint64_t priority_seed = 0;
  /// Explicit sigma (0-based permutation); drawn from priority_seed if empty.
  std::vector<int> priority;

  bool operator==(const ExpertsSection&) const = default;
};

struct LearningSection {
  std::string strategy = "poly";
  std::optional<double> exponent;
  std::optional<double> eta;
  std::optional<double> exp_tv_rate;
  std::optional<double> greedy_rate;
  std::optional<double> gain_bound;
  int rounds = 2500;
  int runs = 20;
  std::uint64_t root_seed = 1;

  bool operator==(const LearningSection&) const = default;
};

struct EstimationSection {
  /// At most one of epsilon, reward_bias (= reward_max * epsilon) and
  /// horizon fixes the rollout length; epsilon alone is checked against H.
  std::optional<double> epsilon;
  std::optional<double> reward_bias;
  std::optional<int> horizon;
  double kappa = 1.0;
  std::string mode = "masked";
  int repeats = 1;

  bool operator==(const EstimationSection&) const = default;
};

struct ReportingSection {
  std::string output_dir = "out";
  double delta = 0.05;

  bool operator==(const ReportingSection&) const = default;
};

struct ScenarioConfig {
  std::string name = "scenario";
  MatchingConfig matching;
  ExpertsSection experts;
  LearningSection learning;
  EstimationSection estimation;
  ReportingSection reporting;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Throws ValidationError on unknown keys, missing fields or bad values.
/// Class labels in the file are 1-based.
ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::filesystem::path& path);
std::string serialize_scenario(const ScenarioConfig& config);

/// Scenario built into an MDP with its experts.
struct ScenarioModel {
  MatchingModel matching;
  ExpertSet experts;
  std::vector<int> priority;
};
ScenarioModel build_scenario(const ScenarioConfig& config);

LearnerParams learner_params(const LearningSection& learning, StrategyKind kind);
EstimationConfig estimation_config(const ScenarioConfig& config,
                                   double reward_max);

/// Output root: $ORCHESTRA_OUTPUT_ROOT if set, else the current directory.
std::filesystem::path output_root();
std::filesystem::path output_dir(const ScenarioConfig& config);

/// Writes `content` through a temporary file and a rename.
void write_atomically(const std::filesystem::path& path,
                      const std::string& content);

/// Fixed 9 significant digits.
std::string format_number(double x);

struct SolveResult {
  std::vector<std::string> expert_names;
  std::vector<double> expert_values;
  double orchestration_value = 0.0;
  double optimal_value = 0.0;
  double approximation_error = 0.0;
  std::vector<double> appearance_rates;
  int num_states = 0;
  double seconds = 0.0;
};

SolveResult solve_scenario(const ScenarioModel& model);
/// Solves and writes table.csv; returns its path.
std::filesystem::path cmd_solve(const ScenarioConfig& config,
                                SolveResult* result = nullptr);

enum class LearnMode { kOracle, kEstimated };
LearnMode parse_learn_mode(std::string_view name);

struct LearnResult {
  /// values[n][t - 1] = V_{q_{n,t} Pi}(mu0).
  std::vector<std::vector<double>> values;
  std::vector<std::uint64_t> run_seeds;
  std::vector<int> value_decreases;
  double orchestration_value = 0.0;
  double optimal_value = 0.0;
  std::vector<double> expert_values;
};

/// Seed of run n derived from the root seed.
std::uint64_t run_seed(std::uint64_t root_seed, int run_index);

LearnResult learn_scenario(const ScenarioConfig& config,
                           const ScenarioModel& model, LearnMode mode);
/// Runs, then writes curve.csv, band.csv and metadata.json.
std::filesystem::path cmd_learn(const ScenarioConfig& config, LearnMode mode,
                                LearnResult* result = nullptr);

enum class GainGenerator { kUniform, kAdversarial, kSingleBest };
std::string_view to_string(GainGenerator generator);

struct RegretHarnessOptions {
  int num_experts = 3;
  double gain_bound = 1.0;
  int rounds = 500;
  std::vector<StrategyKind> strategies = {
      StrategyKind::kPolynomialPotential, StrategyKind::kExponentialFixed,
      StrategyKind::kExponentialTimeVarying, StrategyKind::kGreedyProjection};
  std::vector<GainGenerator> generators = {GainGenerator::kUniform,
                                           GainGenerator::kAdversarial,
                                           GainGenerator::kSingleBest};
  int seeds = 50;
  std::uint64_t root_seed = 1;
  int checkpoints = 10;
  /// Fixed exponential rate; defaults to (1/M) sqrt(2 ln K / T).
  std::optional<double> eta;
};

struct RegretRow {
  GainGenerator generator;
  StrategyKind strategy;
  int seed;
  int round;
  double regret;
  double bound;
};

struct RegretHarnessResult {
  std::vector<RegretRow> rows;
  int violations = 0;
};

RegretHarnessResult run_regret_harness(const RegretHarnessOptions& options);
std::string regret_csv(const RegretHarnessResult& result);

struct AuditOptions {
  int samples = 1000;
  int pairs = 5;
  std::uint64_t seed = 7;
};

struct AuditPair {
  int state;
  int expert;
  double mean;
  double standard_error;
  double exact;
  double tolerance;
  bool pass;
};

struct AuditReport {
  long draws = 0;
  long bound_violations = 0;
  double max_abs = 0.0;
  double bound = 0.0;
  double max_zero_sum = 0.0;
  std::vector<AuditPair> pairs;
  bool bounded_ok = false;
  bool zero_sum_ok = false;
  bool bias_ok = false;
  bool passed() const { return bounded_ok && zero_sum_ok && bias_ok; }
};

/// Checks boundedness, the zero-sum identity and the bias of the masked
/// estimator at random (state, expert) pairs, with random weights q.
AuditReport audit_estimator(const TabularMdp& mdp, const ExpertSet& experts,
                            const EstimationConfig& config,
                            const AuditOptions& options);
std::string audit_csv(const AuditReport& report);

/// Random scenario with I = 8, L = 2, c = 5, gamma = 0.8, payoffs uniform on
/// [0, 20], lambda uniform then normalized, four experts and lazy
/// estimation.
ScenarioConfig generate_scenario(std::uint64_t seed);

}  // namespace orchestra
