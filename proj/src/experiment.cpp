#include "orchestra/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "orchestra/random_mdp.hpp"
#include "orchestra/rng.hpp"

#ifndef ORCHESTRA_VERSION
#define ORCHESTRA_VERSION "unknown"
#endif

namespace orchestra {
namespace {

using json = nlohmann::ordered_json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + " must be an object");
  std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!names.count(item.key())) {
      throw ValidationError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <class T>
T required(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) {
    throw ValidationError("missing key '" + std::string(key) + "' in " + where);
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("bad value for '" + std::string(key) + "' in " + where +
                          ": " + e.what());
  }
}

template <class T>
void optional_into(const json& obj, const char* key, const std::string& where,
                   T& out) {
  if (obj.contains(key)) out = required<T>(obj, key, where);
}

template <class T>
void optional_into(const json& obj, const char* key, const std::string& where,
                   std::optional<T>& out) {
  if (obj.contains(key)) out = required<T>(obj, key, where);
}

template <class T>
void put_optional(json& obj, const char* key, const std::optional<T>& value) {
  if (value) obj[key] = *value;
}

MatchingConfig parse_matching(const json& j) {
  const std::string where = "matching";
  check_keys(j,
             {"num_classes", "max_queue", "holding_coeff", "discount",
              "arrival_probs", "edges", "literal_match_transition",
              "enqueue_with_match", "state_cap"},
             where);
  MatchingConfig m;
  m.num_classes = required<int>(j, "num_classes", where);
  m.max_queue = required<int>(j, "max_queue", where);
  m.holding_coeff = required<double>(j, "holding_coeff", where);
  m.discount = required<double>(j, "discount", where);
  m.arrival_probs = required<std::vector<double>>(j, "arrival_probs", where);
  const auto edges = required<json>(j, "edges", where);
  if (!edges.is_array()) throw ValidationError("matching.edges must be an array");
  for (const auto& e : edges) {
    if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() ||
        !e[1].is_number_integer() || !e[2].is_number()) {
      throw ValidationError("each edge must be [class, class, payoff]");
    }
    m.edges.push_back({e[0].get<int>() - 1, e[1].get<int>() - 1, e[2].get<double>()});
  }
  optional_into(j, "literal_match_transition", where, m.literal_match_transition);
  optional_into(j, "enqueue_with_match", where, m.enqueue_with_match);
  optional_into(j, "state_cap", where, m.state_cap);
  m.validate();
  return m;
}

json matching_json(const MatchingConfig& m) {
  json j;
  j["num_classes"] = m.num_classes;
  j["max_queue"] = m.max_queue;
  j["holding_coeff"] = m.holding_coeff;
  j["discount"] = m.discount;
  j["arrival_probs"] = m.arrival_probs;
  json edges = json::array();
  for (const auto& e : m.edges) edges.push_back(json::array({e.a + 1, e.b + 1, e.payoff}));
  j["edges"] = edges;
  j["literal_match_transition"] = m.literal_match_transition;
  j["enqueue_with_match"] = m.enqueue_with_match;
  j["state_cap"] = m.state_cap;
  return j;
}

json scenario_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["matching"] = matching_json(c.matching);

  json experts;
  experts["kinds"] = c.experts.kinds;
  experts["priority_seed"] = c.experts.priority_seed;
  if (!c.experts.priority.empty()) {
    std::vector<int> one_based;
    for (int p : c.experts.priority) one_based.push_back(p + 1);
    experts["priority"] = one_based;
  }
  j["experts"] = experts;

  json learning;
  learning["strategy"] = c.learning.strategy;
  put_optional(learning, "exponent", c.learning.exponent);
  put_optional(learning, "eta", c.learning.eta);
  put_optional(learning, "exp_tv_rate", c.learning.exp_tv_rate);
  put_optional(learning, "greedy_rate", c.learning.greedy_rate);
  put_optional(learning, "gain_bound", c.learning.gain_bound);
  learning["rounds"] = c.learning.rounds;
  learning["runs"] = c.learning.runs;
  learning["root_seed"] = c.learning.root_seed;
  j["learning"] = learning;

  json estimation;
  put_optional(estimation, "epsilon", c.estimation.epsilon);
  put_optional(estimation, "reward_bias", c.estimation.reward_bias);
  put_optional(estimation, "horizon", c.estimation.horizon);
  estimation["kappa"] = c.estimation.kappa;
  estimation["mode"] = c.estimation.mode;
  estimation["repeats"] = c.estimation.repeats;
  j["estimation"] = estimation;

  json reporting;
  reporting["output_dir"] = c.reporting.output_dir;
  reporting["delta"] = c.reporting.delta;
  j["reporting"] = reporting;
  return j;
}

void validate_scenario(const ScenarioConfig& c) {
  c.matching.validate();
  if (c.experts.kinds.empty()) throw ValidationError("experts.kinds is empty");
  for (const auto& k : c.experts.kinds) parse_matching_expert(k);
  if (!c.experts.priority.empty()) {
    std::vector<int> sorted = c.experts.priority;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < static_cast<int>(sorted.size()); ++i) {
      if (sorted[i] != i || static_cast<int>(sorted.size()) != c.matching.num_classes) {
        throw ValidationError("experts.priority must be a permutation of the classes");
      }
    }
  }
  parse_strategy(c.learning.strategy);
  if (c.learning.rounds < 1) throw ValidationError("learning.rounds must be >= 1");
  if (c.learning.runs < 1) throw ValidationError("learning.runs must be >= 1");
  if (c.learning.exponent && !(*c.learning.exponent > 1.0)) {
    throw ValidationError("learning.exponent must exceed 1");
  }
  for (const auto* v : {&c.learning.eta, &c.learning.exp_tv_rate,
                        &c.learning.greedy_rate, &c.learning.gain_bound}) {
    if (*v && !(**v > 0.0)) throw ValidationError("learning rates must be positive");
  }
  parse_estimator_mode(c.estimation.mode);
  if (!(c.estimation.kappa > 0.0 && c.estimation.kappa <= 1.0)) {
    throw ValidationError("estimation.kappa must lie in (0, 1]");
  }
  if (c.estimation.repeats < 1) throw ValidationError("estimation.repeats must be >= 1");
  if (c.estimation.epsilon && c.estimation.reward_bias) {
    throw ValidationError("give either estimation.epsilon or estimation.reward_bias");
  }
  if (c.estimation.horizon && *c.estimation.horizon < 1) {
    throw ValidationError("estimation.horizon must be >= 1");
  }
  if (!(c.reporting.delta > 0.0 && c.reporting.delta < 1.0)) {
    throw ValidationError("reporting.delta must lie in (0, 1)");
  }
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

// -- Scenario files -----------------------------------------------------------

ScenarioConfig parse_scenario(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario is not valid JSON: ") + e.what());
  }
  check_keys(root, {"name", "matching", "experts", "learning", "estimation", "reporting"},
             "scenario");
  ScenarioConfig c;
  optional_into(root, "name", "scenario", c.name);
  c.matching = parse_matching(required<json>(root, "matching", "scenario"));

  const json experts = required<json>(root, "experts", "scenario");
  check_keys(experts, {"kinds", "priority_seed", "priority"}, "experts");
  c.experts.kinds = required<std::vector<std::string>>(experts, "kinds", "experts");
  optional_into(experts, "priority_seed", "experts", c.experts.priority_seed);
  if (experts.contains("priority")) {
    for (int p : required<std::vector<int>>(experts, "priority", "experts")) {
      c.experts.priority.push_back(p - 1);
    }
  }

  if (root.contains("learning")) {
    const json& l = root["learning"];
    const std::string where = "learning";
    check_keys(l,
               {"strategy", "exponent", "eta", "exp_tv_rate", "greedy_rate",
                "gain_bound", "rounds", "runs", "root_seed"},
               where);
    optional_into(l, "strategy", where, c.learning.strategy);
    optional_into(l, "exponent", where, c.learning.exponent);
    optional_into(l, "eta", where, c.learning.eta);
    optional_into(l, "exp_tv_rate", where, c.learning.exp_tv_rate);
    optional_into(l, "greedy_rate", where, c.learning.greedy_rate);
    optional_into(l, "gain_bound", where, c.learning.gain_bound);
    optional_into(l, "rounds", where, c.learning.rounds);
    optional_into(l, "runs", where, c.learning.runs);
    optional_into(l, "root_seed", where, c.learning.root_seed);
  }
  if (root.contains("estimation")) {
    const json& e = root["estimation"];
    const std::string where = "estimation";
    check_keys(e, {"epsilon", "reward_bias", "horizon", "kappa", "mode", "repeats"},
               where);
    optional_into(e, "epsilon", where, c.estimation.epsilon);
    optional_into(e, "reward_bias", where, c.estimation.reward_bias);
    optional_into(e, "horizon", where, c.estimation.horizon);
    optional_into(e, "kappa", where, c.estimation.kappa);
    optional_into(e, "mode", where, c.estimation.mode);
    optional_into(e, "repeats", where, c.estimation.repeats);
  }
  if (root.contains("reporting")) {
    const json& r = root["reporting"];
    check_keys(r, {"output_dir", "delta"}, "reporting");
    optional_into(r, "output_dir", "reporting", c.reporting.output_dir);
    optional_into(r, "delta", "reporting", c.reporting.delta);
  }
  validate_scenario(c);
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

std::string serialize_scenario(const ScenarioConfig& config) {
  return scenario_json(config).dump(2) + "\n";
}

ScenarioModel build_scenario(const ScenarioConfig& config) {
  validate_scenario(config);
  ScenarioModel model;
  model.matching = build_matching_mdp(config.matching);
  model.priority = config.experts.priority.empty()
                       ? draw_priority(config.matching.num_classes,
                                       config.experts.priority_seed)
                       : config.experts.priority;
  std::vector<StationaryPolicy> experts;
  std::vector<std::string> names;
  for (const auto& kind : config.experts.kinds) {
    experts.push_back(matching_expert(model.matching, config.matching,
                                      parse_matching_expert(kind), model.priority));
    names.push_back(kind);
  }
  model.experts = ExpertSet(std::move(experts), std::move(names));
  return model;
}

LearnerParams learner_params(const LearningSection& learning, StrategyKind kind) {
  LearnerParams p;
  p.exponent = learning.exponent;
  p.eta = learning.eta;
  if (kind == StrategyKind::kExponentialTimeVarying) p.rate_constant = learning.exp_tv_rate;
  if (kind == StrategyKind::kGreedyProjection) p.rate_constant = learning.greedy_rate;
  return p;
}

EstimationConfig estimation_config(const ScenarioConfig& config,
                                   double reward_max) {
  const auto& e = config.estimation;
  const double gamma = config.matching.discount;
  const EstimatorMode mode = parse_estimator_mode(e.mode);
  std::optional<double> epsilon = e.epsilon;
  if (e.reward_bias) epsilon = *e.reward_bias / reward_max;
  EstimationConfig c;
  if (e.horizon) {
    c = EstimationConfig::from_horizon(gamma, *e.horizon, e.kappa, mode);
    if (epsilon) c.epsilon = *epsilon;
  } else if (epsilon) {
    c = EstimationConfig::from_epsilon(gamma, *epsilon, e.kappa, mode);
  } else {
    throw ValidationError("estimation needs a horizon, epsilon or reward_bias");
  }
  c.repeats = e.repeats;
  c.validate(gamma);
  return c;
}

// -- Output plumbing ----------------------------------------------------------

std::filesystem::path output_root() {
  if (const char* root = std::getenv("ORCHESTRA_OUTPUT_ROOT"); root && *root) {
    return root;
  }
  return std::filesystem::current_path();
}

std::filesystem::path output_dir(const ScenarioConfig& config) {
  std::filesystem::path dir(config.reporting.output_dir);
  return dir.is_absolute() ? dir : output_root() / dir;
}

void write_atomically(const std::filesystem::path& path,
                      const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw std::runtime_error("failed writing " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

// -- solve --------------------------------------------------------------------

SolveResult solve_scenario(const ScenarioModel& model) {
  const auto start = std::chrono::steady_clock::now();
  const TabularMdp& mdp = model.matching.mdp;
  const Vector& mu0 = model.matching.mu0;
  SolveResult r;
  r.num_states = mdp.num_states();
  r.expert_names = model.experts.names();
  for (const auto& pi : model.experts.experts()) {
    r.expert_values.push_back(value_at(evaluate_policy(mdp, pi), mu0));
  }
  const Orchestration orch = optimal_orchestration(mdp, model.experts);
  r.orchestration_value = value_at(orch.value, mu0);
  r.optimal_value = value_at(value_iteration(mdp).value, mu0);
  r.approximation_error = r.optimal_value - r.orchestration_value;
  r.appearance_rates = appearance_rates(orch, model.experts.size());
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::filesystem::path cmd_solve(const ScenarioConfig& config, SolveResult* result) {
  const ScenarioModel model = build_scenario(config);
  const SolveResult r = solve_scenario(model);
  std::ostringstream csv;
  csv << "quantity,value\n";
  for (std::size_t k = 0; k < r.expert_values.size(); ++k) {
    csv << "V_pi" << k + 1 << ',' << format_number(r.expert_values[k]) << '\n';
  }
  csv << "V_qstar," << format_number(r.orchestration_value) << '\n';
  csv << "V_star," << format_number(r.optimal_value) << '\n';
  csv << "approximation_error," << format_number(r.approximation_error) << '\n';
  for (std::size_t k = 0; k < r.appearance_rates.size(); ++k) {
    csv << "rate_pi" << k + 1 << ',' << format_number(r.appearance_rates[k]) << '\n';
  }
  const auto path = output_dir(config) / "table.csv";
  write_atomically(path, csv.str());
  if (result) *result = r;
  return path;
}

// -- learn --------------------------------------------------------------------

LearnMode parse_learn_mode(std::string_view name) {
  if (name == "oracle") return LearnMode::kOracle;
  if (name == "estimated") return LearnMode::kEstimated;
  throw ValidationError("unknown learning mode '" + std::string(name) + "'");
}

std::uint64_t run_seed(std::uint64_t root_seed, int run_index) {
  return RngStream::derive(root_seed, static_cast<std::uint64_t>(run_index), 0, 0,
                           RngPurpose::kRunSeed)
      .next_u64();
}

LearnResult learn_scenario(const ScenarioConfig& config,
                           const ScenarioModel& model, LearnMode mode) {
  const TabularMdp& mdp = model.matching.mdp;
  const Vector& mu0 = model.matching.mu0;
  const StrategyKind kind = parse_strategy(config.learning.strategy);
  const LearnerParams params = learner_params(config.learning, kind);
  const int runs = config.learning.runs;

  LearnResult out;
  for (const auto& pi : model.experts.experts()) {
    out.expert_values.push_back(value_at(evaluate_policy(mdp, pi), mu0));
  }
  out.orchestration_value =
      value_at(optimal_orchestration(mdp, model.experts).value, mu0);
  out.optimal_value = value_at(value_iteration(mdp).value, mu0);

  if (mode == LearnMode::kOracle) {
    OracleRunOptions o;
    o.kind = kind;
    o.params = params;
    o.rounds = config.learning.rounds;
    o.gain_bound = config.learning.gain_bound;
    o.compute_targets = false;
    const OracleRunRecord rec = run_oracle_loop(mdp, model.experts, mu0, o);
    int decreases = 0;
    for (std::size_t t = 1; t < rec.values.size(); ++t) {
      if (rec.values[t] < rec.values[t - 1] - 1e-8) ++decreases;
    }
    for (int n = 0; n < runs; ++n) {
      out.values.push_back(rec.values);
      out.run_seeds.push_back(run_seed(config.learning.root_seed, n));
      out.value_decreases.push_back(decreases);
    }
    return out;
  }

  const MdpSampler sampler(mdp);
  EstimatedRunOptions o;
  o.kind = kind;
  o.params = params;
  o.rounds = config.learning.rounds;
  o.config = estimation_config(config, mdp.reward_max());
  o.gain_bound = config.learning.gain_bound;
  for (int n = 0; n < runs; ++n) {
    o.root_seed = run_seed(config.learning.root_seed, n);
    EstimatedRunRecord rec = run_estimated_loop(sampler, mdp, model.experts, mu0, o);
    out.values.push_back(std::move(rec.values));
    out.run_seeds.push_back(o.root_seed);
    out.value_decreases.push_back(rec.value_decreases);
  }
  return out;
}

std::filesystem::path cmd_learn(const ScenarioConfig& config, LearnMode mode,
                                LearnResult* result) {
  const ScenarioModel model = build_scenario(config);
  LearnResult r = learn_scenario(config, model, mode);
  const int runs = static_cast<int>(r.values.size());
  const int rounds = config.learning.rounds;

  std::ostringstream curve;
  curve << "run_index,t,value_at_mu0\n";
  for (int n = 0; n < runs; ++n) {
    for (int t = 1; t <= rounds; ++t) {
      curve << n << ',' << t << ',' << format_number(r.values[n][t - 1]) << '\n';
    }
  }

  std::ostringstream band;
  band << "t,mean,lower,upper,cesaro_mean\n";
  double cesaro = 0.0;
  for (int t = 1; t <= rounds; ++t) {
    std::vector<double> column(runs);
    for (int n = 0; n < runs; ++n) column[n] = r.values[n][t - 1];
    const double m = mean_of(column);
    double se = 0.0;
    if (runs > 1) {
      double ss = 0.0;
      for (double v : column) ss += (v - m) * (v - m);
      se = std::sqrt(ss / (runs - 1) / runs);
    }
    cesaro += (m - cesaro) / t;
    band << t << ',' << format_number(m) << ',' << format_number(m - 2 * se) << ','
         << format_number(m + 2 * se) << ',' << format_number(cesaro) << '\n';
  }

  json meta;
  meta["version"] = ORCHESTRA_VERSION;
  meta["mode"] = mode == LearnMode::kOracle ? "oracle" : "estimated";
  meta["scenario"] = scenario_json(config);
  meta["num_states"] = model.matching.mdp.num_states();
  meta["reward_max"] = model.matching.mdp.reward_max();
  std::vector<int> priority;
  for (int p : model.priority) priority.push_back(p + 1);
  meta["priority"] = priority;
  meta["run_seeds"] = r.run_seeds;
  meta["value_decreases"] = r.value_decreases;
  meta["expert_values"] = r.expert_values;
  meta["orchestration_value"] = r.orchestration_value;
  meta["optimal_value"] = r.optimal_value;
  if (mode == LearnMode::kEstimated) {
    const EstimationConfig ec = estimation_config(config, model.matching.mdp.reward_max());
    meta["estimation"] = {{"horizon", ec.horizon},
                          {"epsilon", ec.epsilon},
                          {"kappa", ec.kappa},
                          {"mode", std::string(to_string(ec.mode))},
                          {"repeats", ec.repeats}};
  }

  const auto dir = output_dir(config);
  write_atomically(dir / "curve.csv", curve.str());
  write_atomically(dir / "band.csv", band.str());
  write_atomically(dir / "metadata.json", meta.dump(2) + "\n");
  if (result) *result = std::move(r);
  return dir;
}

// -- regret harness -----------------------------------------------------------

std::string_view to_string(GainGenerator generator) {
  switch (generator) {
    case GainGenerator::kUniform:
      return "uniform";
    case GainGenerator::kAdversarial:
      return "adversarial";
    case GainGenerator::kSingleBest:
      return "single_best";
  }
  return "unknown";
}

RegretHarnessResult run_regret_harness(const RegretHarnessOptions& options) {
  const int k_count = options.num_experts;
  const double m = options.gain_bound;
  if (k_count < 2) throw ValidationError("regret harness needs K >= 2");
  if (!(m > 0.0)) throw ValidationError("gain bound must be positive");
  if (options.rounds < 1 || options.seeds < 1 || options.checkpoints < 1) {
    throw ValidationError("rounds, seeds and checkpoints must be positive");
  }
  const int every = std::max(1, options.rounds / options.checkpoints);

  RegretHarnessResult result;
  for (GainGenerator gen : options.generators) {
    for (StrategyKind kind : options.strategies) {
      LearnerParams params;
      if (kind == StrategyKind::kExponentialFixed) {
        params.eta = options.eta.value_or(
            std::sqrt(2.0 * std::log(static_cast<double>(k_count)) / options.rounds) / m);
      }
      for (int seed = 0; seed < options.seeds; ++seed) {
        AdversarialLearner learner(kind, k_count, m, params);
        std::vector<double> totals(k_count, 0.0);
        std::vector<double> g(k_count);
        double mixed = 0.0;
        const int best = seed % k_count;
        for (int t = 1; t <= options.rounds; ++t) {
          RngStream rng = RngStream::derive(options.root_seed, static_cast<std::uint64_t>(t),
                                            static_cast<std::uint64_t>(seed),
                                            static_cast<std::uint64_t>(gen),
                                            RngPurpose::kGenerator);
          const auto w = learner.weights();
          switch (gen) {
            case GainGenerator::kUniform:
              for (auto& x : g) x = m * (2.0 * rng.uniform() - 1.0);
              break;
            case GainGenerator::kAdversarial: {
              const int low = static_cast<int>(std::min_element(w.begin(), w.end()) - w.begin());
              for (int k = 0; k < k_count; ++k) g[k] = k == low ? m : -m;
              break;
            }
            case GainGenerator::kSingleBest:
              for (int k = 0; k < k_count; ++k) {
                g[k] = k == best ? m * rng.uniform() : -m * rng.uniform();
              }
              break;
          }
          for (int k = 0; k < k_count; ++k) {
            totals[k] += g[k];
            mixed += w[k] * g[k];
          }
          learner.observe(g);
          if (t % every == 0 || t == options.rounds) {
            const double regret = *std::max_element(totals.begin(), totals.end()) - mixed;
            const double bound = regret_bound(kind, t, k_count, m, params).value;
            result.rows.push_back({gen, kind, seed, t, regret, bound});
            if (regret > bound + 1e-9) ++result.violations;
          }
        }
      }
    }
  }
  return result;
}

std::string regret_csv(const RegretHarnessResult& result) {
  std::ostringstream csv;
  csv << "generator,strategy,seed,t,regret,bound,violation\n";
  for (const auto& r : result.rows) {
    csv << to_string(r.generator) << ',' << to_string(r.strategy) << ',' << r.seed << ','
        << r.round << ',' << format_number(r.regret) << ',' << format_number(r.bound)
        << ',' << (r.regret > r.bound + 1e-9 ? 1 : 0) << '\n';
  }
  return csv.str();
}

// -- estimator audit ----------------------------------------------------------

AuditReport audit_estimator(const TabularMdp& mdp, const ExpertSet& experts,
                            const EstimationConfig& config,
                            const AuditOptions& options) {
  if (options.samples < 1000) throw ValidationError("audit needs at least 1000 samples");
  if (options.pairs < 1) throw ValidationError("audit needs at least one pair");
  EstimationConfig masked = config;
  masked.mode = EstimatorMode::kMasked;
  masked.validate(mdp.discount());
  EstimationConfig lazy = masked;
  lazy.mode = EstimatorMode::kLazy;

  const int states = mdp.num_states();
  const int k_count = experts.size();
  Matrix q(states, k_count);
  for (int s = 0; s < states; ++s) {
    q.row(s) = random_distribution(k_count, mix64(options.seed * 7919 + s)).transpose();
  }
  const StationaryPolicy mixed = mix_policy(q, experts);
  const Vector value = evaluate_policy(mdp, mixed);
  const Matrix abar = expert_advantages(action_values(mdp, mixed, value).advantage, experts);
  const MdpSampler sampler(mdp);

  AuditReport report;
  report.bound = mdp.value_bound() / masked.kappa;
  auto inspect = [&](const Matrix& row_block, int s) {
    double zero_sum = 0.0;
    for (int k = 0; k < k_count; ++k) {
      const double x = row_block(s, k);
      ++report.draws;
      report.max_abs = std::max(report.max_abs, std::abs(x));
      if (std::abs(x) > report.bound) ++report.bound_violations;
      zero_sum += q(s, k) * x;
    }
    report.max_zero_sum = std::max(report.max_zero_sum, std::abs(zero_sum));
  };

  // Full masked draws cover every state.
  const int full_draws = std::max(1, std::min(options.samples / 10, 200));
  for (int d = 0; d < full_draws; ++d) {
    const auto est = estimate_expert_advantages(sampler, q, experts, masked, d + 1,
                                                mix64(options.seed + 17));
    for (int s = 0; s < states; ++s) inspect(est.atilde, s);
  }

  // Single-state draws reproduce the masked estimator at one state: a
  // Bernoulli(kappa) coin times the unmasked row, scaled by 1 / kappa.
  RngStream pick = RngStream::derive(options.seed, 0, 0, 0, RngPurpose::kGenerator);
  for (int p = 0; p < options.pairs; ++p) {
    const int s = static_cast<int>(pick.below(states));
    const int k = static_cast<int>(pick.below(k_count));
    const std::uint64_t root = mix64(options.seed * 1000003ULL + p + 1);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int d = 1; d <= options.samples; ++d) {
      RngStream coin = RngStream::derive(root, static_cast<std::uint64_t>(d),
                                         static_cast<std::uint64_t>(s), 0,
                                         RngPurpose::kMask);
      AdvantageEstimate est{Matrix::Zero(states, k_count), {}};
      if (coin.bernoulli(masked.kappa)) {
        est = estimate_expert_advantages(sampler, q, experts, lazy, d, root, s);
        est.atilde.row(s) /= masked.kappa;
      }
      inspect(est.atilde, s);
      const double x = est.atilde(s, k);
      sum += x;
      sum_sq += x * x;
    }
    const double n = options.samples;
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1));
    AuditPair pair;
    pair.state = s;
    pair.expert = k;
    pair.mean = mean;
    pair.standard_error = std::sqrt(var / n);
    pair.exact = abar(s, k);
    pair.tolerance = masked.epsilon * mdp.reward_max() + 3.0 * pair.standard_error;
    pair.pass = std::abs(mean - pair.exact) <= pair.tolerance;
    report.pairs.push_back(pair);
  }
  report.bounded_ok = report.bound_violations == 0;
  report.zero_sum_ok = report.max_zero_sum <= 1e-9;
  report.bias_ok = std::all_of(report.pairs.begin(), report.pairs.end(),
                               [](const AuditPair& p) { return p.pass; });
  return report;
}

std::string audit_csv(const AuditReport& report) {
  std::ostringstream csv;
  csv << "state,expert,mean,standard_error,exact,tolerance,pass\n";
  for (const auto& p : report.pairs) {
    csv << p.state << ',' << p.expert + 1 << ',' << format_number(p.mean) << ','
        << format_number(p.standard_error) << ',' << format_number(p.exact) << ','
        << format_number(p.tolerance) << ',' << (p.pass ? 1 : 0) << '\n';
  }
  return csv.str();
}

// -- scenario generator -------------------------------------------------------

ScenarioConfig generate_scenario(std::uint64_t seed) {
  RngStream rng = RngStream::derive(seed, 0, 0, 0, RngPurpose::kGenerator);
  ScenarioConfig c;
  c.name = "generated-" + std::to_string(seed);
  auto& m = c.matching;
  m.num_classes = 8;
  m.max_queue = 2;
  m.holding_coeff = 5.0;
  m.discount = 0.8;
  m.state_cap = 100000;

  std::vector<double> lambda(m.num_classes);
  for (auto& x : lambda) x = rng.uniform();
  const double total = std::accumulate(lambda.begin(), lambda.end(), 0.0);
  for (auto& x : lambda) x /= total;
  // Push the rounding residue onto the last class so the sum is exactly one.
  lambda.back() = 1.0 - std::accumulate(lambda.begin(), lambda.end() - 1, 0.0);
  m.arrival_probs = lambda;

  std::vector<int> degree(m.num_classes, 0);
  for (int a = 0; a < m.num_classes; ++a) {
    for (int b = a + 1; b < m.num_classes; ++b) {
      if (rng.uniform() < 0.35) {
        m.edges.push_back({a, b, 20.0 * rng.uniform()});
        ++degree[a];
        ++degree[b];
      }
    }
  }
  for (int a = 0; a < m.num_classes; ++a) {
    if (degree[a] > 0) continue;
    int b = static_cast<int>(rng.below(m.num_classes - 1));
    if (b >= a) ++b;
    m.edges.push_back({std::min(a, b), std::max(a, b), 20.0 * rng.uniform()});
    ++degree[a];
    ++degree[b];
  }

  c.experts.kinds = {"match_longest", "max_payoff", "uniform_random",
                     "permutation_priority"};
  c.experts.priority_seed = seed;
  c.learning.strategy = "poly";
  c.learning.exponent = 5.0;
  c.learning.exp_tv_rate = 0.8;
  c.learning.eta = 0.014;
  c.learning.rounds = 2500;
  c.learning.runs = 5;
  c.learning.root_seed = seed;
  c.estimation.horizon = 45;
  c.estimation.kappa = 1.0;
  c.estimation.mode = "lazy";
  c.reporting.output_dir = c.name;
  return c;
}

}  // namespace orchestra
