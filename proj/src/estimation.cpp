#include "orchestra/estimation.hpp"

#include <cmath>
#include <string>

namespace orchestra {

std::string_view to_string(EstimatorMode mode) {
  return mode == EstimatorMode::kMasked ? "masked" : "lazy";
}

EstimatorMode parse_estimator_mode(std::string_view name) {
  if (name == "masked") return EstimatorMode::kMasked;
  if (name == "lazy") return EstimatorMode::kLazy;
  throw ValidationError("unknown estimator mode '" + std::string(name) + "'");
}

int horizon_for_epsilon(double gamma, double epsilon) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ValidationError("discount must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  // Same relative slack as EstimationConfig::validate.
  const double target = epsilon * (1.0 - gamma) * (1.0 + 1e-12);
  if (target >= 1.0) return 1;
  int h = std::max(1, static_cast<int>(std::ceil(std::log(target) / std::log(gamma))));
  while (h > 1 && std::pow(gamma, h - 1) <= target) --h;
  while (std::pow(gamma, h) > target) ++h;
  return h;
}

EstimationConfig EstimationConfig::from_epsilon(double gamma, double epsilon,
                                                double kappa,
                                                EstimatorMode mode) {
  EstimationConfig c;
  c.epsilon = epsilon;
  c.horizon = horizon_for_epsilon(gamma, epsilon);
  c.kappa = kappa;
  c.mode = mode;
  c.validate(gamma);
  return c;
}

EstimationConfig EstimationConfig::from_horizon(double gamma, int horizon,
                                                double kappa,
                                                EstimatorMode mode) {
  EstimationConfig c;
  c.horizon = horizon;
  c.epsilon = std::pow(gamma, horizon) / (1.0 - gamma);
  c.kappa = kappa;
  c.mode = mode;
  c.validate(gamma);
  return c;
}

void EstimationConfig::validate(double gamma) const {
  if (!(kappa > 0.0 && kappa <= 1.0)) {
    throw ValidationError("kappa must lie in (0, 1]");
  }
  if (horizon < 1) throw ValidationError("horizon must be at least 1");
  if (repeats < 1) throw ValidationError("repeats must be at least 1");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  const double bias = std::pow(gamma, horizon) / (1.0 - gamma);
  if (bias > epsilon * (1.0 + 1e-12)) {
    throw ValidationError("horizon " + std::to_string(horizon) +
                          " is too short for epsilon " + std::to_string(epsilon));
  }
}

PolicySampler::PolicySampler(const StationaryPolicy& pi) {
  const Matrix& p = pi.probs();
  offset_.reserve(p.rows() + 1);
  offset_.push_back(0);
  for (Eigen::Index s = 0; s < p.rows(); ++s) {
    for (Eigen::Index a = 0; a < p.cols(); ++a) {
      if (p(s, a) > 0.0) {
        action_.push_back(static_cast<int>(a));
        prob_.push_back(p(s, a));
      }
    }
    if (action_.size() == offset_.back()) {
      throw ValidationError("policy row without support");
    }
    offset_.push_back(action_.size());
  }
}

double rollout_q_estimate(const MdpSampler& sampler, const PolicySampler& pi,
                          int s0, int a0, int horizon, RngStream& rng) {
  const TabularMdp& mdp = sampler.mdp();
  if (!mdp.admissible(s0, a0)) {
    throw ValidationError("rollout from an inadmissible action");
  }
  if (horizon < 1) throw ValidationError("horizon must be at least 1");
  const double gamma = mdp.discount();
  double total = sampler.reward(s0, a0);
  double scale = 1.0;
  int s = s0;
  int a = a0;
  for (int tau = 1; tau < horizon; ++tau) {
    s = sampler.sample_next(s, a, rng);
    a = pi.sample(s, rng);
    scale *= gamma;
    total += scale * sampler.reward(s, a);
  }
  return total;
}

double rollout_q_estimate(const MdpSampler& sampler, const StationaryPolicy& pi,
                          int s0, int a0, int horizon, RngStream& rng) {
  return rollout_q_estimate(sampler, PolicySampler(pi), s0, a0, horizon, rng);
}

namespace {

// Fills row s of out with scale * sum_a pi_k(a|s) (Qtilde(a) - baseline).
void estimate_row(const MdpSampler& sampler, const PolicySampler& rollout_policy,
                  const StationaryPolicy& mixed, const ExpertSet& experts,
                  const EstimationConfig& config, int round,
                  std::uint64_t root_seed, int s, double scale, Matrix& out) {
  const int num_actions = sampler.mdp().num_actions();
  const auto actions = experts.support_union(s);
  std::vector<double> qtilde(actions.size(), 0.0);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const int a = actions[i];
    double sum = 0.0;
    for (int r = 0; r < config.repeats; ++r) {
      RngStream rng = RngStream::derive(
          root_seed, static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(s),
          static_cast<std::uint64_t>(r) * num_actions + a, RngPurpose::kRollout);
      sum += rollout_q_estimate(sampler, rollout_policy, s, a, config.horizon, rng);
    }
    qtilde[i] = sum / config.repeats;
  }
  double baseline = 0.0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    baseline += mixed(s, actions[i]) * qtilde[i];
  }
  for (int k = 0; k < experts.size(); ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < actions.size(); ++i) {
      acc += experts[k](s, actions[i]) * (qtilde[i] - baseline);
    }
    out(s, k) = scale * acc;
  }
}

}  // namespace

AdvantageEstimate estimate_expert_advantages(const MdpSampler& sampler,
                                             const Matrix& q,
                                             const ExpertSet& experts,
                                             const EstimationConfig& config,
                                             int round, std::uint64_t root_seed,
                                             int current_state) {
  const TabularMdp& mdp = sampler.mdp();
  config.validate(mdp.discount());
  check_state_weights(q, mdp.num_states(), experts.size());
  const StationaryPolicy mixed = mix_policy(q, experts);
  const PolicySampler rollout_policy(mixed);

  AdvantageEstimate est;
  est.atilde = Matrix::Zero(mdp.num_states(), experts.size());
  est.mask.assign(mdp.num_states(), 0);
  if (config.mode == EstimatorMode::kLazy) {
    if (current_state < 0 || current_state >= mdp.num_states()) {
      throw ValidationError("lazy estimation needs the current state");
    }
    est.mask[current_state] = 1;
    estimate_row(sampler, rollout_policy, mixed, experts, config, round,
                 root_seed, current_state, 1.0, est.atilde);
    return est;
  }
  for (int s = 0; s < mdp.num_states(); ++s) {
    RngStream coin = RngStream::derive(root_seed, static_cast<std::uint64_t>(round),
                                       static_cast<std::uint64_t>(s), 0,
                                       RngPurpose::kMask);
    if (!coin.bernoulli(config.kappa)) continue;
    est.mask[s] = 1;
    estimate_row(sampler, rollout_policy, mixed, experts, config, round,
                 root_seed, s, 1.0 / config.kappa, est.atilde);
  }
  return est;
}

EstimatedRunRecord run_estimated_loop(const MdpSampler& sampler,
                                      const TabularMdp& exact,
                                      const ExpertSet& experts,
                                      const Vector& mu0,
                                      const EstimatedRunOptions& options) {
  if (options.rounds < 1) throw ValidationError("estimated loop needs T >= 1");
  const TabularMdp& model = sampler.mdp();
  if (exact.num_states() != model.num_states() ||
      exact.num_actions() != model.num_actions()) {
    throw ValidationError("sampler and exact MDP differ in dimensions");
  }
  experts.validate_for(exact);
  options.config.validate(exact.discount());
  if (mu0.size() != exact.num_states()) {
    throw ValidationError("initial distribution has wrong length");
  }
  check_simplex({mu0.data(), static_cast<std::size_t>(mu0.size())}, 1e-9,
                "initial distribution");

  const int states = exact.num_states();
  const int k_count = experts.size();
  const bool lazy = options.config.mode == EstimatorMode::kLazy;
  EstimatedRunRecord record;
  record.gain_bound = options.gain_bound.value_or(
      lazy ? exact.value_bound() : exact.value_bound() / options.config.kappa);

  std::vector<AdversarialLearner> learners;
  learners.reserve(states);
  for (int s = 0; s < states; ++s) {
    learners.emplace_back(options.kind, k_count, record.gain_bound,
                          options.params);
  }

  RngStream start = RngStream::derive(options.root_seed, 0, 0, 0,
                                      RngPurpose::kInitialState);
  int state = start.categorical({mu0.data(), static_cast<std::size_t>(mu0.size())});
  record.trajectory.push_back(state);

  Matrix q = uniform_weights(states, k_count);
  Vector value;
  record.values.reserve(options.rounds);
  for (int t = 1; t <= options.rounds; ++t) {
    const StationaryPolicy pi = mix_policy(q, experts);
    EvaluationOptions eval;
    if (value.size() == states) eval.warm_start = &value;
    value = evaluate_policy(exact, pi, eval);
    record.values.push_back(value_at(value, mu0));
    if (t > 1 && record.values[t - 1] < record.values[t - 2] - 1e-8) {
      ++record.value_decreases;
    }

    const int current = state;
    RngStream step = RngStream::derive(options.root_seed,
                                       static_cast<std::uint64_t>(t), 0, 0,
                                       RngPurpose::kTrajectory);
    const int action = step.categorical(
        {pi.probs().row(state).data(), static_cast<std::size_t>(pi.num_actions())});
    state = sampler.sample_next(state, action, step);
    record.trajectory.push_back(state);

    const AdvantageEstimate est = estimate_expert_advantages(
        sampler, q, experts, options.config, t, options.root_seed, current);
    for (int s = 0; s < states; ++s) {
      learners[s].observe(
          {est.atilde.row(s).data(), static_cast<std::size_t>(k_count)});
      const auto w = learners[s].weights();
      for (int k = 0; k < k_count; ++k) q(s, k) = w[k];
    }
  }
  record.final_weights = std::move(q);
  return record;
}

}  // namespace orchestra
