#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "orchestra/adversarial.hpp"
#include "orchestra/mdp.hpp"
#include "orchestra/orchestration.hpp"
#include "orchestra/rng.hpp"

namespace orchestra {

enum class EstimatorMode { kMasked, kLazy };

std::string_view to_string(EstimatorMode mode);
/// Accepts "masked" and "lazy".
EstimatorMode parse_estimator_mode(std::string_view name);

/// Smallest H >= 1 with gamma^H <= epsilon (1 - gamma).
int horizon_for_epsilon(double gamma, double epsilon);

struct EstimationConfig {
  /// Bias on the normalized reward scale; the reward-scale bias is
  /// reward_max * epsilon.
  double epsilon = 0.0;
  int horizon = 1;
  double kappa = 1.0;
  EstimatorMode mode = EstimatorMode::kMasked;
  /// Rollouts averaged per (state, action).
  int repeats = 1;

  /// Horizon derived from epsilon.
  static EstimationConfig from_epsilon(double gamma, double epsilon,
                                       double kappa, EstimatorMode mode);
  /// Epsilon set to gamma^H / (1 - gamma).
  static EstimationConfig from_horizon(double gamma, int horizon, double kappa,
                                       EstimatorMode mode);

  /// Checks kappa in (0, 1], H >= 1, repeats >= 1 and
  /// gamma^H / (1 - gamma) <= epsilon.
  void validate(double gamma) const;
};

/// Draws successor states from the kernel of an MDP. The MDP must outlive
/// the sampler.
class MdpSampler {
 public:
  explicit MdpSampler(const TabularMdp& mdp) : mdp_(&mdp) {}

  const TabularMdp& mdp() const { return *mdp_; }
  int sample_next(int s, int a, RngStream& rng) const {
    const auto next = mdp_->next_states(s, a);
    return next[rng.categorical(mdp_->next_probs(s, a))];
  }
  /// Rewards are deterministic given (s, a).
  double reward(int s, int a) const { return mdp_->reward(s, a); }

 private:
  const TabularMdp* mdp_;
};

/// Compressed rows of a stationary policy for fast action draws.
class PolicySampler {
 public:
  explicit PolicySampler(const StationaryPolicy& pi);

  int sample(int s, RngStream& rng) const {
    const auto begin = offset_[s];
    const auto end = offset_[s + 1];
    double u = rng.uniform();
    for (auto i = begin; i + 1 < end; ++i) {
      if (u < prob_[i]) return action_[i];
      u -= prob_[i];
    }
    return action_[end - 1];
  }

 private:
  std::vector<std::size_t> offset_;
  std::vector<int> action_;
  std::vector<double> prob_;
};

/// sum_{tau < H} gamma^tau r_tau along one trajectory that starts with
/// (s0, a0) and follows pi afterwards.
double rollout_q_estimate(const MdpSampler& sampler, const PolicySampler& pi,
                          int s0, int a0, int horizon, RngStream& rng);
double rollout_q_estimate(const MdpSampler& sampler, const StationaryPolicy& pi,
                          int s0, int a0, int horizon, RngStream& rng);

struct AdvantageEstimate {
  /// states x K.
  Matrix atilde;
  /// Z_{t,s}; in lazy mode only the current state is set.
  std::vector<std::uint8_t> mask;
};

/**
 * Masked estimate of the expert advantages of qPi at round t:
 * Atilde(s,k) = (Z/kappa) sum_a pi_k(a|s) (Qtilde(s,a) - sum_b qPi(b|s)
 * Qtilde(s,b)). Lazy mode fills only `current_state`, without the Z/kappa
 * factor. One rollout is drawn per action in the union of the expert
 * supports, which are the only actions the formula reads.
 */
AdvantageEstimate estimate_expert_advantages(const MdpSampler& sampler,
                                             const Matrix& q,
                                             const ExpertSet& experts,
                                             const EstimationConfig& config,
                                             int round, std::uint64_t root_seed,
                                             int current_state = -1);

struct EstimatedRunOptions {
  StrategyKind kind = StrategyKind::kPolynomialPotential;
  LearnerParams params;
  int rounds = 1;
  EstimationConfig config;
  std::uint64_t root_seed = 0;
  /// Defaults to reward_max / (kappa (1 - gamma)) in masked mode and
  /// reward_max / (1 - gamma) in lazy mode.
  std::optional<double> gain_bound;
};

struct EstimatedRunRecord {
  double gain_bound = 0.0;
  /// Exact V_{q_t Pi}(mu0) for t = 1..T.
  std::vector<double> values;
  /// Live trajectory s_1..s_{T+1}.
  std::vector<int> trajectory;
  Matrix final_weights;
  /// Rounds with V_{q_{t+1} Pi}(mu0) < V_{q_t Pi}(mu0) - 1e-8.
  int value_decreases = 0;
};

/// Learning loop with estimated advantages, one learner per state. The
/// exact MDP is only used to report values.
EstimatedRunRecord run_estimated_loop(const MdpSampler& sampler,
                                      const TabularMdp& exact,
                                      const ExpertSet& experts,
                                      const Vector& mu0,
                                      const EstimatedRunOptions& options);

}  // namespace orchestra
