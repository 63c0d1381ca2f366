#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace orchestra {

// Full-information learners over K experts. Each round the learner exposes
// weights w_t on the simplex, then observes a gain vector g_t with entries in
// [-gain_bound, gain_bound].

enum class StrategyKind {
  kPolynomialPotential,     // Phi(x) = max(x, 0)^p
  kExponentialFixed,        // Phi(x) = exp(eta x)
  kExponentialTimeVarying,  // Phi_t(x) = exp(eta_t x), eta_t = c / sqrt(t)
  kGreedyProjection,        // w_{t+1} = proj(w_t + eta_t g_t)
};

std::string_view to_string(StrategyKind kind);
/// Accepts "poly", "exp-fixed", "exp-tv", "greedy".
StrategyKind parse_strategy(std::string_view name);

/// Monotonicity of weights is proven for every kind but the time-varying
/// exponential potential.
bool is_monotone(StrategyKind kind);

struct LearnerParams {
  /// Polynomial exponent p > 1. Default max(2, round(2 ln K)).
  std::optional<double> exponent;
  /// Fixed exponential rate eta > 0, applied to raw gains.
  std::optional<double> eta;
  /// Constant c of the schedule eta_t = c / sqrt(t). Defaults are
  /// (1/M) sqrt(ln K) for exp-tv and (1/M) sqrt(2/K) for greedy.
  std::optional<double> rate_constant;
};

class AdversarialLearner {
 public:
  AdversarialLearner(StrategyKind kind, int num_experts, double gain_bound,
                     LearnerParams params = {});

  /// Consumes g_t and moves to round t + 1.
  void observe(std::span<const double> gains);

  std::span<const double> weights() const { return weights_; }
  /// sum_{tau < t} (g_{tau,k} - <w_tau, g_tau>).
  std::span<const double> cumulative_regret() const { return cumulative_; }
  int round() const { return round_; }
  int num_experts() const { return static_cast<int>(weights_.size()); }
  double gain_bound() const { return gain_bound_; }
  StrategyKind kind() const { return kind_; }
  double exponent() const { return exponent_; }
  double eta() const { return eta_; }
  double rate_constant() const { return rate_constant_; }

  /// eta_t for the scheduled kinds at round t.
  double scheduled_rate(int t) const;

 private:
  void reweight_from_potential(double rate);

  StrategyKind kind_;
  double gain_bound_;
  double exponent_ = 0.0;
  double eta_ = 0.0;
  double rate_constant_ = 0.0;
  int round_ = 1;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

/// Euclidean projection onto the probability simplex (sort and threshold).
std::vector<double> project_to_simplex(std::span<const double> v);

/// max_k sum_t g_{t,k} - sum_t <w_t, g_t>.
double realized_regret(const std::vector<std::vector<double>>& gains,
                       const std::vector<std::vector<double>>& weights);

struct RegretBound {
  double value;
  /// False for the fixed-rate exponential potential, whose bound grows
  /// linearly in T.
  bool vanishing;
};

/// M * B_{T,K} for the strategy with gains bounded by gain_bound = M.
RegretBound regret_bound(StrategyKind kind, int rounds, int num_experts,
                         double gain_bound, const LearnerParams& params = {});

/// sum_k w_{t+1,k} (g_k - <w_t, g>) for after = before.observe(g).
double monotonicity_gap(const AdversarialLearner& before,
                        std::span<const double> gains,
                        const AdversarialLearner& after);

}  // namespace orchestra
