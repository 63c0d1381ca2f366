#pragma once

#include <optional>
#include <string>
#include <vector>

#include "orchestra/adversarial.hpp"
#include "orchestra/mdp.hpp"

namespace orchestra {

/// K stationary policies over the same MDP.
class ExpertSet {
 public:
  ExpertSet() = default;
  explicit ExpertSet(std::vector<StationaryPolicy> experts,
                     std::vector<std::string> names = {});

  int size() const { return static_cast<int>(experts_.size()); }
  const StationaryPolicy& operator[](int k) const { return experts_[k]; }
  const std::vector<StationaryPolicy>& experts() const { return experts_; }
  const std::vector<std::string>& names() const { return names_; }
  int num_states() const { return experts_.front().num_states(); }
  int num_actions() const { return experts_.front().num_actions(); }

  void validate_for(const TabularMdp& mdp) const;

  /// Actions charged by at least one expert in state s, increasing.
  std::vector<int> support_union(int s) const;

 private:
  std::vector<StationaryPolicy> experts_;
  std::vector<std::string> names_;
};

/// Rows of q (states x K) must lie on the simplex within 1e-12.
void check_state_weights(const Matrix& q, int num_states, int num_experts);

/// Uniform weights 1/K in every state.
Matrix uniform_weights(int num_states, int num_experts);

/// qPi(a|s) = sum_k q(k|s) pi_k(a|s).
StationaryPolicy mix_policy(const Matrix& q, const ExpertSet& experts);

/// MDP whose actions are the experts: T'(.|s,k) = sum_a pi_k(a|s) T(.|s,a)
/// and r'(s,k) = sum_a pi_k(a|s) r(s,a).
TabularMdp lift_mdp(const TabularMdp& mdp, const ExpertSet& experts);

/// abar(s,k) = sum_a pi_k(a|s) A(s,a), a states x K matrix.
Matrix expert_advantages(const Matrix& advantage, const ExpertSet& experts);

struct Orchestration {
  /// Dirac weights, states x K.
  Matrix q;
  /// Expert selected in each state.
  std::vector<int> choice;
  /// V_{q* Pi}.
  Vector value;
};

/// Best state-dependent mixture, solved on the lifted MDP. Ties go to the
/// lowest expert index.
Orchestration optimal_orchestration(const TabularMdp& mdp,
                                    const ExpertSet& experts,
                                    const EvaluationOptions& options = {});

/// Fraction of states whose q* Dirac falls on each expert.
std::vector<double> appearance_rates(const Orchestration& orchestration,
                                     int num_experts);

struct ApproximationError {
  /// V*(mu0) - V_{q* Pi}(mu0).
  double error = 0.0;
  /// max_s V*(s) - V_{q* Pi}(s).
  double max_state_error = 0.0;
  /// Per state, the experts whose support lies in argmax Q*(s, .), or
  /// nothing when no mixture can be greedy there.
  std::vector<std::optional<std::vector<int>>> certificate;
  bool certified_everywhere = false;
};

ApproximationError approximation_error(const TabularMdp& mdp,
                                       const ExpertSet& experts,
                                       const Vector& mu0,
                                       double argmax_tolerance = 1e-7);

struct OracleRunOptions {
  StrategyKind kind = StrategyKind::kPolynomialPotential;
  LearnerParams params;
  int rounds = 1;
  /// Defaults to reward_max / (1 - gamma), the range of the expert
  /// advantages.
  std::optional<double> gain_bound;
  /// Store q_t for every round.
  bool keep_weights = false;
  /// Also solve for V_{q* Pi}(mu0) and V*(mu0).
  bool compute_targets = true;
};

struct OracleRunRecord {
  StrategyKind kind;
  double gain_bound = 0.0;
  /// V_{q_t Pi}(mu0) for t = 1..T.
  std::vector<double> values;
  /// q_t for t = 1..T when requested.
  std::vector<Matrix> weights;
  /// q_{T+1}.
  Matrix final_weights;
  double target_orchestration = 0.0;
  double target_optimal = 0.0;
};

/// Oracle loop: exact advantages of q_t Pi fed to one learner per state.
OracleRunRecord run_oracle_loop(const TabularMdp& mdp, const ExpertSet& experts,
                                const Vector& mu0,
                                const OracleRunOptions& options);

}  // namespace orchestra
