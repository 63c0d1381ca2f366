#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace orchestra {

/// Raised when an input violates a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical solver cannot reach its residual target.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = Eigen::VectorXd;
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Successor {
  int state;
  double prob;
};

class MdpBuilder;

/**
 * Finite discounted MDP with sparse transitions.
 *
 * Rewards are mean rewards r(s,a) in [0, reward_max]. Each state carries a
 * nonempty set of admissible actions; reward and transitions are only defined
 * on admissible pairs. Instances are immutable once built.
 */
class TabularMdp {
 public:
  TabularMdp() = default;

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  double discount() const { return discount_; }
  double reward_max() const { return reward_max_; }

  bool admissible(int s, int a) const {
    return admissible_[pair(s, a)] != 0;
  }
  double reward(int s, int a) const { return reward_[pair(s, a)]; }

  std::span<const int> next_states(int s, int a) const {
    const auto p = pair(s, a);
    return {next_.data() + offset_[p], offset_[p + 1] - offset_[p]};
  }
  std::span<const double> next_probs(int s, int a) const {
    const auto p = pair(s, a);
    return {prob_.data() + offset_[p], offset_[p + 1] - offset_[p]};
  }

  /// Admissible actions of s in increasing order.
  std::vector<int> admissible_actions(int s) const;

  /// Upper bound on any discounted value: reward_max / (1 - discount).
  double value_bound() const { return reward_max_ / (1.0 - discount_); }

 private:
  friend class MdpBuilder;

  std::size_t pair(int s, int a) const {
    return static_cast<std::size_t>(s) * num_actions_ + a;
  }

  int num_states_ = 0;
  int num_actions_ = 0;
  double discount_ = 0.0;
  double reward_max_ = 1.0;
  std::vector<std::uint8_t> admissible_;
  std::vector<double> reward_;
  std::vector<std::size_t> offset_;
  std::vector<int> next_;
  std::vector<double> prob_;
};

/// Accumulates admissible (s, a) pairs and validates them into a TabularMdp.
class MdpBuilder {
 public:
  MdpBuilder(int num_states, int num_actions, double discount,
             double reward_max);

  /// Declares (s, a) admissible. Duplicate successor states are merged.
  void add_action(int s, int a, double reward,
                  std::vector<Successor> successors);

  /// Throws ValidationError if any invariant is violated.
  TabularMdp build() &&;

 private:
  struct Entry {
    int state;
    int action;
    double reward;
    std::vector<Successor> successors;
  };
  int num_states_;
  int num_actions_;
  double discount_;
  double reward_max_;
  std::vector<Entry> entries_;
};

/// Per-state distribution over actions, stored as a dense states x actions
/// matrix.
class StationaryPolicy {
 public:
  StationaryPolicy() = default;
  explicit StationaryPolicy(Matrix probs) : probs_(std::move(probs)) {}

  static StationaryPolicy uniform(const TabularMdp& mdp);
  /// Dirac on actions[s] in every state.
  static StationaryPolicy deterministic(const TabularMdp& mdp,
                                        std::span<const int> actions);

  const Matrix& probs() const { return probs_; }
  double operator()(int s, int a) const { return probs_(s, a); }
  int num_states() const { return static_cast<int>(probs_.rows()); }
  int num_actions() const { return static_cast<int>(probs_.cols()); }

  /// Rows nonnegative, summing to one within 1e-12, zero on inadmissible
  /// actions.
  void validate_for(const TabularMdp& mdp) const;

 private:
  Matrix probs_;
};

struct EvaluationOptions {
  /// Dense LU up to this many states, Gauss-Seidel sweeps above.
  int dense_limit = 2048;
  double tolerance = 1e-9;
  long max_sweeps = 1'000'000;
  /// Optional starting point for the iterative path.
  const Vector* warm_start = nullptr;
};

/// Q and advantage tables of a policy. Inadmissible entries are zero in Q;
/// advantage is Q - V broadcast over admissible actions, zero elsewhere.
struct ActionValues {
  Matrix q;
  Matrix advantage;
};

struct OptimalSolution {
  Vector value;
  Matrix q;
  StationaryPolicy policy;
};

struct PerformanceDifference {
  double lhs;
  double rhs;
};

/// r_pi(s) = sum_a pi(a|s) r(s,a).
Vector policy_reward(const TabularMdp& mdp, const StationaryPolicy& pi);

/// sup-norm of r_pi + gamma P_pi V - V.
double bellman_residual(const TabularMdp& mdp, const StationaryPolicy& pi,
                        const Vector& value);

/// Solves V = r_pi + gamma P_pi V.
Vector evaluate_policy(const TabularMdp& mdp, const StationaryPolicy& pi,
                       const EvaluationOptions& options = {});

ActionValues action_values(const TabularMdp& mdp, const StationaryPolicy& pi,
                           const Vector& value);

/// sum_a nu_a A(s, a). nu must lie on the simplex and be supported on
/// admissible actions.
double advantage_of_distribution(const TabularMdp& mdp,
                                 const Matrix& advantage, int s,
                                 std::span<const double> nu);

/// Optimal value, Q and the greedy policy (ties to the lowest action index).
OptimalSolution value_iteration(const TabularMdp& mdp,
                                const EvaluationOptions& options = {});

/// Actions whose optimal Q is within `tolerance` of the state maximum.
std::vector<int> argmax_actions(const TabularMdp& mdp, const Matrix& q, int s,
                                double tolerance = 1e-7);

/// Discounted state visitation distribution
/// mu = (1 - gamma) sum_t gamma^t mu0^T P_pi^t.
Vector discounted_visitation(const TabularMdp& mdp, const StationaryPolicy& pi,
                             const Vector& mu0,
                             const EvaluationOptions& options = {});

/// Both sides of the performance difference identity at mu0.
PerformanceDifference performance_difference(const TabularMdp& mdp,
                                             const StationaryPolicy& pi,
                                             const StationaryPolicy& pi_prime,
                                             const Vector& mu0);

/// Linear extension V(mu0) = sum_s mu0(s) V(s).
inline double value_at(const Vector& value, const Vector& mu0) {
  return mu0.dot(value);
}

/// Throws ValidationError unless v is a probability vector within tol.
void check_simplex(std::span<const double> v, double tol,
                   const std::string& what);

}  // namespace orchestra
