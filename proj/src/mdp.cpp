#include "orchestra/mdp.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace orchestra {
namespace {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

constexpr double kRowSumTolerance = 1e-12;

SparseRows policy_transitions(const TabularMdp& mdp,
                              const StationaryPolicy& pi) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mdp.num_states()) * 4);
  for (int s = 0; s < mdp.num_states(); ++s) {
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const double w = pi(s, a);
      if (w == 0.0) continue;
      const auto next = mdp.next_states(s, a);
      const auto prob = mdp.next_probs(s, a);
      for (std::size_t j = 0; j < next.size(); ++j) {
        triplets.emplace_back(s, next[j], w * prob[j]);
      }
    }
  }
  SparseRows p(mdp.num_states(), mdp.num_states());
  p.setFromTriplets(triplets.begin(), triplets.end());
  p.makeCompressed();
  return p;
}

double residual_of(const SparseRows& p, const Vector& r, double gamma,
                   const Vector& v) {
  return (r + gamma * (p * v) - v).lpNorm<Eigen::Infinity>();
}

// Gauss-Seidel on V = r + gamma P V, in place.
void gauss_seidel(const SparseRows& p, const Vector& r, double gamma,
                  Vector& v, const EvaluationOptions& options) {
  for (long sweep = 0; sweep < options.max_sweeps; ++sweep) {
    for (int s = 0; s < p.rows(); ++s) {
      double acc = r(s);
      double diag = 0.0;
      for (SparseRows::InnerIterator it(p, s); it; ++it) {
        if (it.col() == s) {
          diag += it.value();
        } else {
          acc += gamma * it.value() * v(it.col());
        }
      }
      v(s) = acc / (1.0 - gamma * diag);
    }
    if (residual_of(p, r, gamma, v) <= options.tolerance) return;
  }
  std::ostringstream msg;
  msg << "policy evaluation did not reach residual " << options.tolerance
      << " within " << options.max_sweeps << " sweeps";
  throw SolverError(msg.str());
}

Vector solve_values(const SparseRows& p, const Vector& r, double gamma,
                    const EvaluationOptions& options) {
  const auto n = static_cast<int>(p.rows());
  Vector v;
  if (n <= options.dense_limit) {
    Matrix system = Matrix::Identity(n, n) - gamma * Matrix(p);
    v = system.partialPivLu().solve(r);
    if (residual_of(p, r, gamma, v) <= options.tolerance) return v;
  } else if (options.warm_start != nullptr &&
             options.warm_start->size() == n) {
    v = *options.warm_start;
  } else {
    v = Vector::Zero(n);
  }
  gauss_seidel(p, r, gamma, v, options);
  return v;
}

}  // namespace

void check_simplex(std::span<const double> v, double tol,
                   const std::string& what) {
  double sum = 0.0;
  for (double x : v) {
    if (!std::isfinite(x) || x < -tol) {
      throw ValidationError(what + ": negative or non-finite entry");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > tol) {
    std::ostringstream msg;
    msg << what << ": entries sum to " << sum << ", not 1";
    throw ValidationError(msg.str());
  }
}

// -- TabularMdp ---------------------------------------------------------------

std::vector<int> TabularMdp::admissible_actions(int s) const {
  std::vector<int> out;
  for (int a = 0; a < num_actions_; ++a) {
    if (admissible(s, a)) out.push_back(a);
  }
  return out;
}

MdpBuilder::MdpBuilder(int num_states, int num_actions, double discount,
                       double reward_max)
    : num_states_(num_states),
      num_actions_(num_actions),
      discount_(discount),
      reward_max_(reward_max) {
  if (num_states <= 0 || num_actions <= 0) {
    throw ValidationError("MDP needs at least one state and one action");
  }
  if (!(discount > 0.0 && discount < 1.0)) {
    throw ValidationError("discount must lie in (0, 1)");
  }
  if (!(reward_max > 0.0) || !std::isfinite(reward_max)) {
    throw ValidationError("reward_max must be positive and finite");
  }
}

void MdpBuilder::add_action(int s, int a, double reward,
                            std::vector<Successor> successors) {
  if (s < 0 || s >= num_states_ || a < 0 || a >= num_actions_) {
    throw ValidationError("state or action index out of range");
  }
  for (const auto& succ : successors) {
    if (succ.state < 0 || succ.state >= num_states_) {
      throw ValidationError("successor state out of range");
    }
  }
  std::sort(successors.begin(), successors.end(),
            [](const Successor& x, const Successor& y) {
              return x.state < y.state;
            });
  std::vector<Successor> merged;
  merged.reserve(successors.size());
  for (const auto& succ : successors) {
    if (!merged.empty() && merged.back().state == succ.state) {
      merged.back().prob += succ.prob;
    } else {
      merged.push_back(succ);
    }
  }
  entries_.push_back({s, a, reward, std::move(merged)});
}

TabularMdp MdpBuilder::build() && {
  std::sort(entries_.begin(), entries_.end(),
            [](const Entry& x, const Entry& y) {
              return x.state != y.state ? x.state < y.state
                                        : x.action < y.action;
            });
  TabularMdp mdp;
  mdp.num_states_ = num_states_;
  mdp.num_actions_ = num_actions_;
  mdp.discount_ = discount_;
  mdp.reward_max_ = reward_max_;
  const auto pairs = static_cast<std::size_t>(num_states_) * num_actions_;
  mdp.admissible_.assign(pairs, 0);
  mdp.reward_.assign(pairs, 0.0);

  std::vector<std::size_t> count(pairs, 0);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (i > 0 && entries_[i - 1].state == e.state &&
        entries_[i - 1].action == e.action) {
      throw ValidationError("state-action pair declared twice");
    }
    if (!(e.reward >= 0.0 && e.reward <= reward_max_)) {
      std::ostringstream msg;
      msg << "reward " << e.reward << " at (" << e.state << ", " << e.action
          << ") outside [0, " << reward_max_ << "]";
      throw ValidationError(msg.str());
    }
    double sum = 0.0;
    for (const auto& succ : e.successors) {
      if (!(succ.prob >= 0.0)) {
        throw ValidationError("negative transition probability");
      }
      sum += succ.prob;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      std::ostringstream msg;
      msg << "transition row (" << e.state << ", " << e.action
          << ") sums to " << sum;
      throw ValidationError(msg.str());
    }
    const auto p = mdp.pair(e.state, e.action);
    mdp.admissible_[p] = 1;
    mdp.reward_[p] = e.reward;
    count[p] = e.successors.size();
  }
  for (int s = 0; s < num_states_; ++s) {
    bool any = false;
    for (int a = 0; a < num_actions_ && !any; ++a) any = mdp.admissible(s, a);
    if (!any) {
      throw ValidationError("state " + std::to_string(s) +
                            " has no admissible action");
    }
  }

  mdp.offset_.assign(pairs + 1, 0);
  for (std::size_t p = 0; p < pairs; ++p) {
    mdp.offset_[p + 1] = mdp.offset_[p] + count[p];
  }
  mdp.next_.resize(mdp.offset_.back());
  mdp.prob_.resize(mdp.offset_.back());
  for (const auto& e : entries_) {
    auto pos = mdp.offset_[mdp.pair(e.state, e.action)];
    for (const auto& succ : e.successors) {
      mdp.next_[pos] = succ.state;
      mdp.prob_[pos] = succ.prob;
      ++pos;
    }
  }
  entries_.clear();
  return mdp;
}

// -- StationaryPolicy ---------------------------------------------------------

StationaryPolicy StationaryPolicy::uniform(const TabularMdp& mdp) {
  Matrix probs = Matrix::Zero(mdp.num_states(), mdp.num_actions());
  for (int s = 0; s < mdp.num_states(); ++s) {
    const auto actions = mdp.admissible_actions(s);
    for (int a : actions) probs(s, a) = 1.0 / actions.size();
  }
  return StationaryPolicy(std::move(probs));
}

StationaryPolicy StationaryPolicy::deterministic(const TabularMdp& mdp,
                                                 std::span<const int> actions) {
  if (static_cast<int>(actions.size()) != mdp.num_states()) {
    throw ValidationError("one action per state required");
  }
  Matrix probs = Matrix::Zero(mdp.num_states(), mdp.num_actions());
  for (int s = 0; s < mdp.num_states(); ++s) probs(s, actions[s]) = 1.0;
  StationaryPolicy pi(std::move(probs));
  pi.validate_for(mdp);
  return pi;
}

void StationaryPolicy::validate_for(const TabularMdp& mdp) const {
  if (probs_.rows() != mdp.num_states() || probs_.cols() != mdp.num_actions()) {
    throw ValidationError("policy dimensions do not match the MDP");
  }
  for (int s = 0; s < mdp.num_states(); ++s) {
    double sum = 0.0;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const double p = probs_(s, a);
      if (!(p >= 0.0)) {
        throw ValidationError("policy has a negative entry at state " +
                              std::to_string(s));
      }
      if (p > 0.0 && !mdp.admissible(s, a)) {
        throw ValidationError("policy puts mass on an inadmissible action at "
                              "state " + std::to_string(s));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw ValidationError("policy row " + std::to_string(s) +
                            " does not sum to 1");
    }
  }
}

// -- Evaluation ---------------------------------------------------------------

Vector policy_reward(const TabularMdp& mdp, const StationaryPolicy& pi) {
  Vector r = Vector::Zero(mdp.num_states());
  for (int s = 0; s < mdp.num_states(); ++s) {
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const double w = pi(s, a);
      if (w != 0.0) r(s) += w * mdp.reward(s, a);
    }
  }
  return r;
}

double bellman_residual(const TabularMdp& mdp, const StationaryPolicy& pi,
                        const Vector& value) {
  return residual_of(policy_transitions(mdp, pi), policy_reward(mdp, pi),
                     mdp.discount(), value);
}

Vector evaluate_policy(const TabularMdp& mdp, const StationaryPolicy& pi,
                       const EvaluationOptions& options) {
  pi.validate_for(mdp);
  return solve_values(policy_transitions(mdp, pi), policy_reward(mdp, pi),
                      mdp.discount(), options);
}

ActionValues action_values(const TabularMdp& mdp, const StationaryPolicy& pi,
                           const Vector& value) {
  pi.validate_for(mdp);
  if (value.size() != mdp.num_states()) {
    throw ValidationError("value vector has the wrong length");
  }
  ActionValues out{Matrix::Zero(mdp.num_states(), mdp.num_actions()),
                   Matrix::Zero(mdp.num_states(), mdp.num_actions())};
  const double gamma = mdp.discount();
  for (int s = 0; s < mdp.num_states(); ++s) {
    for (int a = 0; a < mdp.num_actions(); ++a) {
      if (!mdp.admissible(s, a)) continue;
      const auto next = mdp.next_states(s, a);
      const auto prob = mdp.next_probs(s, a);
      double q = 0.0;
      for (std::size_t j = 0; j < next.size(); ++j) q += prob[j] * value(next[j]);
      q = mdp.reward(s, a) + gamma * q;
      out.q(s, a) = q;
      out.advantage(s, a) = q - value(s);
    }
  }
  return out;
}

double advantage_of_distribution(const TabularMdp& mdp,
                                 const Matrix& advantage, int s,
                                 std::span<const double> nu) {
  if (s < 0 || s >= mdp.num_states() ||
      static_cast<int>(nu.size()) != mdp.num_actions()) {
    throw ValidationError("state or distribution size mismatch");
  }
  check_simplex(nu, 1e-12, "action distribution");
  double sum = 0.0;
  for (int a = 0; a < mdp.num_actions(); ++a) {
    if (nu[a] == 0.0) continue;
    if (!mdp.admissible(s, a)) {
      throw ValidationError("distribution supported on inadmissible action");
    }
    sum += nu[a] * advantage(s, a);
  }
  return sum;
}

// Howard policy iteration. Improvements below `switch_threshold` are ignored
// so that float noise cannot make the iteration cycle.
OptimalSolution value_iteration(const TabularMdp& mdp,
                                const EvaluationOptions& options) {
  const int n = mdp.num_states();
  const double scale = std::max(1.0, mdp.value_bound());
  const double switch_threshold = 1e-12 * scale;

  std::vector<int> greedy(n);
  for (int s = 0; s < n; ++s) {
    int best = -1;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      if (!mdp.admissible(s, a)) continue;
      if (best < 0 || mdp.reward(s, a) > mdp.reward(s, best)) best = a;
    }
    greedy[s] = best;
  }

  Vector value;
  EvaluationOptions eval = options;
  for (int iteration = 0;; ++iteration) {
    if (iteration > 10'000) throw SolverError("policy iteration did not stop");
    const auto pi = StationaryPolicy::deterministic(mdp, greedy);
    eval.warm_start = value.size() == n ? &value : nullptr;
    value = evaluate_policy(mdp, pi, eval);
    const auto av = action_values(mdp, pi, value);
    bool changed = false;
    for (int s = 0; s < n; ++s) {
      int best = greedy[s];
      for (int a = 0; a < mdp.num_actions(); ++a) {
        if (mdp.admissible(s, a) && av.q(s, a) > av.q(s, best) + switch_threshold) {
          best = a;
        }
      }
      if (best != greedy[s]) {
        greedy[s] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }

  // Re-extract the greedy policy with lowest-index tie breaking.
  {
    const auto pi = StationaryPolicy::deterministic(mdp, greedy);
    const auto av = action_values(mdp, pi, value);
    for (int s = 0; s < n; ++s) {
      double best_q = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.num_actions(); ++a) {
        if (mdp.admissible(s, a)) best_q = std::max(best_q, av.q(s, a));
      }
      const double tie = 1e-13 * std::max(1.0, std::abs(best_q));
      for (int a = 0; a < mdp.num_actions(); ++a) {
        if (mdp.admissible(s, a) && av.q(s, a) >= best_q - tie) {
          greedy[s] = a;
          break;
        }
      }
    }
  }
  auto policy = StationaryPolicy::deterministic(mdp, greedy);
  eval.warm_start = &value;
  value = evaluate_policy(mdp, policy, eval);
  auto av = action_values(mdp, policy, value);
  return {std::move(value), std::move(av.q), std::move(policy)};
}

std::vector<int> argmax_actions(const TabularMdp& mdp, const Matrix& q, int s,
                                double tolerance) {
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < mdp.num_actions(); ++a) {
    if (mdp.admissible(s, a)) best = std::max(best, q(s, a));
  }
  std::vector<int> out;
  for (int a = 0; a < mdp.num_actions(); ++a) {
    if (mdp.admissible(s, a) && q(s, a) >= best - tolerance) out.push_back(a);
  }
  return out;
}

Vector discounted_visitation(const TabularMdp& mdp, const StationaryPolicy& pi,
                             const Vector& mu0,
                             const EvaluationOptions& options) {
  pi.validate_for(mdp);
  if (mu0.size() != mdp.num_states()) {
    throw ValidationError("initial distribution has the wrong length");
  }
  check_simplex({mu0.data(), static_cast<std::size_t>(mu0.size())}, 1e-9,
                "initial distribution");
  const double gamma = mdp.discount();
  const int n = mdp.num_states();
  const SparseRows p = policy_transitions(mdp, pi);
  const Vector source = (1.0 - gamma) * mu0;
  const SparseRows pt = p.transpose();

  auto residual = [&](const Vector& mu) {
    return (source + gamma * (pt * mu) - mu).lpNorm<Eigen::Infinity>();
  };

  Vector mu;
  if (n <= options.dense_limit) {
    Matrix system = Matrix::Identity(n, n) - gamma * Matrix(pt);
    mu = system.partialPivLu().solve(source);
    if (residual(mu) <= options.tolerance) return mu;
  } else {
    mu = source;
  }
  for (long sweep = 0; sweep < options.max_sweeps; ++sweep) {
    mu = source + gamma * (pt * mu);
    if (residual(mu) <= options.tolerance) return mu;
  }
  throw SolverError("visitation distribution did not converge");
}

PerformanceDifference performance_difference(const TabularMdp& mdp,
                                             const StationaryPolicy& pi,
                                             const StationaryPolicy& pi_prime,
                                             const Vector& mu0) {
  const Vector v = evaluate_policy(mdp, pi);
  const Vector v_prime = evaluate_policy(mdp, pi_prime);
  const auto av_prime = action_values(mdp, pi_prime, v_prime);
  const Vector mu = discounted_visitation(mdp, pi, mu0);
  double rhs = 0.0;
  for (int s = 0; s < mdp.num_states(); ++s) {
    double inner = 0.0;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      inner += pi(s, a) * av_prime.advantage(s, a);
    }
    rhs += mu(s) * inner;
  }
  rhs /= 1.0 - mdp.discount();
  return {value_at(v, mu0) - value_at(v_prime, mu0), rhs};
}

}  // namespace orchestra
