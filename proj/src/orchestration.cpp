#include "orchestra/orchestration.hpp"

#include <algorithm>
#include <cmath>

namespace orchestra {

ExpertSet::ExpertSet(std::vector<StationaryPolicy> experts,
                     std::vector<std::string> names)
    : experts_(std::move(experts)), names_(std::move(names)) {
  if (experts_.empty()) throw ValidationError("expert set is empty");
  const auto rows = experts_.front().num_states();
  const auto cols = experts_.front().num_actions();
  for (const auto& pi : experts_) {
    if (pi.num_states() != rows || pi.num_actions() != cols) {
      throw ValidationError("experts have different dimensions");
    }
  }
  if (names_.empty()) {
    for (int k = 0; k < size(); ++k) names_.push_back("pi" + std::to_string(k + 1));
  }
  if (static_cast<int>(names_.size()) != size()) {
    throw ValidationError("one name per expert is required");
  }
}

void ExpertSet::validate_for(const TabularMdp& mdp) const {
  for (const auto& pi : experts_) pi.validate_for(mdp);
}

std::vector<int> ExpertSet::support_union(int s) const {
  std::vector<int> actions;
  for (int a = 0; a < num_actions(); ++a) {
    for (const auto& pi : experts_) {
      if (pi(s, a) > 0.0) {
        actions.push_back(a);
        break;
      }
    }
  }
  return actions;
}

void check_state_weights(const Matrix& q, int num_states, int num_experts) {
  if (q.rows() != num_states || q.cols() != num_experts) {
    throw ValidationError("state weights have wrong dimensions");
  }
  for (int s = 0; s < num_states; ++s) {
    check_simplex({q.row(s).data(), static_cast<std::size_t>(num_experts)},
                  1e-12, "state weights");
  }
}

Matrix uniform_weights(int num_states, int num_experts) {
  return Matrix::Constant(num_states, num_experts, 1.0 / num_experts);
}

StationaryPolicy mix_policy(const Matrix& q, const ExpertSet& experts) {
  const int states = experts.num_states();
  const int k_count = experts.size();
  if (q.rows() != states || q.cols() != k_count) {
    throw ValidationError("weights do not match the expert set");
  }
  check_state_weights(q, states, k_count);
  Matrix probs = Matrix::Zero(states, experts.num_actions());
  for (int k = 0; k < k_count; ++k) {
    probs += q.col(k).asDiagonal() * experts[k].probs();
  }
  return StationaryPolicy(std::move(probs));
}

TabularMdp lift_mdp(const TabularMdp& mdp, const ExpertSet& experts) {
  experts.validate_for(mdp);
  MdpBuilder builder(mdp.num_states(), experts.size(), mdp.discount(),
                     mdp.reward_max());
  for (int s = 0; s < mdp.num_states(); ++s) {
    for (int k = 0; k < experts.size(); ++k) {
      double reward = 0.0;
      std::vector<Successor> successors;
      for (int a = 0; a < mdp.num_actions(); ++a) {
        const double w = experts[k](s, a);
        if (w == 0.0) continue;
        reward += w * mdp.reward(s, a);
        const auto next = mdp.next_states(s, a);
        const auto prob = mdp.next_probs(s, a);
        for (std::size_t j = 0; j < next.size(); ++j) {
          successors.push_back({next[j], w * prob[j]});
        }
      }
      reward = std::clamp(reward, 0.0, mdp.reward_max());
      builder.add_action(s, k, reward, std::move(successors));
    }
  }
  return std::move(builder).build();
}

Matrix expert_advantages(const Matrix& advantage, const ExpertSet& experts) {
  if (advantage.rows() != experts.num_states() ||
      advantage.cols() != experts.num_actions()) {
    throw ValidationError("advantage table does not match the expert set");
  }
  Matrix abar(advantage.rows(), experts.size());
  for (int k = 0; k < experts.size(); ++k) {
    abar.col(k) = experts[k].probs().cwiseProduct(advantage).rowwise().sum();
  }
  return abar;
}

Orchestration optimal_orchestration(const TabularMdp& mdp,
                                    const ExpertSet& experts,
                                    const EvaluationOptions& options) {
  const TabularMdp lifted = lift_mdp(mdp, experts);
  OptimalSolution solution = value_iteration(lifted, options);
  Orchestration result;
  result.q = solution.policy.probs();
  result.value = std::move(solution.value);
  result.choice.resize(mdp.num_states());
  for (int s = 0; s < mdp.num_states(); ++s) {
    Eigen::Index k = 0;
    result.q.row(s).maxCoeff(&k);
    result.choice[s] = static_cast<int>(k);
  }
  return result;
}

std::vector<double> appearance_rates(const Orchestration& orchestration,
                                     int num_experts) {
  std::vector<double> rates(num_experts, 0.0);
  if (orchestration.choice.empty()) return rates;
  for (int k : orchestration.choice) rates.at(k) += 1.0;
  for (double& r : rates) r /= static_cast<double>(orchestration.choice.size());
  return rates;
}

ApproximationError approximation_error(const TabularMdp& mdp,
                                       const ExpertSet& experts,
                                       const Vector& mu0,
                                       double argmax_tolerance) {
  const OptimalSolution best = value_iteration(mdp);
  const Orchestration orch = optimal_orchestration(mdp, experts);
  ApproximationError out;
  out.error = value_at(best.value, mu0) - value_at(orch.value, mu0);
  out.max_state_error = (best.value - orch.value).maxCoeff();
  out.certificate.resize(mdp.num_states());
  out.certified_everywhere = true;
  for (int s = 0; s < mdp.num_states(); ++s) {
    const auto greedy = argmax_actions(mdp, best.q, s, argmax_tolerance);
    std::vector<int> members;
    for (int k = 0; k < experts.size(); ++k) {
      bool inside = true;
      for (int a = 0; a < mdp.num_actions() && inside; ++a) {
        if (experts[k](s, a) > 0.0 &&
            !std::binary_search(greedy.begin(), greedy.end(), a)) {
          inside = false;
        }
      }
      if (inside) members.push_back(k);
    }
    if (members.empty()) {
      out.certified_everywhere = false;
    } else {
      out.certificate[s] = std::move(members);
    }
  }
  return out;
}

OracleRunRecord run_oracle_loop(const TabularMdp& mdp, const ExpertSet& experts,
                                const Vector& mu0,
                                const OracleRunOptions& options) {
  if (options.rounds < 1) throw ValidationError("oracle loop needs T >= 1");
  experts.validate_for(mdp);
  if (mu0.size() != mdp.num_states()) {
    throw ValidationError("initial distribution has wrong length");
  }
  check_simplex({mu0.data(), static_cast<std::size_t>(mu0.size())}, 1e-9,
                "initial distribution");

  const int states = mdp.num_states();
  const int k_count = experts.size();
  OracleRunRecord record;
  record.kind = options.kind;
  record.gain_bound = options.gain_bound.value_or(mdp.value_bound());

  std::vector<AdversarialLearner> learners;
  learners.reserve(states);
  for (int s = 0; s < states; ++s) {
    learners.emplace_back(options.kind, k_count, record.gain_bound,
                          options.params);
  }

  Matrix q = uniform_weights(states, k_count);
  Vector value;
  record.values.reserve(options.rounds);
  for (int t = 1; t <= options.rounds; ++t) {
    const StationaryPolicy pi = mix_policy(q, experts);
    EvaluationOptions eval;
    if (value.size() == states) eval.warm_start = &value;
    value = evaluate_policy(mdp, pi, eval);
    record.values.push_back(value_at(value, mu0));
    if (options.keep_weights) record.weights.push_back(q);

    const ActionValues av = action_values(mdp, pi, value);
    const Matrix abar = expert_advantages(av.advantage, experts);
    for (int s = 0; s < states; ++s) {
      learners[s].observe({abar.row(s).data(), static_cast<std::size_t>(k_count)});
      const auto w = learners[s].weights();
      for (int k = 0; k < k_count; ++k) q(s, k) = w[k];
    }
  }
  record.final_weights = std::move(q);

  if (options.compute_targets) {
    record.target_orchestration =
        value_at(optimal_orchestration(mdp, experts).value, mu0);
    record.target_optimal = value_at(value_iteration(mdp).value, mu0);
  }
  return record;
}

}  // namespace orchestra
