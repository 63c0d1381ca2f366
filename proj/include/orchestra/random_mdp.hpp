#pragma once

#include <cstdint>

#include "orchestra/mdp.hpp"
#include "orchestra/orchestration.hpp"

namespace orchestra {

struct RandomMdpSpec {
  int num_states = 5;
  int num_actions = 3;
  double discount = 0.8;
  double reward_max = 1.0;
  /// Successors per (s, a) are drawn from 1..max_successors; 0 means all
  /// states.
  int max_successors = 0;
  /// Probability that an action is admissible; every state keeps at least
  /// one admissible action.
  double admissible_prob = 1.0;
};

/// Rewards uniform on [0, reward_max], transition rows from normalized
/// exponential draws.
TabularMdp random_mdp(const RandomMdpSpec& spec, std::uint64_t seed);

/// Random policy supported on admissible actions; Dirac rows when
/// `deterministic` is set.
StationaryPolicy random_policy(const TabularMdp& mdp, std::uint64_t seed,
                               bool deterministic = false);

/// K random experts, alternating deterministic and stochastic ones.
ExpertSet random_experts(const TabularMdp& mdp, int num_experts,
                         std::uint64_t seed);

/// Random point of the simplex.
Vector random_distribution(int size, std::uint64_t seed);

}  // namespace orchestra
