#include "orchestra/random_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "orchestra/rng.hpp"

namespace orchestra {
namespace {

std::vector<double> exponential_weights(RngStream& rng, std::size_t n) {
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& x : w) {
    x = -std::log1p(-rng.uniform());
    total += x;
  }
  if (!(total > 0.0)) {
    std::fill(w.begin(), w.end(), 1.0 / n);
    return w;
  }
  for (auto& x : w) x /= total;
  return w;
}

}  // namespace

TabularMdp random_mdp(const RandomMdpSpec& spec, std::uint64_t seed) {
  if (spec.num_states < 1 || spec.num_actions < 1) {
    throw ValidationError("random MDP needs at least one state and action");
  }
  RngStream rng = RngStream::derive(seed, 0, 0, 0, RngPurpose::kGenerator);
  MdpBuilder builder(spec.num_states, spec.num_actions, spec.discount,
                     spec.reward_max);
  const int max_next = spec.max_successors > 0
                           ? std::min(spec.max_successors, spec.num_states)
                           : spec.num_states;
  std::vector<int> order(spec.num_states);
  for (int s = 0; s < spec.num_states; ++s) {
    std::vector<int> actions;
    for (int a = 0; a < spec.num_actions; ++a) {
      if (rng.uniform() < spec.admissible_prob) actions.push_back(a);
    }
    if (actions.empty()) {
      actions.push_back(static_cast<int>(rng.below(spec.num_actions)));
    }
    for (int a : actions) {
      const double reward = spec.reward_max * rng.uniform();
      const int count = spec.max_successors > 0
                            ? 1 + static_cast<int>(rng.below(max_next))
                            : spec.num_states;
      std::iota(order.begin(), order.end(), 0);
      for (int i = 0; i < count; ++i) {
        const int j = i + static_cast<int>(rng.below(spec.num_states - i));
        std::swap(order[i], order[j]);
      }
      const auto probs = exponential_weights(rng, count);
      std::vector<Successor> successors;
      for (int i = 0; i < count; ++i) successors.push_back({order[i], probs[i]});
      builder.add_action(s, a, reward, std::move(successors));
    }
  }
  return std::move(builder).build();
}

StationaryPolicy random_policy(const TabularMdp& mdp, std::uint64_t seed,
                               bool deterministic) {
  RngStream rng = RngStream::derive(seed, 1, 0, 0, RngPurpose::kGenerator);
  Matrix probs = Matrix::Zero(mdp.num_states(), mdp.num_actions());
  for (int s = 0; s < mdp.num_states(); ++s) {
    const auto actions = mdp.admissible_actions(s);
    if (deterministic) {
      probs(s, actions[rng.below(actions.size())]) = 1.0;
      continue;
    }
    const auto w = exponential_weights(rng, actions.size());
    for (std::size_t i = 0; i < actions.size(); ++i) probs(s, actions[i]) = w[i];
  }
  return StationaryPolicy(std::move(probs));
}

ExpertSet random_experts(const TabularMdp& mdp, int num_experts,
                         std::uint64_t seed) {
  std::vector<StationaryPolicy> experts;
  for (int k = 0; k < num_experts; ++k) {
    experts.push_back(random_policy(mdp, mix64(seed + 1000003ULL * (k + 1)),
                                    k % 2 == 0));
  }
  return ExpertSet(std::move(experts));
}

Vector random_distribution(int size, std::uint64_t seed) {
  RngStream rng = RngStream::derive(seed, 2, 0, 0, RngPurpose::kGenerator);
  const auto w = exponential_weights(rng, size);
  return Eigen::Map<const Vector>(w.data(), size);
}

}  // namespace orchestra
