#include "orchestra/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "orchestra/rng.hpp"

namespace orchestra {

void MatchingConfig::validate() const {
  if (num_classes < 1) throw ValidationError("need at least one class");
  if (max_queue < 1) throw ValidationError("max queue length must be >= 1");
  if (!(holding_coeff >= 0.0) || !std::isfinite(holding_coeff)) {
    throw ValidationError("holding coefficient must be nonnegative");
  }
  if (!(discount > 0.0 && discount < 1.0)) {
    throw ValidationError("discount must lie in (0, 1)");
  }
  if (static_cast<int>(arrival_probs.size()) != num_classes) {
    throw ValidationError("one arrival probability per class is required");
  }
  check_simplex(arrival_probs, 1e-12, "arrival probabilities");
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(num_classes) * num_classes, 0);
  for (const auto& e : edges) {
    if (e.a < 0 || e.b < 0 || e.a >= num_classes || e.b >= num_classes) {
      throw ValidationError("edge endpoint out of range");
    }
    if (e.a == e.b) throw ValidationError("self-loops are not allowed");
    if (!(e.payoff >= 0.0) || !std::isfinite(e.payoff)) {
      throw ValidationError("edge payoffs must be finite and nonnegative");
    }
    auto& flag = seen[static_cast<std::size_t>(std::min(e.a, e.b)) * num_classes +
                      std::max(e.a, e.b)];
    if (flag) throw ValidationError("duplicate edge");
    flag = 1;
  }
}

Matrix MatchingConfig::payoff_matrix() const {
  Matrix g = Matrix::Zero(num_classes, num_classes);
  for (const auto& e : edges) {
    g(e.a, e.b) = e.payoff;
    g(e.b, e.a) = e.payoff;
  }
  return g;
}

StateCodec::StateCodec(int num_classes, int max_queue)
    : num_classes_(num_classes), max_queue_(max_queue) {
  long long block = 1;
  for (int j = 0; j < num_classes; ++j) {
    block *= max_queue + 1;
    if (block > (1LL << 30)) throw ValidationError("state space too large");
  }
  block_ = static_cast<int>(block);
  if (block * num_classes > (1LL << 30)) {
    throw ValidationError("state space too large");
  }
  num_states_ = static_cast<int>(block * num_classes);
}

int StateCodec::encode(std::span<const int> queues, int incoming) const {
  if (static_cast<int>(queues.size()) != num_classes_ || incoming < 0 ||
      incoming >= num_classes_) {
    throw ValidationError("malformed matching state");
  }
  int code = 0;
  int radix = 1;
  for (int j = 0; j < num_classes_; ++j) {
    if (queues[j] < 0 || queues[j] > max_queue_) {
      throw ValidationError("queue length out of range");
    }
    code += queues[j] * radix;
    radix *= max_queue_ + 1;
  }
  return incoming * block_ + code;
}

MatchingState StateCodec::decode(int code) const {
  if (code < 0 || code >= num_states_) throw ValidationError("state out of range");
  MatchingState state;
  state.incoming = code / block_;
  int rest = code % block_;
  state.queues.resize(num_classes_);
  for (int j = 0; j < num_classes_; ++j) {
    state.queues[j] = rest % (max_queue_ + 1);
    rest /= max_queue_ + 1;
  }
  return state;
}

namespace {

// Edges with zero payoff still connect classes, so adjacency is kept apart
// from the payoff values.
std::vector<std::uint8_t> adjacency(const MatchingConfig& config) {
  const int n = config.num_classes;
  std::vector<std::uint8_t> adj(static_cast<std::size_t>(n) * n, 0);
  for (const auto& e : config.edges) {
    adj[static_cast<std::size_t>(e.a) * n + e.b] = 1;
    adj[static_cast<std::size_t>(e.b) * n + e.a] = 1;
  }
  return adj;
}

std::vector<int> matches_of(const std::vector<std::uint8_t>& adj, int n,
                            const MatchingState& state) {
  std::vector<int> matches;
  for (int j = 0; j < n; ++j) {
    if (adj[static_cast<std::size_t>(state.incoming) * n + j] &&
        state.queues[j] >= 1) {
      matches.push_back(j);
    }
  }
  return matches;
}

}  // namespace

std::vector<int> prospective_matches(const MatchingConfig& config,
                                     const MatchingState& state) {
  return matches_of(adjacency(config), config.num_classes, state);
}

MatchingModel build_matching_mdp(const MatchingConfig& config) {
  config.validate();
  long long needed = config.num_classes;
  for (int j = 0; j < config.num_classes; ++j) {
    needed *= config.max_queue + 1;
    if (needed > config.state_cap) break;
  }
  if (needed > config.state_cap) {
    throw ValidationError("matching state space exceeds the cap of " +
                          std::to_string(config.state_cap) +
                          " states; raise state_cap to at least I (L+1)^I");
  }

  const int n = config.num_classes;
  const int cap = config.max_queue;
  MatchingModel model;
  model.codec = StateCodec(n, cap);
  model.payoff = config.payoff_matrix();
  const auto adj = adjacency(config);
  const double reward_max = config.holding_coeff * cap * n + model.payoff.maxCoeff();
  if (!(reward_max > 0.0)) {
    throw ValidationError("reward range is zero; need c > 0 or a positive payoff");
  }

  const int states = model.codec.num_states();
  MdpBuilder builder(states, n + 2, config.discount, reward_max);
  std::vector<int> next(n);
  for (int code = 0; code < states; ++code) {
    const MatchingState st = model.codec.decode(code);
    double holding = 0.0;
    for (int j = 0; j < n; ++j) holding += cap - st.queues[j];
    holding *= config.holding_coeff;

    auto add = [&](int action, const std::vector<int>& queues, double reward) {
      std::vector<Successor> successors;
      for (int i = 0; i < n; ++i) {
        if (config.arrival_probs[i] > 0.0) {
          successors.push_back({model.codec.encode(queues, i), config.arrival_probs[i]});
        }
      }
      builder.add_action(code, action, std::min(reward, reward_max),
                         std::move(successors));
    };

    const auto matches = matches_of(adj, n, st);
    for (int j : matches) {
      next = st.queues;
      if (config.literal_match_transition) {
        next[j] = std::min(next[j] + 1, cap);
      } else {
        next[j] -= 1;
      }
      add(j, next, holding + model.payoff(st.incoming, j));
    }
    const bool full = st.queues[st.incoming] == cap;
    if (!full && (matches.empty() || config.enqueue_with_match)) {
      next = st.queues;
      next[st.incoming] += 1;
      add(enqueue_action(n), next, holding);
    }
    if (full && (matches.empty() || config.enqueue_with_match)) {
      add(trash_action(n), st.queues, holding);
    }
  }
  model.mdp = std::move(builder).build();

  model.mu0 = Vector::Zero(states);
  const std::vector<int> empty(n, 0);
  for (int i = 0; i < n; ++i) {
    model.mu0(model.codec.encode(empty, i)) = config.arrival_probs[i];
  }
  return model;
}

std::string_view to_string(MatchingExpert kind) {
  switch (kind) {
    case MatchingExpert::kMatchLongest:
      return "match_longest";
    case MatchingExpert::kMaxPayoff:
      return "max_payoff";
    case MatchingExpert::kUniformRandom:
      return "uniform_random";
    case MatchingExpert::kPermutationPriority:
      return "permutation_priority";
  }
  return "unknown";
}

MatchingExpert parse_matching_expert(std::string_view name) {
  if (name == "match_longest") return MatchingExpert::kMatchLongest;
  if (name == "max_payoff") return MatchingExpert::kMaxPayoff;
  if (name == "uniform_random") return MatchingExpert::kUniformRandom;
  if (name == "permutation_priority") return MatchingExpert::kPermutationPriority;
  throw ValidationError("unknown matching expert '" + std::string(name) + "'");
}

std::vector<int> draw_priority(int num_classes, std::uint64_t seed) {
  if (num_classes < 1) throw ValidationError("need at least one class");
  std::vector<int> sigma(num_classes);
  std::iota(sigma.begin(), sigma.end(), 0);
  RngStream rng = RngStream::derive(seed, 0, 0, 0, RngPurpose::kGenerator);
  for (int i = num_classes - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(sigma[i], sigma[j]);
  }
  return sigma;
}

StationaryPolicy matching_expert(const MatchingModel& model,
                                 const MatchingConfig& config,
                                 MatchingExpert kind,
                                 std::span<const int> priority) {
  const int n = config.num_classes;
  if (kind == MatchingExpert::kPermutationPriority) {
    std::vector<int> sorted(priority.begin(), priority.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expected(n);
    std::iota(expected.begin(), expected.end(), 0);
    if (sorted != expected) {
      throw ValidationError("priority must be a permutation of the classes");
    }
  }
  const auto adj = adjacency(config);
  const TabularMdp& mdp = model.mdp;
  Matrix probs = Matrix::Zero(mdp.num_states(), mdp.num_actions());
  for (int code = 0; code < mdp.num_states(); ++code) {
    const MatchingState st = model.codec.decode(code);
    const auto matches = matches_of(adj, n, st);
    if (matches.empty()) {
      const bool full = st.queues[st.incoming] == config.max_queue;
      probs(code, full ? trash_action(n) : enqueue_action(n)) = 1.0;
      continue;
    }
    const auto g = [&](int j) { return model.payoff(st.incoming, j); };
    const auto rho = [&](int j) { return st.queues[j]; };
    int pick = matches.front();
    switch (kind) {
      case MatchingExpert::kMatchLongest:
        for (int j : matches) {
          if (rho(j) > rho(pick) || (rho(j) == rho(pick) && g(j) > g(pick))) pick = j;
        }
        break;
      case MatchingExpert::kMaxPayoff:
        for (int j : matches) {
          if (g(j) > g(pick) || (g(j) == g(pick) && rho(j) > rho(pick))) pick = j;
        }
        break;
      case MatchingExpert::kPermutationPriority:
        for (int j : matches) {
          if (priority[j] > priority[pick]) pick = j;
        }
        break;
      case MatchingExpert::kUniformRandom:
        for (int j : matches) probs(code, j) = 1.0 / matches.size();
        continue;
    }
    probs(code, pick) = 1.0;
  }
  return StationaryPolicy(std::move(probs));
}

}  // namespace orchestra
