#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orchestra/mdp.hpp"

namespace orchestra {

/// Undirected compatibility edge between classes a and b (0-based).
struct MatchingEdge {
  int a;
  int b;
  double payoff;

  bool operator==(const MatchingEdge&) const = default;
};

/**
 * Discrete-time matching queue. At each step an item of class i arrives
 * (i ~ lambda). The controller matches it with a queued item of a compatible
 * class j (action j), enqueues it (action I) or trashes it (action I + 1).
 */
struct MatchingConfig {
  int num_classes = 0;
  int max_queue = 0;
  double holding_coeff = 0.0;
  double discount = 0.0;
  std::vector<double> arrival_probs;
  std::vector<MatchingEdge> edges;
  /// A match grows the matched queue (rho + 1_a, capped at L) instead of
  /// removing the matched item.
  bool literal_match_transition = false;
  /// Enqueueing stays admissible when a match is available.
  bool enqueue_with_match = false;
  long long state_cap = 2'000'000;

  void validate() const;
  /// Symmetric payoff matrix, zero where there is no edge.
  Matrix payoff_matrix() const;

  bool operator==(const MatchingConfig&) const = default;
};

struct MatchingState {
  std::vector<int> queues;
  int incoming = 0;

  bool operator==(const MatchingState&) const = default;
};

/// Bijection state <-> i (L+1)^I + sum_j rho_j (L+1)^j.
class StateCodec {
 public:
  StateCodec() = default;
  StateCodec(int num_classes, int max_queue);

  int num_states() const { return num_states_; }
  int encode(std::span<const int> queues, int incoming) const;
  int encode(const MatchingState& state) const {
    return encode(state.queues, state.incoming);
  }
  MatchingState decode(int code) const;

 private:
  int num_classes_ = 0;
  int max_queue_ = 0;
  int block_ = 0;
  int num_states_ = 0;
};

struct MatchingModel {
  TabularMdp mdp;
  /// Empty queues, incoming class drawn from lambda.
  Vector mu0;
  StateCodec codec;
  Matrix payoff;
};

MatchingModel build_matching_mdp(const MatchingConfig& config);

inline int enqueue_action(int num_classes) { return num_classes; }
inline int trash_action(int num_classes) { return num_classes + 1; }

/// Classes j adjacent to the incoming class with rho_j >= 1, increasing.
std::vector<int> prospective_matches(const MatchingConfig& config,
                                     const MatchingState& state);

enum class MatchingExpert {
  kMatchLongest,
  kMaxPayoff,
  kUniformRandom,
  kPermutationPriority,
};

std::string_view to_string(MatchingExpert kind);
/// Accepts "match_longest", "max_payoff", "uniform_random",
/// "permutation_priority".
MatchingExpert parse_matching_expert(std::string_view name);

/// Random priority order sigma over the classes (a permutation of 0..I-1).
std::vector<int> draw_priority(int num_classes, std::uint64_t seed);

/**
 * Expert policy over all states. Without a prospective match every expert
 * enqueues (or trashes when the incoming queue is full). Otherwise:
 * match_longest picks the longest queue (ties: larger payoff, then lower
 * class), max_payoff picks the largest payoff (ties: longer queue, then lower
 * class), uniform_random is uniform over the matches, permutation_priority
 * picks the largest sigma.
 */
StationaryPolicy matching_expert(const MatchingModel& model,
                                 const MatchingConfig& config,
                                 MatchingExpert kind,
                                 std::span<const int> priority = {});

}  // namespace orchestra
