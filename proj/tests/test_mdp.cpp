#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "orchestra/mdp.hpp"
#include "orchestra/random_mdp.hpp"

using namespace orchestra;

namespace {

TabularMdp constant_reward_mdp() {
  // Two states, reward 1 everywhere, gamma 0.8: V = 1 / 0.2 = 5.
  MdpBuilder b(2, 2, 0.8, 1.0);
  b.add_action(0, 0, 1.0, {{0, 0.5}, {1, 0.5}});
  b.add_action(0, 1, 1.0, {{1, 1.0}});
  b.add_action(1, 0, 1.0, {{0, 1.0}});
  b.add_action(1, 1, 1.0, {{1, 0.3}, {0, 0.7}});
  return std::move(b).build();
}

TabularMdp seed7_mdp() { return random_mdp(RandomMdpSpec{}, 7); }

}  // namespace

TEST_SUITE("mdp_core") {

TEST_CASE("constant reward gives V = r / (1 - gamma) and zero advantages") {
  const TabularMdp mdp = constant_reward_mdp();
  const auto pi = StationaryPolicy::uniform(mdp);
  const Vector v = evaluate_policy(mdp, pi);
  CHECK(v(0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(v(1) == doctest::Approx(5.0).epsilon(1e-12));
  const auto av = action_values(mdp, pi, v);
  CHECK(av.advantage.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("builder rejects malformed input") {
  CHECK_THROWS_AS(MdpBuilder(0, 1, 0.5, 1.0), ValidationError);
  CHECK_THROWS_AS(MdpBuilder(1, 1, 1.0, 1.0), ValidationError);
  CHECK_THROWS_AS(MdpBuilder(1, 1, 0.5, 0.0), ValidationError);

  SUBCASE("row does not sum to one") {
    MdpBuilder b(2, 1, 0.5, 1.0);
    b.add_action(0, 0, 0.5, {{0, 0.5}, {1, 0.4}});
    b.add_action(1, 0, 0.5, {{1, 1.0}});
    CHECK_THROWS_AS(std::move(b).build(), ValidationError);
  }
  SUBCASE("reward out of range") {
    MdpBuilder b(1, 1, 0.5, 1.0);
    b.add_action(0, 0, 1.5, {{0, 1.0}});
    CHECK_THROWS_AS(std::move(b).build(), ValidationError);
  }
  SUBCASE("state without admissible action") {
    MdpBuilder b(2, 1, 0.5, 1.0);
    b.add_action(0, 0, 0.5, {{1, 1.0}});
    CHECK_THROWS_AS(std::move(b).build(), ValidationError);
  }
  SUBCASE("successor out of range") {
    MdpBuilder b(1, 1, 0.5, 1.0);
    CHECK_THROWS_AS(b.add_action(0, 0, 0.5, {{3, 1.0}}), ValidationError);
  }
  SUBCASE("duplicate successors are merged") {
    MdpBuilder b(2, 1, 0.5, 1.0);
    b.add_action(0, 0, 0.5, {{1, 0.25}, {1, 0.25}, {0, 0.5}});
    b.add_action(1, 0, 0.5, {{1, 1.0}});
    const TabularMdp mdp = std::move(b).build();
    CHECK(mdp.next_states(0, 0).size() == 2);
  }
}

TEST_CASE("policy validation") {
  const TabularMdp mdp = seed7_mdp();
  Matrix p = StationaryPolicy::uniform(mdp).probs();
  p(0, 0) += 0.1;
  CHECK_THROWS_AS(StationaryPolicy(p).validate_for(mdp), ValidationError);
  p(0, 0) -= 0.2;
  p(0, 1) += 0.1;
  p(0, 0) = -1e-3;
  CHECK_THROWS_AS(StationaryPolicy(p).validate_for(mdp), ValidationError);
}

TEST_CASE("policy evaluation matches successive approximation") {
  const TabularMdp mdp = seed7_mdp();
  const auto experts = random_experts(mdp, 3, 11);
  for (int k = 0; k < experts.size(); ++k) {
    const Vector v = evaluate_policy(mdp, experts[k]);
    const auto ref = oracle::policy_value(mdp, experts[k]);
    for (int s = 0; s < mdp.num_states(); ++s) CHECK(std::abs(v(s) - ref[s]) <= 1e-10);
    CHECK(bellman_residual(mdp, experts[k], v) <= 1e-9);

    const auto av = action_values(mdp, experts[k], v);
    for (int s = 0; s < mdp.num_states(); ++s) {
      const auto q = oracle::q_from_value(mdp, ref, s);
      for (int a = 0; a < mdp.num_actions(); ++a) {
        CHECK(std::abs(av.q(s, a) - q[a]) <= 1e-10);
        CHECK(std::abs(av.advantage(s, a) - (q[a] - ref[s])) <= 1e-10);
      }
    }
  }
}

TEST_CASE("policy evaluation agrees with a Monte Carlo estimate") {
  // Independent sampler driven by std::mt19937_64.
  const TabularMdp mdp = seed7_mdp();
  const auto pi = StationaryPolicy::uniform(mdp);
  const Vector v = evaluate_policy(mdp, pi);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int paths = 20000;
  const int horizon = 120;  // truncation 0.8^120 / 0.2 < 1e-11
  auto draw = [&](std::span<const double> w) {
    double x = u(rng);
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      if (x < w[i]) return static_cast<int>(i);
      x -= w[i];
    }
    return static_cast<int>(w.size()) - 1;
  };
  for (int s0 = 0; s0 < mdp.num_states(); ++s0) {
    double sum = 0.0, sq = 0.0;
    for (int n = 0; n < paths; ++n) {
      int s = s0;
      double g = 1.0, ret = 0.0;
      for (int t = 0; t < horizon; ++t) {
        std::vector<double> row(pi.probs().row(s).data(),
                                pi.probs().row(s).data() + mdp.num_actions());
        const int a = draw(row);
        ret += g * mdp.reward(s, a);
        s = mdp.next_states(s, a)[draw(mdp.next_probs(s, a))];
        g *= mdp.discount();
      }
      sum += ret;
      sq += ret * ret;
    }
    const double mean = sum / paths;
    const double se = std::sqrt((sq / paths - mean * mean) / paths);
    CHECK(std::abs(mean - v(s0)) <= 4.0 * se + 1e-9);
  }
}

TEST_CASE("advantage of distributions") {
  const TabularMdp mdp = seed7_mdp();
  const auto experts = random_experts(mdp, 2, 5);
  const StationaryPolicy& pi = experts[1];
  const Vector v = evaluate_policy(mdp, pi);
  const auto av = action_values(mdp, pi, v);
  const int m = mdp.num_actions();
  for (int s = 0; s < mdp.num_states(); ++s) {
    std::vector<double> row(pi.probs().row(s).data(), pi.probs().row(s).data() + m);
    CHECK(std::abs(advantage_of_distribution(mdp, av.advantage, s, row)) <= 1e-9);
    for (int a = 0; a < m; ++a) {
      std::vector<double> dirac(m, 0.0);
      dirac[a] = 1.0;
      CHECK(advantage_of_distribution(mdp, av.advantage, s, dirac) ==
            doctest::Approx(av.advantage(s, a)).epsilon(1e-12));
    }
    std::vector<double> uni(m, 1.0 / m);
    double mean = 0.0;
    for (int a = 0; a < m; ++a) mean += av.advantage(s, a) / m;
    CHECK(advantage_of_distribution(mdp, av.advantage, s, uni) ==
          doctest::Approx(mean).epsilon(1e-12));
  }
  std::vector<double> bad(m, 0.5);
  CHECK_THROWS_AS(advantage_of_distribution(mdp, av.advantage, 0, bad), ValidationError);
}

TEST_CASE("optimal policy on a dominant-action MDP is Dirac") {
  // Action 1 yields reward 1 and stays; action 0 yields 0.
  MdpBuilder b(3, 2, 0.9, 1.0);
  for (int s = 0; s < 3; ++s) {
    b.add_action(s, 0, 0.0, {{(s + 1) % 3, 1.0}});
    b.add_action(s, 1, 1.0, {{s, 1.0}});
  }
  const TabularMdp mdp = std::move(b).build();
  const auto sol = value_iteration(mdp);
  for (int s = 0; s < 3; ++s) {
    CHECK(sol.policy(s, 1) == 1.0);
    CHECK(sol.value(s) == doctest::Approx(10.0).epsilon(1e-12));
  }
}

TEST_CASE("optimal value dominates random policies") {
  const TabularMdp mdp = seed7_mdp();
  const auto sol = value_iteration(mdp);
  const auto ref = oracle::optimal_value(mdp);
  for (int s = 0; s < mdp.num_states(); ++s) CHECK(std::abs(sol.value(s) - ref[s]) <= 1e-9);
  const Vector v_star = evaluate_policy(mdp, sol.policy);
  CHECK((v_star - sol.value).cwiseAbs().maxCoeff() <= 1e-8);
  for (int i = 0; i < 100; ++i) {
    const auto pi = random_policy(mdp, 1000 + i, i % 3 == 0);
    const Vector v = evaluate_policy(mdp, pi);
    CHECK((sol.value - v).minCoeff() >= -1e-9);
  }
}

TEST_CASE("greedy ties go to the lowest action") {
  MdpBuilder b(1, 3, 0.5, 1.0);
  b.add_action(0, 0, 0.2, {{0, 1.0}});
  b.add_action(0, 1, 1.0, {{0, 1.0}});
  b.add_action(0, 2, 1.0, {{0, 1.0}});
  const TabularMdp mdp = std::move(b).build();
  const auto sol = value_iteration(mdp);
  CHECK(sol.policy(0, 1) == 1.0);
  CHECK(argmax_actions(mdp, sol.q, 0) == std::vector<int>{1, 2});
}

TEST_CASE("discounted visitation") {
  SUBCASE("absorbing state") {
    MdpBuilder b(2, 1, 0.7, 1.0);
    b.add_action(0, 0, 0.0, {{0, 1.0}});
    b.add_action(1, 0, 0.0, {{0, 1.0}});
    const TabularMdp mdp = std::move(b).build();
    Vector mu0(2);
    mu0 << 1.0, 0.0;
    const Vector mu = discounted_visitation(mdp, StationaryPolicy::uniform(mdp), mu0);
    CHECK(mu(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(mu(1)) <= 1e-12);
  }
  SUBCASE("small discount stays close to mu0") {
    RandomMdpSpec spec;
    spec.discount = 0.01;
    const TabularMdp mdp = random_mdp(spec, 3);
    const Vector mu0 = random_distribution(mdp.num_states(), 4);
    const Vector mu = discounted_visitation(mdp, StationaryPolicy::uniform(mdp), mu0);
    CHECK((mu - mu0).cwiseAbs().sum() <= 2.0 * 0.01 + 1e-12);
  }
  SUBCASE("power series and lower bound") {
    const TabularMdp mdp = seed7_mdp();
    const auto pi = random_policy(mdp, 8);
    const Vector mu0 = random_distribution(mdp.num_states(), 9);
    const Vector mu = discounted_visitation(mdp, pi, mu0);
    const auto ref = oracle::visitation_series(mdp, pi, mu0, 200);
    for (int s = 0; s < mdp.num_states(); ++s) {
      CHECK(std::abs(mu(s) - ref[s]) <= 1e-9);
      CHECK(mu(s) >= (1.0 - mdp.discount()) * mu0(s) - 1e-12);
    }
    CHECK(mu.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("performance difference identity") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 2 + rep % 9;
    const int m = 1 + rep % 4;
    const TabularMdp mdp = oracle::random_dense_mdp(rng, n, m, 0.9);
    const auto pi = oracle::random_dense_policy(rng, n, m);
    const auto pi_prime = oracle::random_dense_policy(rng, n, m);
    const Vector mu0 = oracle::random_simplex(rng, n);
    const auto pd = performance_difference(mdp, pi, pi_prime, mu0);

    // Independent right-hand side from the oracle tables.
    const auto v = oracle::policy_value(mdp, pi);
    const auto vp = oracle::policy_value(mdp, pi_prime);
    const auto mu = oracle::visitation_series(mdp, pi, mu0, 600);
    double lhs = 0.0, rhs = 0.0;
    for (int s = 0; s < n; ++s) {
      lhs += mu0(s) * (v[s] - vp[s]);
      const auto q = oracle::q_from_value(mdp, vp, s);
      double inner = 0.0;
      for (int a = 0; a < m; ++a) inner += pi(s, a) * (q[a] - vp[s]);
      rhs += mu[s] * inner;
    }
    rhs /= 1.0 - mdp.discount();
    CHECK(std::abs(pd.lhs - pd.rhs) <= 1e-8);
    CHECK(std::abs(pd.lhs - lhs) <= 1e-9);
    CHECK(std::abs(pd.rhs - rhs) <= 1e-9);
  }
}

TEST_CASE("iterative evaluation agrees with the dense path") {
  RandomMdpSpec spec;
  spec.num_states = 40;
  spec.max_successors = 5;
  spec.discount = 0.95;
  const TabularMdp mdp = random_mdp(spec, 21);
  const auto pi = random_policy(mdp, 22);
  EvaluationOptions iterative;
  iterative.dense_limit = 0;
  iterative.tolerance = 1e-11;
  const Vector dense = evaluate_policy(mdp, pi);
  const Vector sweep = evaluate_policy(mdp, pi, iterative);
  CHECK((dense - sweep).cwiseAbs().maxCoeff() <= 1e-9);

  const auto a = value_iteration(mdp);
  const auto b = value_iteration(mdp, iterative);
  CHECK((a.value - b.value).cwiseAbs().maxCoeff() <= 1e-8);

  const Vector mu0 = random_distribution(mdp.num_states(), 23);
  const Vector mu_dense = discounted_visitation(mdp, pi, mu0);
  const Vector mu_sweep = discounted_visitation(mdp, pi, mu0, iterative);
  CHECK((mu_dense - mu_sweep).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("check_simplex") {
  const std::vector<double> ok{0.25, 0.75};
  const std::vector<double> bad{0.25, 0.7};
  const std::vector<double> neg{-0.1, 1.1};
  CHECK_NOTHROW(check_simplex(ok, 1e-12, "v"));
  CHECK_THROWS_AS(check_simplex(bad, 1e-12, "v"), ValidationError);
  CHECK_THROWS_AS(check_simplex(neg, 1e-12, "v"), ValidationError);
}

}  // TEST_SUITE
