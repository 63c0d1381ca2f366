#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "orchestra/adversarial.hpp"
#include "orchestra/mdp.hpp"

using namespace orchestra;

namespace {

const StrategyKind kAll[] = {StrategyKind::kPolynomialPotential,
                             StrategyKind::kExponentialFixed,
                             StrategyKind::kExponentialTimeVarying,
                             StrategyKind::kGreedyProjection};

LearnerParams params_for(StrategyKind kind, int rounds, int k, double m) {
  LearnerParams p;
  if (kind == StrategyKind::kExponentialFixed) {
    p.eta = std::sqrt(2.0 * std::log(static_cast<double>(k)) / rounds) / m;
  }
  return p;
}

LearnerParams with_exponent(double p) {
  LearnerParams out;
  out.exponent = p;
  return out;
}

// Projection by bisection on the threshold theta with sum max(v - theta, 0) = 1.
std::vector<double> bisection_projection(const std::vector<double>& v) {
  double lo = *std::min_element(v.begin(), v.end()) - 1.0;
  double hi = *std::max_element(v.begin(), v.end());
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    double s = 0.0;
    for (double x : v) s += std::max(x - mid, 0.0);
    (s > 1.0 ? lo : hi) = mid;
  }
  std::vector<double> w(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::max(v[i] - 0.5 * (lo + hi), 0.0);
  return w;
}

void check_on_simplex(std::span<const double> w) {
  double total = 0.0;
  for (double x : w) {
    CHECK(x >= 0.0);
    total += x;
  }
  CHECK(std::abs(total - 1.0) <= 1e-12);
}

}  // namespace

TEST_SUITE("adversarial") {

TEST_CASE("names round-trip") {
  for (auto kind : kAll) CHECK(parse_strategy(to_string(kind)) == kind);
  CHECK(parse_strategy("poly") == StrategyKind::kPolynomialPotential);
  CHECK(parse_strategy("exp-tv") == StrategyKind::kExponentialTimeVarying);
  CHECK_THROWS_AS(parse_strategy("hedge"), ValidationError);
  CHECK(is_monotone(StrategyKind::kPolynomialPotential));
  CHECK(is_monotone(StrategyKind::kExponentialFixed));
  CHECK(is_monotone(StrategyKind::kGreedyProjection));
  CHECK_FALSE(is_monotone(StrategyKind::kExponentialTimeVarying));
}

TEST_CASE("initial weights are uniform and default rates follow M and K") {
  for (auto kind : kAll) {
    AdversarialLearner l(kind, 3, 210.0, params_for(kind, 100, 3, 210.0));
    for (double w : l.weights()) CHECK(w == doctest::Approx(1.0 / 3.0));
  }
  AdversarialLearner tv(StrategyKind::kExponentialTimeVarying, 3, 210.0);
  CHECK(tv.scheduled_rate(1) == doctest::Approx(0.00499).epsilon(1e-3));
  AdversarialLearner greedy(StrategyKind::kGreedyProjection, 3, 210.0);
  CHECK(greedy.scheduled_rate(1) == doctest::Approx(0.00389).epsilon(2e-3));
  CHECK(greedy.scheduled_rate(4) == doctest::Approx(greedy.scheduled_rate(1) / 2.0));

  CHECK(AdversarialLearner(StrategyKind::kPolynomialPotential, 3, 1.0).exponent() == 2.0);
  CHECK(AdversarialLearner(StrategyKind::kPolynomialPotential, 8, 1.0).exponent() == 4.0);
  CHECK(AdversarialLearner(StrategyKind::kPolynomialPotential, 3, 1.0, with_exponent(3.0)).exponent() ==
        3.0);
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(AdversarialLearner(StrategyKind::kPolynomialPotential, 1, 1.0),
                  ValidationError);
  CHECK_THROWS_AS(AdversarialLearner(StrategyKind::kPolynomialPotential, 3, 0.0),
                  ValidationError);
  CHECK_THROWS_AS(AdversarialLearner(StrategyKind::kPolynomialPotential, 3, 1.0, with_exponent(1.0)),
                  ValidationError);
  CHECK_THROWS_AS(AdversarialLearner(StrategyKind::kExponentialFixed, 3, 1.0),
                  ValidationError);
  LearnerParams neg;
  neg.eta = -1.0;
  CHECK_THROWS_AS(AdversarialLearner(StrategyKind::kExponentialFixed, 3, 1.0, neg),
                  ValidationError);
  AdversarialLearner l(StrategyKind::kGreedyProjection, 2, 1.0);
  const std::vector<double> too_big{1.5, 0.0};
  const std::vector<double> wrong_size{0.0, 0.0, 0.0};
  CHECK_THROWS_AS(l.observe(too_big), ValidationError);
  CHECK_THROWS_AS(l.observe(wrong_size), ValidationError);
}

TEST_CASE("constant gains leave weights unchanged") {
  for (auto kind : kAll) {
    AdversarialLearner l(kind, 4, 1.0, params_for(kind, 50, 4, 1.0));
    const std::vector<double> g(4, 0.7);
    for (int t = 0; t < 50; ++t) l.observe(g);
    for (double w : l.weights()) CHECK(w == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("hand-computed updates") {
  const std::vector<double> g{1.0, -1.0};
  AdversarialLearner poly(StrategyKind::kPolynomialPotential, 2, 1.0, with_exponent(3.0));
  poly.observe(g);
  CHECK(poly.weights()[0] == 1.0);
  CHECK(poly.weights()[1] == 0.0);

  AdversarialLearner greedy(StrategyKind::kGreedyProjection, 2, 1.0);
  greedy.observe(g);
  CHECK(greedy.weights()[0] == doctest::Approx(1.0));
  CHECK(greedy.weights()[1] == doctest::Approx(0.0));

  // Regret vector (1, -1) after one round; exp weights e^{eta} / (e^{eta} + e^{-eta}).
  LearnerParams p;
  p.eta = 0.5;
  AdversarialLearner fixed(StrategyKind::kExponentialFixed, 2, 1.0, p);
  fixed.observe(g);
  CHECK(fixed.weights()[0] == doctest::Approx(std::exp(0.5) / (std::exp(0.5) + std::exp(-0.5))));

  // Time-varying rate at round 2 is c / sqrt(2).
  AdversarialLearner tv(StrategyKind::kExponentialTimeVarying, 2, 1.0);
  tv.observe(g);
  const double eta2 = std::sqrt(std::log(2.0)) / std::sqrt(2.0);
  CHECK(tv.weights()[0] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0 * eta2))));
}

TEST_CASE("simplex projection") {
  const std::vector<double> inside{0.2, 0.3, 0.5};
  const auto same = project_to_simplex(inside);
  for (int i = 0; i < 3; ++i) CHECK(same[i] == doctest::Approx(inside[i]).epsilon(1e-15));
  const std::vector<double> corner{2.0, 0.0};
  const auto c = project_to_simplex(corner);
  CHECK(c[0] == 1.0);
  CHECK(c[1] == 0.0);

  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> v(6);
    for (auto& x : v) x = n(rng);
    const auto w = project_to_simplex(v);
    const auto ref = bisection_projection(v);
    double sum = 0.0;
    for (int i = 0; i < 6; ++i) {
      CHECK(std::abs(w[i] - ref[i]) <= 1e-10);
      sum += w[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-10);
    // KKT: w = max(v - theta, 0) with one theta for the support.
    double theta = 0.0;
    for (int i = 0; i < 6; ++i) {
      if (w[i] > 0.0) theta = v[i] - w[i];
    }
    for (int i = 0; i < 6; ++i) {
      if (w[i] > 0.0) {
        CHECK(std::abs(v[i] - w[i] - theta) <= 1e-10);
      } else {
        CHECK(v[i] <= theta + 1e-10);
      }
    }
  }
  CHECK_THROWS_AS(project_to_simplex(std::vector<double>{}), ValidationError);
}

TEST_CASE("realized regret") {
  // A single expert has no regret against itself.
  CHECK(realized_regret({{0.3}, {-0.2}}, {{1.0}, {1.0}}) == 0.0);
  CHECK(realized_regret({{1.0, 0.0}}, {{0.0, 1.0}}) == 1.0);
  CHECK(realized_regret({{0.5, 0.5}, {-1.0, -1.0}}, {{0.3, 0.7}, {0.9, 0.1}}) ==
        doctest::Approx(0.0).epsilon(1e-15));
  CHECK(realized_regret({}, {}) == 0.0);
  CHECK_THROWS_AS(realized_regret({{1.0}}, {}), ValidationError);
}

TEST_CASE("regret bound values") {
  CHECK(regret_bound(StrategyKind::kPolynomialPotential, 100, 3, 1.0).value ==
        doctest::Approx(25.67).epsilon(1e-3));
  LearnerParams p;
  p.eta = 0.1;
  const auto fixed = regret_bound(StrategyKind::kExponentialFixed, 100, 3, 1.0, p);
  CHECK(fixed.value == doctest::Approx(15.99).epsilon(1e-3));
  CHECK_FALSE(fixed.vanishing);
  CHECK(regret_bound(StrategyKind::kGreedyProjection, 100, 3, 1.0).value ==
        doctest::Approx(51.96).epsilon(1e-3));
  CHECK(regret_bound(StrategyKind::kExponentialTimeVarying, 100, 3, 2.0).value ==
        doctest::Approx(2.0 * std::sqrt(100.0 * std::log(3.0))));
  CHECK(regret_bound(StrategyKind::kPolynomialPotential, 10, 1, 1.0).value == 0.0);
  CHECK_THROWS_AS(regret_bound(StrategyKind::kExponentialFixed, 10, 3, 1.0),
                  ValidationError);
}

TEST_CASE("weights stay on the simplex and regret stays below the bound") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 200; ++rep) {
    const int k = 2 + rep % 7;
    const int rounds = 50 + (rep * 37) % 250;
    const double m = 0.5 + (rep % 5);
    std::uniform_real_distribution<double> u(-m, m);
    for (auto kind : kAll) {
      const auto params = params_for(kind, rounds, k, m);
      AdversarialLearner l(kind, k, m, params);
      std::vector<std::vector<double>> gains, weights;
      for (int t = 0; t < rounds; ++t) {
        std::vector<double> g(k);
        // Half the sequences favour one expert to make regret nontrivial.
        for (int j = 0; j < k; ++j) g[j] = rep % 2 ? u(rng) : (j == 0 ? m : u(rng));
        weights.emplace_back(l.weights().begin(), l.weights().end());
        gains.push_back(g);
        l.observe(g);
        check_on_simplex(l.weights());
      }
      const double regret = realized_regret(gains, weights);
      CHECK(regret <= regret_bound(kind, rounds, k, m, params).value + 1e-9);
      double cum_max = *std::max_element(l.cumulative_regret().begin(),
                                         l.cumulative_regret().end());
      CHECK(cum_max == doctest::Approx(regret).epsilon(1e-9));
    }
  }
}

TEST_CASE("monotonicity gap") {
  AdversarialLearner before(StrategyKind::kPolynomialPotential, 2, 1.0, with_exponent(3.0));
  AdversarialLearner after = before;
  const std::vector<double> g{1.0, -1.0};
  after.observe(g);
  CHECK(monotonicity_gap(before, g, after) == doctest::Approx(1.0));
  CHECK_THROWS_AS(monotonicity_gap(before, std::vector<double>{1.0}, after),
                  ValidationError);
}

TEST_CASE("shifting gains by their mixed value changes nothing") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto kind : kAll) {
    AdversarialLearner a(kind, 5, 1.0, params_for(kind, 200, 5, 1.0));
    AdversarialLearner b = a;
    for (int t = 0; t < 200; ++t) {
      std::vector<double> g(5);
      for (auto& x : g) x = u(rng);
      double mixed = 0.0;
      for (int j = 0; j < 5; ++j) mixed += b.weights()[j] * g[j];
      std::vector<double> centred(5);
      for (int j = 0; j < 5; ++j) centred[j] = g[j] - mixed;
      a.observe(g);
      b.observe(centred);
      for (int j = 0; j < 5; ++j) CHECK(std::abs(a.weights()[j] - b.weights()[j]) <= 1e-10);
    }
  }
}

TEST_CASE("permuting experts permutes weights") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::vector<int> perm{3, 0, 4, 1, 2};
  for (auto kind : kAll) {
    AdversarialLearner a(kind, 5, 1.0, params_for(kind, 100, 5, 1.0));
    AdversarialLearner b = a;
    for (int t = 0; t < 100; ++t) {
      std::vector<double> g(5), h(5);
      for (auto& x : g) x = u(rng);
      for (int j = 0; j < 5; ++j) h[j] = g[perm[j]];
      a.observe(g);
      b.observe(h);
      for (int j = 0; j < 5; ++j) {
        CHECK(std::abs(b.weights()[j] - a.weights()[perm[j]]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("large gains do not overflow") {
  LearnerParams poly;
  poly.exponent = 60.0;
  LearnerParams fixed;
  fixed.eta = 50.0;
  AdversarialLearner a(StrategyKind::kPolynomialPotential, 3, 1e6, poly);
  AdversarialLearner b(StrategyKind::kExponentialFixed, 3, 1e6, fixed);
  const std::vector<double> g{1e6, -1e6, 5e5};
  for (int t = 0; t < 1000; ++t) {
    a.observe(g);
    b.observe(g);
  }
  for (auto* l : {&a, &b}) {
    for (double w : l->weights()) CHECK(std::isfinite(w));
    CHECK(l->weights()[0] == doctest::Approx(1.0));
  }
}

}  // TEST_SUITE
