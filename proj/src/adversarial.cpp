#include "orchestra/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "orchestra/mdp.hpp"

namespace orchestra {

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kPolynomialPotential:
      return "poly";
    case StrategyKind::kExponentialFixed:
      return "exp-fixed";
    case StrategyKind::kExponentialTimeVarying:
      return "exp-tv";
    case StrategyKind::kGreedyProjection:
      return "greedy";
  }
  return "unknown";
}

StrategyKind parse_strategy(std::string_view name) {
  if (name == "poly") return StrategyKind::kPolynomialPotential;
  if (name == "exp-fixed") return StrategyKind::kExponentialFixed;
  if (name == "exp-tv") return StrategyKind::kExponentialTimeVarying;
  if (name == "greedy") return StrategyKind::kGreedyProjection;
  throw ValidationError("unknown strategy '" + std::string(name) + "'");
}

bool is_monotone(StrategyKind kind) {
  return kind != StrategyKind::kExponentialTimeVarying;
}

// -- AdversarialLearner -------------------------------------------------------

AdversarialLearner::AdversarialLearner(StrategyKind kind, int num_experts,
                                       double gain_bound, LearnerParams params)
    : kind_(kind), gain_bound_(gain_bound) {
  if (num_experts < 2) throw ValidationError("a learner needs K >= 2 experts");
  if (!(gain_bound > 0.0) || !std::isfinite(gain_bound)) {
    throw ValidationError("gain bound must be positive and finite");
  }
  const double log_k = std::log(static_cast<double>(num_experts));
  switch (kind) {
    case StrategyKind::kPolynomialPotential:
      exponent_ = params.exponent.value_or(std::max(2.0, std::round(2 * log_k)));
      if (!(exponent_ > 1.0)) {
        throw ValidationError("polynomial exponent must exceed 1");
      }
      break;
    case StrategyKind::kExponentialFixed:
      if (!params.eta) throw ValidationError("exp-fixed needs a rate eta");
      eta_ = *params.eta;
      if (!(eta_ > 0.0)) throw ValidationError("eta must be positive");
      break;
    case StrategyKind::kExponentialTimeVarying:
      rate_constant_ = params.rate_constant.value_or(std::sqrt(log_k) / gain_bound);
      if (!(rate_constant_ > 0.0)) {
        throw ValidationError("rate constant must be positive");
      }
      break;
    case StrategyKind::kGreedyProjection:
      rate_constant_ = params.rate_constant.value_or(
          std::sqrt(2.0 / num_experts) / gain_bound);
      if (!(rate_constant_ > 0.0)) {
        throw ValidationError("rate constant must be positive");
      }
      break;
  }
  weights_.assign(num_experts, 1.0 / num_experts);
  cumulative_.assign(num_experts, 0.0);
}

double AdversarialLearner::scheduled_rate(int t) const {
  return rate_constant_ / std::sqrt(static_cast<double>(t));
}

void AdversarialLearner::observe(std::span<const double> gains) {
  const auto k = weights_.size();
  if (gains.size() != k) throw ValidationError("gain vector has wrong length");
  const double limit = gain_bound_ * (1.0 + 1e-12) + 1e-9;
  double mixed = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (!std::isfinite(gains[j]) || std::abs(gains[j]) > limit) {
      throw ValidationError("gain outside [-gain_bound, gain_bound]");
    }
    mixed += weights_[j] * gains[j];
  }
  for (std::size_t j = 0; j < k; ++j) cumulative_[j] += gains[j] - mixed;

  switch (kind_) {
    case StrategyKind::kPolynomialPotential:
    case StrategyKind::kExponentialFixed:
      reweight_from_potential(eta_);
      break;
    case StrategyKind::kExponentialTimeVarying:
      reweight_from_potential(scheduled_rate(round_ + 1));
      break;
    case StrategyKind::kGreedyProjection: {
      const double rate = scheduled_rate(round_);
      std::vector<double> step(k);
      for (std::size_t j = 0; j < k; ++j) step[j] = weights_[j] + rate * gains[j];
      weights_ = project_to_simplex(step);
      break;
    }
  }
  ++round_;
}

void AdversarialLearner::reweight_from_potential(double rate) {
  const auto k = weights_.size();
  const double top = *std::max_element(cumulative_.begin(), cumulative_.end());
  std::vector<double> v(k, 0.0);
  if (kind_ == StrategyKind::kPolynomialPotential) {
    // Scale by the largest term so that pow cannot overflow.
    if (top > 0.0) {
      for (std::size_t j = 0; j < k; ++j) {
        v[j] = cumulative_[j] > 0.0 ? std::pow(cumulative_[j] / top, exponent_)
                                    : 0.0;
      }
    }
  } else {
    for (std::size_t j = 0; j < k; ++j) {
      v[j] = std::exp(rate * (cumulative_[j] - top));
    }
  }
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (!(total > 0.0)) {
    std::fill(weights_.begin(), weights_.end(), 1.0 / k);
    return;
  }
  for (std::size_t j = 0; j < k; ++j) weights_[j] = v[j] / total;
}

// -- Free functions -----------------------------------------------------------

std::vector<double> project_to_simplex(std::span<const double> v) {
  if (v.empty()) throw ValidationError("cannot project an empty vector");
  std::vector<double> u(v.begin(), v.end());
  for (double x : u) {
    if (!std::isfinite(x)) throw ValidationError("non-finite entry");
  }
  std::sort(u.begin(), u.end(), std::greater<>());
  double prefix = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    prefix += u[j];
    const double candidate = (prefix - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  std::vector<double> w(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) w[j] = std::max(v[j] - theta, 0.0);
  return w;
}

double realized_regret(const std::vector<std::vector<double>>& gains,
                       const std::vector<std::vector<double>>& weights) {
  if (gains.size() != weights.size()) {
    throw ValidationError("gain and weight histories differ in length");
  }
  if (gains.empty()) return 0.0;
  const auto k = gains.front().size();
  std::vector<double> totals(k, 0.0);
  double mixed = 0.0;
  for (std::size_t t = 0; t < gains.size(); ++t) {
    if (gains[t].size() != k || weights[t].size() != k) {
      throw ValidationError("inconsistent number of experts in history");
    }
    for (std::size_t j = 0; j < k; ++j) {
      totals[j] += gains[t][j];
      mixed += weights[t][j] * gains[t][j];
    }
  }
  return *std::max_element(totals.begin(), totals.end()) - mixed;
}

RegretBound regret_bound(StrategyKind kind, int rounds, int num_experts,
                         double gain_bound, const LearnerParams& params) {
  if (rounds < 1) throw ValidationError("regret bound needs T >= 1");
  if (num_experts < 1) throw ValidationError("regret bound needs K >= 1");
  const double t = rounds;
  const double log_k = std::log(static_cast<double>(num_experts));
  const double m = gain_bound;
  switch (kind) {
    case StrategyKind::kPolynomialPotential:
      return {m * std::sqrt(6.0 * t * log_k), true};
    case StrategyKind::kExponentialFixed: {
      if (!params.eta || !(*params.eta > 0.0)) {
        throw ValidationError("exp-fixed bound needs a positive eta");
      }
      // B = ln K / eta' + eta' T / 2 with eta' = eta M the normalized rate.
      const double normalized = *params.eta * m;
      return {m * (log_k / normalized + normalized * t / 2.0), false};
    }
    case StrategyKind::kExponentialTimeVarying:
      return {m * std::sqrt(t * log_k), true};
    case StrategyKind::kGreedyProjection:
      return {3.0 * m * std::sqrt(num_experts * t), true};
  }
  throw ValidationError("unknown strategy kind");
}

double monotonicity_gap(const AdversarialLearner& before,
                        std::span<const double> gains,
                        const AdversarialLearner& after) {
  const auto w = before.weights();
  const auto next = after.weights();
  if (gains.size() != w.size() || next.size() != w.size()) {
    throw ValidationError("dimension mismatch in monotonicity gap");
  }
  double mixed = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) mixed += w[j] * gains[j];
  double gap = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) gap += next[j] * (gains[j] - mixed);
  return gap;
}

}  // namespace orchestra
