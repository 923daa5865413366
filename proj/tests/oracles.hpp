#pragma once

// Independent re-implementations of quantities the library computes, written
// the slow and obvious way so the two can be checked against each other.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "coxplain/survival.hpp"

namespace oracles {

// Inclusion-exclusion, one subset at a time: m(S) = sum_{T subseteq S}
// (-1)^{|S|-|T|} v(T). `values` is indexed by bitmask.
inline double moebius_direct(std::span<const double> values, std::size_t s) {
  double total = 0.0;
  std::size_t t = s;
  while (true) {
    int parity = (std::popcount(s) - std::popcount(t)) & 1;
    total += parity ? -values[t] : values[t];
    if (t == 0) break;
    t = (t - 1) & s;
  }
  return total;
}

// Shapley value as the average marginal contribution of player i over every
// one of the M! orderings.
inline double shapley_by_permutations(std::span<const double> values,
                                      std::size_t m_count, std::size_t i) {
  std::vector<std::size_t> order(m_count);
  std::iota(order.begin(), order.end(), 0);
  double total = 0.0;
  std::size_t perms = 0;
  do {
    std::size_t before = 0;
    for (std::size_t k = 0; k < m_count && order[k] != i; ++k) {
      before |= std::size_t{1} << order[k];
    }
    total += values[before | (std::size_t{1} << i)] - values[before];
    ++perms;
  } while (std::next_permutation(order.begin(), order.end()));
  return total / static_cast<double>(perms);
}

// Shapley interaction index via orderings: merge {i, j} into one entity,
// enumerate all (M-1)! orderings of the merged player list, and average the
// discrete second difference over the prefix preceding the pair.
inline double interaction_by_permutations(std::span<const double> values,
                                          std::size_t m_count, std::size_t i,
                                          std::size_t j) {
  const std::size_t pair = static_cast<std::size_t>(-1);
  std::vector<std::size_t> entities;
  for (std::size_t k = 0; k < m_count; ++k) {
    if (k != i && k != j) entities.push_back(k);
  }
  entities.push_back(pair);
  std::sort(entities.begin(), entities.end());
  const std::size_t bi = std::size_t{1} << i;
  const std::size_t bj = std::size_t{1} << j;
  double total = 0.0;
  std::size_t perms = 0;
  do {
    std::size_t s = 0;
    for (std::size_t e : entities) {
      if (e == pair) break;
      s |= std::size_t{1} << e;
    }
    total += values[s | bi | bj] - values[s | bi] - values[s | bj] + values[s];
    ++perms;
  } while (std::next_permutation(entities.begin(), entities.end()));
  return total / static_cast<double>(perms);
}

// d f / d x_i by central differences.
inline double central_diff(const std::function<double(std::span<const double>)>& f,
                           std::vector<double> x, std::size_t i,
                           double h = 1e-6) {
  x[i] += h;
  double up = f(x);
  x[i] -= 2.0 * h;
  double down = f(x);
  return (up - down) / (2.0 * h);
}

// Plain-definition Harrell concordance: walk every pair, decide which member
// should carry the higher risk, score 1 / 0.5 / 0.
inline double naive_cindex(std::span<const double> scores,
                           std::span<const coxplain::SurvivalRecord> outcomes) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    for (std::size_t j = i + 1; j < outcomes.size(); ++j) {
      std::size_t riskier, other;
      if (outcomes[i].time < outcomes[j].time && outcomes[i].event) {
        riskier = i;
        other = j;
      } else if (outcomes[j].time < outcomes[i].time && outcomes[j].event) {
        riskier = j;
        other = i;
      } else if (outcomes[i].time == outcomes[j].time &&
                 outcomes[i].event != outcomes[j].event) {
        riskier = outcomes[i].event ? i : j;
        other = outcomes[i].event ? j : i;
      } else {
        continue;
      }
      den += 1.0;
      if (scores[riskier] > scores[other]) {
        num += 1.0;
      } else if (scores[riskier] == scores[other]) {
        num += 0.5;
      }
    }
  }
  return num / den;
}

// Partial likelihood with Breslow ties via an O(n^2) risk-set rescan.
inline double naive_cox_nll(std::span<const double> scores,
                            std::span<const coxplain::SurvivalRecord> outcomes) {
  double nll = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].event) continue;
    double denom = 0.0;
    for (std::size_t j = 0; j < outcomes.size(); ++j) {
      if (outcomes[j].time >= outcomes[i].time) denom += std::exp(scores[j]);
    }
    nll -= scores[i] - std::log(denom);
  }
  return nll;
}

struct KmPoint {
  double time = 0.0;
  double survival = 1.0;
};

// Product-limit curve by recounting the risk set at every event time.
inline std::vector<KmPoint> naive_km(
    std::span<const coxplain::SurvivalRecord> outcomes) {
  std::vector<double> event_times;
  for (const auto& rec : outcomes) {
    if (rec.event) event_times.push_back(rec.time);
  }
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()),
                    event_times.end());
  std::vector<KmPoint> curve;
  double s = 1.0;
  for (double t : event_times) {
    std::size_t at_risk = 0, deaths = 0;
    for (const auto& rec : outcomes) {
      if (rec.time >= t) ++at_risk;
      if (rec.event && rec.time == t) ++deaths;
    }
    s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
    curve.push_back({t, s});
  }
  return curve;
}

}  // namespace oracles
