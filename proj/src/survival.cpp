#include "coxplain/survival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace coxplain {

namespace {

void check_aligned(std::span<const double> scores,
                   std::span<const SurvivalRecord> outcomes,
                   const char* op) {
  if (scores.size() != outcomes.size()) {
    throw std::invalid_argument(std::string(op) + ": " +
                                std::to_string(scores.size()) +
                                " scores vs " +
                                std::to_string(outcomes.size()) + " outcomes");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw std::invalid_argument(std::string(op) + ": non-finite score at row " +
                                  std::to_string(i));
    }
    if (!(outcomes[i].time > 0.0) || !std::isfinite(outcomes[i].time)) {
      throw std::invalid_argument(std::string(op) +
                                  ": non-positive survival time at row " +
                                  std::to_string(i));
    }
  }
}

std::size_t count_events(std::span<const SurvivalRecord> outcomes) {
  std::size_t d = 0;
  for (const auto& r : outcomes) d += r.event ? 1 : 0;
  return d;
}

/// Indices sorted by time descending; within ties order is stable.
std::vector<std::size_t> order_desc(std::span<const SurvivalRecord> outcomes) {
  std::vector<std::size_t> idx(outcomes.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return outcomes[a].time > outcomes[b].time;
  });
  return idx;
}

struct EventTimeRow {
  double time;
  double deaths;        // events at this time
  double log_denom;     // log sum_{t_j >= time} exp(h_j - shift)
};

/// Shared sweep: unique event times with their Breslow denominators,
/// computed against a max-shifted logsumexp for stability.
std::vector<EventTimeRow> event_table(std::span<const double> scores,
                                      std::span<const SurvivalRecord> outcomes,
                                      double shift) {
  auto idx = order_desc(outcomes);
  std::vector<EventTimeRow> rows;
  double acc = 0.0;
  std::size_t k = 0;
  while (k < idx.size()) {
    double t = outcomes[idx[k]].time;
    double deaths = 0.0;
    while (k < idx.size() && outcomes[idx[k]].time == t) {
      acc += std::exp(scores[idx[k]] - shift);
      deaths += outcomes[idx[k]].event ? 1.0 : 0.0;
      ++k;
    }
    if (deaths > 0.0) rows.push_back({t, deaths, std::log(acc)});
  }
  std::reverse(rows.begin(), rows.end());  // ascending time
  return rows;
}

}  // namespace

double cox_nll(std::span<const double> scores,
               std::span<const SurvivalRecord> outcomes) {
  check_aligned(scores, outcomes, "cox_nll");
  if (count_events(outcomes) == 0) {
    throw std::invalid_argument("cox_nll: no events in batch, partial likelihood undefined");
  }
  double shift = *std::max_element(scores.begin(), scores.end());
  auto rows = event_table(scores, outcomes, shift);
  double nll = 0.0;
  for (const auto& row : rows) nll += row.deaths * (row.log_denom + shift);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].event) nll -= scores[i];
  }
  return nll;
}

double cox_nll_with_gradient(std::span<const double> scores,
                             std::span<const SurvivalRecord> outcomes,
                             std::vector<double>& grad) {
  check_aligned(scores, outcomes, "cox_nll");
  if (count_events(outcomes) == 0) {
    throw std::invalid_argument("cox_nll: no events in batch, partial likelihood undefined");
  }
  double shift = *std::max_element(scores.begin(), scores.end());
  auto rows = event_table(scores, outcomes, shift);

  double nll = 0.0;
  for (const auto& row : rows) nll += row.deaths * (row.log_denom + shift);

  // grad_k = -1{event_k} + exp(h_k) * sum_{event times tau <= t_k} d_tau / denom_tau.
  // Prefix sums over the ascending event table give the inner sum per patient.
  std::vector<double> prefix(rows.size());
  double cum = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    cum += rows[r].deaths * std::exp(-rows[r].log_denom);
    prefix[r] = cum;
  }
  grad.assign(scores.size(), 0.0);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].event) {
      nll -= scores[i];
      grad[i] -= 1.0;
    }
    // Last event time <= t_i.
    auto it = std::upper_bound(rows.begin(), rows.end(), outcomes[i].time,
                               [](double t, const EventTimeRow& row) {
                                 return t < row.time;
                               });
    if (it != rows.begin()) {
      double inner = prefix[static_cast<std::size_t>(it - rows.begin()) - 1];
      grad[i] += std::exp(scores[i] - shift) * inner;
    }
  }
  return nll;
}

double concordance_index(std::span<const double> scores,
                         std::span<const SurvivalRecord> outcomes) {
  check_aligned(scores, outcomes, "concordance_index");
  double concordant = 0.0;
  double comparable = 0.0;
  std::size_t n = outcomes.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = outcomes[i];
      const auto& b = outcomes[j];
      std::size_t early, late;
      if (a.time < b.time) {
        if (!a.event) continue;
        early = i;
        late = j;
      } else if (b.time < a.time) {
        if (!b.event) continue;
        early = j;
        late = i;
      } else {
        // Tied times: usable only when exactly one member died; the death
        // is known to precede the other's censoring.
        if (a.event == b.event) continue;
        early = a.event ? i : j;
        late = a.event ? j : i;
      }
      comparable += 1.0;
      if (scores[early] > scores[late]) {
        concordant += 1.0;
      } else if (scores[early] == scores[late]) {
        concordant += 0.5;
      }
    }
  }
  if (comparable == 0.0) {
    throw std::invalid_argument("concordance_index: no comparable pairs");
  }
  return concordant / comparable;
}

BaselineSurvival breslow_baseline(std::span<const double> scores,
                                  std::span<const SurvivalRecord> outcomes) {
  check_aligned(scores, outcomes, "breslow_baseline");
  if (count_events(outcomes) == 0) {
    throw std::invalid_argument("breslow_baseline: no events");
  }
  double shift = *std::max_element(scores.begin(), scores.end());
  auto rows = event_table(scores, outcomes, shift);
  BaselineSurvival base;
  base.times.reserve(rows.size());
  base.cum_hazard.reserve(rows.size());
  double h0 = 0.0;
  for (const auto& row : rows) {
    h0 += row.deaths * std::exp(-(row.log_denom + shift));
    base.times.push_back(row.time);
    base.cum_hazard.push_back(h0);
  }
  return base;
}

double BaselineSurvival::cum_hazard_at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0.0;
  return cum_hazard[static_cast<std::size_t>(it - times.begin()) - 1];
}

double BaselineSurvival::survival(double t, double log_risk) const {
  return std::exp(-cum_hazard_at(t) * std::exp(log_risk));
}

namespace {

/// Product-limit estimator where `is_event` selects which indicator counts
/// as the event of interest.
KaplanMeierCurve product_limit(std::span<const SurvivalRecord> outcomes,
                               bool censoring_as_event) {
  if (outcomes.empty()) {
    throw std::invalid_argument("kaplan_meier: empty outcome list");
  }
  auto idx = order_desc(outcomes);
  std::reverse(idx.begin(), idx.end());  // ascending time
  KaplanMeierCurve curve;
  double s = 1.0;
  std::size_t n = outcomes.size();
  std::size_t k = 0;
  while (k < n) {
    double t = outcomes[idx[k]].time;
    std::size_t at_risk = n - k;
    double deaths = 0.0;
    while (k < n && outcomes[idx[k]].time == t) {
      bool ev = outcomes[idx[k]].event;
      if (censoring_as_event ? !ev : ev) deaths += 1.0;
      ++k;
    }
    if (deaths > 0.0) {
      s *= 1.0 - deaths / static_cast<double>(at_risk);
      curve.times.push_back(t);
      curve.survival.push_back(s);
      if (!curve.has_median && s <= 0.5) {
        curve.has_median = true;
        curve.median = t;
      }
    }
  }
  return curve;
}

}  // namespace

KaplanMeierCurve kaplan_meier(std::span<const SurvivalRecord> outcomes) {
  return product_limit(outcomes, false);
}

KaplanMeierCurve censoring_kaplan_meier(
    std::span<const SurvivalRecord> outcomes) {
  return product_limit(outcomes, true);
}

double KaplanMeierCurve::at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

double KaplanMeierCurve::at_left(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

BrierResult brier_score(std::span<const double> scores,
                        std::span<const SurvivalRecord> outcomes,
                        const BaselineSurvival& baseline, double t) {
  check_aligned(scores, outcomes, "brier_score");
  double max_time = 0.0;
  for (const auto& r : outcomes) max_time = std::max(max_time, r.time);
  if (!(t >= 0.0) || t > max_time) {
    throw std::invalid_argument("brier_score: horizon " + std::to_string(t) +
                                " outside follow-up range [0, " +
                                std::to_string(max_time) + "]");
  }
  KaplanMeierCurve g = censoring_kaplan_meier(outcomes);
  double g_at_t = g.at(t);
  double total = 0.0;
  int used = 0;
  int dropped = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    double s = baseline.survival(t, scores[i]);
    if (outcomes[i].time <= t && outcomes[i].event) {
      double w = g.at_left(outcomes[i].time);
      if (w <= 0.0) {
        ++dropped;
        continue;
      }
      total += s * s / w;
      ++used;
    } else if (outcomes[i].time > t) {
      if (g_at_t <= 0.0) {
        ++dropped;
        continue;
      }
      total += (1.0 - s) * (1.0 - s) / g_at_t;
      ++used;
    } else {
      ++used;  // censored before t: weight 0 contribution, still counted
    }
  }
  if (used == 0) {
    throw std::runtime_error("brier_score: censoring weights removed every patient");
  }
  return {total / static_cast<double>(used), dropped};
}

double trapezoid_mean(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw std::invalid_argument("trapezoid_mean: need >= 2 aligned grid points");
  }
  double integral = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    double dx = xs[i] - xs[i - 1];
    if (dx < 0.0) throw std::invalid_argument("trapezoid_mean: grid not ascending");
    integral += 0.5 * (ys[i] + ys[i - 1]) * dx;
  }
  double span = xs.back() - xs.front();
  if (span <= 0.0) throw std::invalid_argument("trapezoid_mean: zero-width grid");
  return integral / span;
}

BrierResult integrated_brier(std::span<const double> scores,
                             std::span<const SurvivalRecord> outcomes,
                             const BaselineSurvival& baseline, double tau) {
  check_aligned(scores, outcomes, "integrated_brier");
  double max_time = 0.0;
  for (const auto& r : outcomes) max_time = std::max(max_time, r.time);
  if (!(tau > 0.0) || tau > max_time) {
    throw std::invalid_argument("integrated_brier: tau " + std::to_string(tau) +
                                " outside follow-up range (0, " +
                                std::to_string(max_time) + "]");
  }
  std::vector<double> grid;
  grid.push_back(0.0);
  for (double t : baseline.times) {
    if (t > 0.0 && t < tau) grid.push_back(t);
  }
  grid.push_back(tau);
  std::vector<double> values(grid.size());
  int dropped = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    BrierResult b = brier_score(scores, outcomes, baseline, grid[i]);
    values[i] = b.value;
    dropped = std::max(dropped, b.dropped);
  }
  return {trapezoid_mean(grid, values), dropped};
}

LogRankResult log_rank(std::span<const SurvivalRecord> group_a,
                       std::span<const SurvivalRecord> group_b) {
  if (count_events(group_a) == 0 || count_events(group_b) == 0) {
    throw std::invalid_argument("log_rank: both groups need at least one event");
  }
  struct Obs {
    double time;
    bool event;
    bool in_a;
  };
  std::vector<Obs> all;
  all.reserve(group_a.size() + group_b.size());
  for (const auto& r : group_a) all.push_back({r.time, r.event, true});
  for (const auto& r : group_b) all.push_back({r.time, r.event, false});
  std::sort(all.begin(), all.end(),
            [](const Obs& x, const Obs& y) { return x.time < y.time; });

  double observed_minus_expected = 0.0;
  double variance = 0.0;
  std::size_t k = 0;
  std::size_t n = all.size();
  std::size_t risk_a = group_a.size();
  std::size_t risk_b = group_b.size();
  while (k < n) {
    double t = all[k].time;
    double d = 0.0, d_a = 0.0;
    double leave_a = 0.0, leave_b = 0.0;
    double n_a = static_cast<double>(risk_a);
    double n_b = static_cast<double>(risk_b);
    double n_tot = n_a + n_b;
    while (k < n && all[k].time == t) {
      if (all[k].event) {
        d += 1.0;
        if (all[k].in_a) d_a += 1.0;
      }
      (all[k].in_a ? leave_a : leave_b) += 1.0;
      ++k;
    }
    if (d > 0.0 && n_tot > 1.0) {
      observed_minus_expected += d_a - d * n_a / n_tot;
      variance += d * (n_a / n_tot) * (n_b / n_tot) * (n_tot - d) / (n_tot - 1.0);
    }
    risk_a -= static_cast<std::size_t>(leave_a);
    risk_b -= static_cast<std::size_t>(leave_b);
  }
  LogRankResult result;
  if (variance <= 0.0) {
    result.chi_square = 0.0;
    result.p_value = 1.0;
    return result;
  }
  result.chi_square =
      observed_minus_expected * observed_minus_expected / variance;
  result.p_value = chi_square_sf(result.chi_square, 1);
  return result;
}

namespace {

/// Series expansion for the regularized lower incomplete gamma P(a, x),
/// valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double term = sum;
  for (int iter = 0; iter < 500; ++iter) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

/// Lentz continued fraction for Q(a, x), valid for x >= a + 1.
double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gammq(double a, double x) {
  if (!(a > 0.0) || x < 0.0) {
    throw std::invalid_argument("gammq: requires a > 0 and x >= 0");
  }
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

double chi_square_sf(double x, int df) {
  if (df < 1) throw std::invalid_argument("chi_square_sf: df must be >= 1");
  if (x <= 0.0) return 1.0;
  return gammq(0.5 * static_cast<double>(df), 0.5 * x);
}

}  // namespace coxplain
