#pragma once

#include <span>
#include <string>
#include <vector>

namespace coxplain {

struct SurvivalRecord {
  std::string patient_id;
  double time = 0.0;  // months, strictly positive
  bool event = false; // true = death observed
};

/// Breslow baseline cumulative hazard on the ascending event-time grid.
/// S(t|x) = exp(-H0(t) * exp(h)).
struct BaselineSurvival {
  std::vector<double> times;
  std::vector<double> cum_hazard;

  double cum_hazard_at(double t) const;
  double survival(double t, double log_risk) const;
};

/// Product-limit curve. `times` holds the drop points (times with >=1 event
/// of the modelled kind), `survival` the value just after each drop.
struct KaplanMeierCurve {
  std::vector<double> times;
  std::vector<double> survival;
  bool has_median = false;
  double median = 0.0;

  double at(double t) const;       // S(t), right-continuous
  double at_left(double t) const;  // S(t-)
};

struct BrierResult {
  double value = 0.0;
  int dropped = 0;  // patients skipped because the censoring KM hit zero
};

struct LogRankResult {
  double chi_square = 0.0;
  double p_value = 1.0;
};

/// Negative log partial likelihood with Breslow tie handling:
/// -sum_{i: event} [h_i - log sum_{j: t_j >= t_i} exp(h_j)].
double cox_nll(std::span<const double> scores,
               std::span<const SurvivalRecord> outcomes);

/// Same value; additionally writes d(nll)/d(scores) into grad (resized).
double cox_nll_with_gradient(std::span<const double> scores,
                             std::span<const SurvivalRecord> outcomes,
                             std::vector<double>& grad);

/// Harrell's concordance index. Pairs with tied times are comparable only
/// when exactly one member has an event; tied scores count 0.5.
double concordance_index(std::span<const double> scores,
                         std::span<const SurvivalRecord> outcomes);

BaselineSurvival breslow_baseline(std::span<const double> scores,
                                  std::span<const SurvivalRecord> outcomes);

/// IPCW Brier score at horizon t. Censoring weights come from the
/// Kaplan-Meier estimate of the censoring distribution, with left limits at
/// observed event times.
BrierResult brier_score(std::span<const double> scores,
                        std::span<const SurvivalRecord> outcomes,
                        const BaselineSurvival& baseline, double t);

/// Trapezoidal mean of brier_score over [0, tau] on the event-time grid.
BrierResult integrated_brier(std::span<const double> scores,
                             std::span<const SurvivalRecord> outcomes,
                             const BaselineSurvival& baseline, double tau);

KaplanMeierCurve kaplan_meier(std::span<const SurvivalRecord> outcomes);

/// Kaplan-Meier of the censoring distribution (event roles flipped).
KaplanMeierCurve censoring_kaplan_meier(
    std::span<const SurvivalRecord> outcomes);

LogRankResult log_rank(std::span<const SurvivalRecord> group_a,
                       std::span<const SurvivalRecord> group_b);

/// Mean value of the piecewise-linear interpolant through (xs, ys) over
/// [xs.front(), xs.back()] (trapezoid integral divided by the span).
double trapezoid_mean(std::span<const double> xs, std::span<const double> ys);

/// Regularized upper incomplete gamma Q(a, x); chi-square(1) upper tail is
/// Q(1/2, x/2).
double gammq(double a, double x);

double chi_square_sf(double x, int df);

}  // namespace coxplain
