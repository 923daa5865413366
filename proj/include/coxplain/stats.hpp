#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coxplain/intershap.hpp"
#include "coxplain/survival.hpp"

namespace coxplain {

/// Per-patient pieces of the global InterSHAP ratio: numerator is the
/// absolute interaction mass, denominator the total absolute mass.
struct PatientShare {
  double numerator = 0.0;
  double denominator = 0.0;
};

std::vector<PatientShare> patient_shares(const ShapleyDecomposition& decomp);

/// Global InterSHAP percent recomputed from shares over an index multiset
/// (degenerate patients skipped, matching global_intershap).
double shares_percent(std::span<const PatientShare> shares,
                      std::span<const std::size_t> index);

struct BootstrapResult {
  double estimate = 0.0;  // percent difference A - B on the original sample
  double ci_low = 0.0;    // 2.5 percentile
  double ci_high = 0.0;   // 97.5 percentile
  double p_value = 1.0;   // 2 * min tail, clamped to [0, 1]
  int iterations = 0;
  std::uint64_t seed = 0;
};

/// Paired patient-level bootstrap of the difference in global InterSHAP
/// between two models audited on the same patients. Deterministic in seed
/// and independent of thread count.
BootstrapResult bootstrap_diff(std::span<const PatientShare> model_a,
                               std::span<const PatientShare> model_b,
                               int iterations, std::uint64_t seed,
                               int threads = 1);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct MedianSplitResult {
  KaplanMeierCurve low_group;   // value <= median
  KaplanMeierCurve high_group;  // value > median
  std::size_t n_low = 0;
  std::size_t n_high = 0;
  LogRankResult log_rank;
};

MedianSplitResult median_split_survival(
    std::span<const double> values,
    std::span<const SurvivalRecord> outcomes);

struct QuartileTrend {
  std::vector<std::size_t> counts;        // 4 buckets
  std::vector<bool> has_median;           // KM median defined per bucket
  std::vector<double> median_survival;    // valid where has_median
  bool monotone_non_increasing = false;   // over buckets with defined medians
};

QuartileTrend quartile_trend(std::span<const double> values,
                             std::span<const SurvivalRecord> outcomes);

/// Type-7 (linear interpolation) quantile of unsorted data, p in [0, 1].
double quantile(std::span<const double> values, double p);

}  // namespace coxplain
