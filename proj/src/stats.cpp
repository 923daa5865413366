#include "coxplain/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "coxplain/parallel.hpp"
#include "coxplain/rng.hpp"

namespace coxplain {

namespace {

constexpr std::uint64_t kStreamBootstrap = 0x61;
constexpr double kDegenerateEps = 1e-12;

}  // namespace

std::vector<PatientShare> patient_shares(const ShapleyDecomposition& decomp) {
  std::vector<PatientShare> shares(decomp.mains.size());
  for (std::size_t p = 0; p < decomp.mains.size(); ++p) {
    double mains = 0.0, inter = 0.0;
    for (double v : decomp.mains[p]) mains += std::fabs(v);
    for (double v : decomp.interactions[p]) inter += std::fabs(v);
    shares[p] = {inter, mains + inter};
  }
  return shares;
}

double shares_percent(std::span<const PatientShare> shares,
                      std::span<const std::size_t> index) {
  double num = 0.0, denom = 0.0;
  for (std::size_t i : index) {
    const PatientShare& s = shares[i];
    if (s.denominator < kDegenerateEps) continue;
    num += s.numerator;
    denom += s.denominator;
  }
  if (denom < kDegenerateEps) {
    throw std::runtime_error("all resampled patients are degenerate");
  }
  return 100.0 * num / denom;
}

BootstrapResult bootstrap_diff(std::span<const PatientShare> model_a,
                               std::span<const PatientShare> model_b,
                               int iterations, std::uint64_t seed,
                               int threads) {
  if (model_a.size() != model_b.size() || model_a.empty()) {
    throw std::invalid_argument(
        "bootstrap_diff needs aligned non-empty share arrays, got " +
        std::to_string(model_a.size()) + " and " +
        std::to_string(model_b.size()));
  }
  if (iterations < 100) {
    throw std::invalid_argument("bootstrap needs >= 100 iterations");
  }
  std::size_t n = model_a.size();
  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});

  BootstrapResult result;
  result.iterations = iterations;
  result.seed = seed;
  result.estimate =
      shares_percent(model_a, identity) - shares_percent(model_b, identity);

  std::vector<double> diffs(static_cast<std::size_t>(iterations));
  parallel_for(diffs.size(), resolve_threads(threads), [&](std::size_t rep) {
    RngStream rng = RngStream::derive(seed, {kStreamBootstrap, rep});
    std::vector<std::size_t> sample(n);
    // Paired resample: the same patient draw feeds both models.
    for (std::size_t i = 0; i < n; ++i) {
      sample[i] = static_cast<std::size_t>(rng.next_below(n));
    }
    diffs[rep] = shares_percent(model_a, sample) -
                 shares_percent(model_b, sample);
  });

  std::vector<double> sorted = diffs;
  std::sort(sorted.begin(), sorted.end());
  result.ci_low = quantile(sorted, 0.025);
  result.ci_high = quantile(sorted, 0.975);

  double le = 0.0, ge = 0.0;
  for (double d : diffs) {
    if (d <= 0.0) le += 1.0;
    if (d >= 0.0) ge += 1.0;
  }
  double iters = static_cast<double>(iterations);
  result.p_value = std::clamp(2.0 * std::min(le, ge) / iters, 0.0, 1.0);
  return result;
}

namespace {

/// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> average_ranks(std::span<const double> x) {
  std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) {
    throw std::invalid_argument("spearman needs aligned arrays of length >= 3");
  }
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  double n = static_cast<double>(x.size());
  double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = rx[i] - mean;
    double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw std::invalid_argument("spearman undefined for constant input");
  }
  return sxy / std::sqrt(sxx * syy);
}

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of empty data");
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("quantile level must lie in [0, 1]");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double h = p * (static_cast<double>(sorted.size()) - 1.0);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  double frac = h - std::floor(h);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

MedianSplitResult median_split_survival(
    std::span<const double> values,
    std::span<const SurvivalRecord> outcomes) {
  if (values.size() != outcomes.size() || values.size() < 4) {
    throw std::invalid_argument(
        "median_split_survival needs aligned arrays of length >= 4");
  }
  double med = quantile(values, 0.5);
  std::vector<SurvivalRecord> low, high;
  for (std::size_t i = 0; i < values.size(); ++i) {
    (values[i] <= med ? low : high).push_back(outcomes[i]);
  }
  if (low.empty() || high.empty()) {
    throw std::invalid_argument(
        "median split is degenerate: every value fell on one side");
  }
  MedianSplitResult r;
  r.n_low = low.size();
  r.n_high = high.size();
  r.low_group = kaplan_meier(low);
  r.high_group = kaplan_meier(high);
  r.log_rank = log_rank(low, high);
  return r;
}

QuartileTrend quartile_trend(std::span<const double> values,
                             std::span<const SurvivalRecord> outcomes) {
  if (values.size() != outcomes.size() || values.size() < 8) {
    throw std::invalid_argument(
        "quartile_trend needs aligned arrays of length >= 8");
  }
  double q1 = quantile(values, 0.25);
  double q2 = quantile(values, 0.5);
  double q3 = quantile(values, 0.75);
  std::vector<std::vector<SurvivalRecord>> buckets(4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    double v = values[i];
    std::size_t b = v <= q1 ? 0 : v <= q2 ? 1 : v <= q3 ? 2 : 3;
    buckets[b].push_back(outcomes[i]);
  }
  std::size_t non_empty = 0;
  for (const auto& b : buckets) non_empty += b.empty() ? 0 : 1;
  if (non_empty < 2) {
    throw std::invalid_argument(
        "quartile_trend degenerate: values collapse into a single bucket");
  }
  QuartileTrend t;
  t.counts.resize(4, 0);
  t.has_median.resize(4, false);
  t.median_survival.resize(4, 0.0);
  for (std::size_t b = 0; b < 4; ++b) {
    t.counts[b] = buckets[b].size();
    if (buckets[b].empty()) continue;
    KaplanMeierCurve km = kaplan_meier(buckets[b]);
    t.has_median[b] = km.has_median;
    if (km.has_median) t.median_survival[b] = km.median;
  }
  t.monotone_non_increasing = true;
  double prev = 0.0;
  bool have_prev = false;
  for (std::size_t b = 0; b < 4; ++b) {
    if (!t.has_median[b]) continue;  // undefined medians sit out of the test
    if (have_prev && t.median_survival[b] > prev) {
      t.monotone_non_increasing = false;
    }
    prev = t.median_survival[b];
    have_prev = true;
  }
  return t;
}

}  // namespace coxplain
