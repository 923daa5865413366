#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "coxplain/rng.hpp"
#include "coxplain/stats.hpp"

using namespace coxplain;

TEST_CASE("patient shares reproduce the global ratio") {
  ShapleyDecomposition d;
  d.convention = Convention::Moebius;
  d.modality_names = {"modA", "modB"};
  d.interaction_labels = {"modA*modB"};
  d.mains = {{-1.0, 0.0}, {2.0, 0.0}, {0.0, 0.0}};
  d.interactions = {{1.0}, {-1.0}, {0.0}};
  d.v_empty = {0.0, 0.0, 0.0};
  d.v_full = {0.0, 1.0, 0.0};

  auto shares = patient_shares(d);
  REQUIRE(shares.size() == 3);
  CHECK(shares[0].numerator == 1.0);
  CHECK(shares[0].denominator == 2.0);
  CHECK(shares[1].numerator == 1.0);
  CHECK(shares[1].denominator == 3.0);
  CHECK(shares[2].denominator == 0.0);

  std::vector<std::size_t> all = {0, 1, 2};
  CHECK(shares_percent(shares, all) ==
        doctest::Approx(global_intershap(d).interaction_percent)
            .epsilon(1e-14));

  // Resampling with repeats weights patients accordingly.
  std::vector<std::size_t> weighted = {0, 0, 1};
  CHECK(shares_percent(shares, weighted) ==
        doctest::Approx(100.0 * 3.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("bootstrap of identical models is a null result") {
  RngStream rng(5);
  std::vector<PatientShare> shares(40);
  for (auto& s : shares) {
    s.numerator = std::abs(rng.next_gaussian());
    s.denominator = s.numerator + std::abs(rng.next_gaussian()) + 0.1;
  }
  auto res = bootstrap_diff(shares, shares, 200, 11);
  CHECK(res.estimate == 0.0);
  CHECK(res.ci_low == 0.0);
  CHECK(res.ci_high == 0.0);
  CHECK(res.p_value == 1.0);
  CHECK(res.iterations == 200);
}

TEST_CASE("bootstrap separates clearly different models") {
  std::vector<PatientShare> high(60), low(60);
  RngStream rng(6);
  for (std::size_t i = 0; i < 60; ++i) {
    double d = 1.0 + rng.next_uniform();
    high[i] = {0.8 * d, d};
    low[i] = {0.1 * d, d};
  }
  auto res = bootstrap_diff(high, low, 500, 3);
  CHECK(res.estimate == doctest::Approx(70.0).epsilon(0.05));
  CHECK(res.ci_low > 0.0);
  CHECK(res.ci_high > res.ci_low);
  CHECK(res.p_value < 0.05);

  auto rerun = bootstrap_diff(high, low, 500, 3);
  CHECK(rerun.estimate == res.estimate);
  CHECK(rerun.ci_low == res.ci_low);
  CHECK(rerun.ci_high == res.ci_high);
  CHECK(rerun.p_value == res.p_value);

  auto threaded = bootstrap_diff(high, low, 500, 3, 4);
  CHECK(threaded.ci_low == res.ci_low);
  CHECK(threaded.ci_high == res.ci_high);

  CHECK_THROWS_AS(bootstrap_diff(high, low, 0, 3), std::invalid_argument);
  std::vector<PatientShare> short_b(10);
  CHECK_THROWS_AS(bootstrap_diff(high, short_b, 10, 3),
                  std::invalid_argument);
}

TEST_CASE("spearman hand values") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  std::vector<double> inc = {10.0, 20.0, 30.0, 40.0};
  std::vector<double> dec = {4.0, 3.0, 2.0, 1.0};
  CHECK(spearman(x, inc) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(spearman(x, dec) == doctest::Approx(-1.0).epsilon(1e-14));

  // Tied pair in y: ranks (1, 2.5, 2.5, 4); Pearson of ranks = sqrt(0.9).
  std::vector<double> tied = {10.0, 20.0, 20.0, 40.0};
  CHECK(spearman(x, tied) ==
        doctest::Approx(std::sqrt(0.9)).epsilon(1e-12));

  // Four benchmark pairs whose rank displacement gives exactly -0.8.
  std::vector<double> cindex = {0.636, 0.814, 0.819, 0.807};
  std::vector<double> inter = {4.82, 3.03, 3.72, 4.45};
  CHECK(spearman(cindex, inter) == -0.8);

  std::vector<double> one = {1.0};
  CHECK_THROWS_AS(spearman(one, one), std::invalid_argument);
  std::vector<double> constant = {2.0, 2.0, 2.0};
  std::vector<double> rising = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(spearman(constant, rising), std::invalid_argument);
}

TEST_CASE("type-7 quantiles") {
  std::vector<double> v = {4.0, 1.0, 3.0, 2.0};
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75).epsilon(1e-14));
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(quantile(v, 0.75) == doctest::Approx(3.25).epsilon(1e-14));
  std::vector<double> single = {7.0};
  CHECK(quantile(single, 0.3) == 7.0);
  CHECK_THROWS_AS(quantile(v, 1.5), std::invalid_argument);
  std::vector<double> empty;
  CHECK_THROWS_AS(quantile(empty, 0.5), std::invalid_argument);
}

TEST_CASE("median split separates risk groups") {
  // Values 0..19; high scorers die fast, low scorers late.
  std::size_t n = 20;
  std::vector<double> values(n);
  std::iota(values.begin(), values.end(), 0.0);
  std::vector<SurvivalRecord> outcomes;
  for (std::size_t i = 0; i < n; ++i) {
    double t = values[i] < 10.0 ? 50.0 - values[i] : 25.0 - values[i];
    outcomes.push_back({"P" + std::to_string(i), t, true});
  }
  auto res = median_split_survival(values, outcomes);
  CHECK(res.n_low == 10);
  CHECK(res.n_high == 10);
  // Every high-group event precedes every low-group event.
  CHECK(res.high_group.times.back() < res.low_group.times.front());
  CHECK(res.log_rank.chi_square > 10.0);
  CHECK(res.log_rank.p_value < 0.01);
  CHECK(res.low_group.has_median);
  CHECK(res.high_group.has_median);
  CHECK(res.low_group.median > res.high_group.median);
}

TEST_CASE("quartile trend on a monotone cohort") {
  std::size_t n = 40;
  std::vector<double> values(n);
  std::iota(values.begin(), values.end(), 0.0);
  std::vector<SurvivalRecord> outcomes;
  for (std::size_t i = 0; i < n; ++i) {
    outcomes.push_back({"P" + std::to_string(i), 100.0 - 2.0 * values[i],
                        true});
  }
  auto trend = quartile_trend(values, outcomes);
  REQUIRE(trend.counts.size() == 4);
  CHECK(trend.counts == std::vector<std::size_t>{10, 10, 10, 10});
  for (bool has : trend.has_median) CHECK(has);
  CHECK(trend.monotone_non_increasing);
  CHECK(trend.median_survival[0] > trend.median_survival[3]);

  // Scrambled outcomes break monotonicity.
  std::vector<SurvivalRecord> mixed = outcomes;
  for (std::size_t i = 0; i < n; ++i) {
    mixed[i].time = (i % 2 == 0) ? 10.0 + static_cast<double>(i) : 90.0 - i;
  }
  auto scrambled = quartile_trend(values, mixed);
  CHECK(!scrambled.monotone_non_increasing);
}
