#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "swlrt/rng.hpp"
#include "swlrt/scenarios.hpp"

using namespace swlrt;

TEST_CASE("piecewise validation") {
  PiecewiseExp ok{{3.0, 6.0}, {0.1, 0.2, 0.3}};
  CHECK_NOTHROW(ok.validate());
  PiecewiseExp wrong_counts{{3.0}, {0.1}};
  CHECK_THROWS_AS(wrong_counts.validate(), std::invalid_argument);
  PiecewiseExp bad_rate{{}, {0.0}};
  CHECK_THROWS_AS(bad_rate.validate(), std::invalid_argument);
  PiecewiseExp unsorted{{5.0, 2.0}, {0.1, 0.2, 0.3}};
  CHECK_THROWS_AS(unsorted.validate(), std::invalid_argument);
}

TEST_CASE("inverse cdf: closed form for a single rate") {
  const PiecewiseExp dist{{}, {0.25}};
  const double u = 1.0 - std::exp(-1.0);
  CHECK(piecewise_inverse_cdf(dist, u) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("inverse cdf: early quantiles ignore later pieces") {
  const PiecewiseExp one{{}, {0.5}};
  const PiecewiseExp two{{2.0}, {0.5, 0.05}};
  for (double u : {0.05, 0.2, 0.5}) {
    const double t = piecewise_inverse_cdf(two, u);
    if (t < 2.0)
      CHECK(t == doctest::Approx(piecewise_inverse_cdf(one, u)).epsilon(1e-13));
  }
}

TEST_CASE("inverse cdf rejects u outside (0,1)") {
  const PiecewiseExp dist{{}, {0.25}};
  CHECK_THROWS_AS(piecewise_inverse_cdf(dist, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(piecewise_inverse_cdf(dist, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(piecewise_inverse_cdf(dist, -0.2), std::invalid_argument);
}

TEST_CASE("property: inverse cdf round-trips through the cumulative hazard") {
  Rng rng(55001);
  for (int trial = 0; trial < 200; ++trial) {
    PiecewiseExp dist;
    const int pieces = 1 + static_cast<int>(rng.next_below(4));
    double b = 0.0;
    for (int i = 0; i < pieces; ++i) {
      dist.rates.push_back(0.02 + 0.5 * rng.next_uniform());
      if (i + 1 < pieces) {
        b += 0.5 + 8.0 * rng.next_uniform();
        dist.breakpoints.push_back(b);
      }
    }
    dist.validate();
    const double u = rng.next_uniform();
    const double t = piecewise_inverse_cdf(dist, u);
    CHECK(std::fabs(dist.cumulative_hazard(t) + std::log1p(-u)) < 1e-10);
    CHECK(std::fabs(dist.survival(t) - (1.0 - u)) < 1e-10);
  }
}

TEST_CASE("delayed effect keeps the control hazard before the change point") {
  const auto control = exponential_with_median(8.0);
  const auto delayed = delayed_effect(control, 6.0, 0.45);
  REQUIRE(delayed.breakpoints.size() == 1);
  CHECK(delayed.breakpoints[0] == 6.0);
  CHECK(delayed.rates[0] == doctest::Approx(control.rates[0]));
  CHECK(delayed.rates[1] == doctest::Approx(0.45 * control.rates[0]));
  CHECK(delayed.survival(6.0) == doctest::Approx(control.survival(6.0)));
  CHECK(delayed.survival(12.0) > control.survival(12.0));
}

TEST_CASE("builtin scenarios: base case and named patterns") {
  const auto base = builtin_scenario(Prognostic::none, 1);
  REQUIRE(base.strata.size() == 2);
  CHECK(base.name == "none_1");
  for (const auto& s : base.strata) {
    CHECK(s.prevalence == 0.5);
    CHECK(s.control.rates[0] ==
          doctest::Approx(std::numbers::ln2 / 8.0).epsilon(1e-15));
    // experimental median 12 months
    CHECK(s.experimental.rates[0] ==
          doctest::Approx(std::numbers::ln2 / 12.0).epsilon(1e-12));
  }

  const auto strong7 = builtin_scenario(Prognostic::strong, 7);
  for (const auto& s : strong7.strata) CHECK(s.experimental == s.control);
  CHECK(strong7.strata[0].control.rates[0] ==
        doctest::Approx(std::numbers::ln2 / 3.0));
  CHECK(strong7.strata[1].control.rates[0] ==
        doctest::Approx(std::numbers::ln2 / 15.0));

  const auto moderate = builtin_scenario(Prognostic::moderate, 1);
  CHECK(moderate.strata[0].control.rates[0] ==
        doctest::Approx(std::numbers::ln2 / 6.0));
  CHECK(moderate.strata[1].control.rates[0] ==
        doctest::Approx(std::numbers::ln2 / 10.0));

  CHECK_THROWS_AS(builtin_scenario(Prognostic::none, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(builtin_scenario(Prognostic::none, 10),
                  std::invalid_argument);
}

TEST_CASE("builtin scenario grid has 27 uniquely named entries") {
  const auto grid = all_builtin_scenarios();
  CHECK(grid.size() == 27);
  std::set<std::string> names;
  for (const auto& s : grid) {
    CHECK(names.insert(s.name).second);
    CHECK_NOTHROW(s.validate());
  }
}

TEST_CASE("null scenarios pair inverse hazard ratios") {
  for (Prognostic p :
       {Prognostic::none, Prognostic::moderate, Prognostic::strong}) {
    const auto s8 = builtin_scenario(p, 8);
    const auto s9 = builtin_scenario(p, 9);
    for (int i = 0; i < 2; ++i) {
      const double hr8 = s8.strata[i].experimental.rates[0] /
                         s8.strata[i].control.rates[0];
      const double hr9 = s9.strata[i].experimental.rates[0] /
                         s9.strata[i].control.rates[0];
      CHECK(hr8 * hr9 == doctest::Approx(1.0).epsilon(1e-12));
    }
    // poor-prognosis stratum benefits in 8, is harmed in 9
    CHECK(s8.strata[0].experimental.rates[0] <
          s8.strata[0].control.rates[0]);
    CHECK(s8.strata[1].experimental.rates[0] >
          s8.strata[1].control.rates[0]);
    CHECK(s9.strata[0].experimental.rates[0] >
          s9.strata[0].control.rates[0]);
  }
}

TEST_CASE("sample_trial is deterministic and respects the horizon") {
  const auto spec = builtin_scenario(Prognostic::moderate, 4);
  SimConfig config;
  config.n_total = 80;
  const auto a = sample_trial(spec, config, 424242);
  const auto b = sample_trial(spec, config, 424242);
  REQUIRE(a.size() == 80);
  REQUIRE(b.size() == 80);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].time == b[i].time);
    CHECK(a[i].event == b[i].event);
    CHECK(a[i].arm == b[i].arm);
    CHECK(a[i].stratum == b[i].stratum);
    CHECK(a[i].time >= 0.0);
    CHECK(a[i].time <= config.study_months);
  }
  const auto c = sample_trial(spec, config, 424243);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    any_diff = any_diff || a[i].time != c[i].time;
  CHECK(any_diff);
}

TEST_CASE("sample_trial golden snapshot pins the sampling path") {
  // Frozen output for one replicate; any change to the draw order or the
  // generator breaks the reproducibility contract and must be deliberate.
  const auto spec = builtin_scenario(Prognostic::moderate, 4);
  SimConfig config;
  config.n_total = 6;
  const auto records = sample_trial(spec, config, derive_stream(12345, 3));
  const std::vector<SubjectRecord> expected = {
      {7.1426396439703703, true, 0, 1},  {20.454204129965575, true, 1, 0},
      {0.62323427196151915, true, 0, 0}, {8.8494403735387568, true, 1, 1},
      {13.284824010442476, true, 0, 0},  {20.122251444250477, false, 1, 1},
  };
  REQUIRE(records.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(records[i].time == expected[i].time);
    CHECK(records[i].event == expected[i].event);
    CHECK(records[i].arm == expected[i].arm);
    CHECK(records[i].stratum == expected[i].stratum);
  }
}

TEST_CASE("zero follow-up window censors everyone when hazards are tiny") {
  ScenarioSpec spec;
  spec.name = "tiny";
  StratumModel s;
  s.label = "only";
  s.prevalence = 1.0;
  s.control = PiecewiseExp{{}, {1e-12}};
  s.experimental = s.control;
  spec.strata.push_back(s);

  SimConfig config;
  config.n_total = 50;
  config.recruitment_months = 9.0;
  config.study_months = 9.0;
  const auto records = sample_trial(spec, config, 7);
  for (const auto& r : records) {
    CHECK_FALSE(r.event);
    CHECK(r.time >= 0.0);
    CHECK(r.time <= 9.0);
  }
}

TEST_CASE("permuted allocation balances arms within stratum") {
  const auto spec = builtin_scenario(Prognostic::none, 1);
  SimConfig config;
  config.n_total = 101;
  config.allocation = Allocation::permuted;
  const auto records = sample_trial(spec, config, 99);
  int per_stratum_arm[2][2] = {};
  for (const auto& r : records) ++per_stratum_arm[r.stratum][r.arm];
  for (int s = 0; s < 2; ++s) {
    const int diff =
        std::abs(per_stratum_arm[s][0] - per_stratum_arm[s][1]);
    CHECK(diff <= 1);
  }
}

TEST_CASE("monte carlo: stratum prevalence and exponential mean") {
  const auto spec = builtin_scenario(Prognostic::strong, 1);
  SimConfig config;
  config.n_total = 100000;
  config.recruitment_months = 0.0;
  config.study_months = 1e7;  // effectively no censoring
  const auto records = sample_trial(spec, config, 2024);

  int in_stratum0 = 0;
  for (const auto& r : records) in_stratum0 += (r.stratum == 0);
  const double n = static_cast<double>(records.size());
  const double se_prev = std::sqrt(0.25 / n);
  CHECK(std::fabs(in_stratum0 / n - 0.5) < 3.0 * se_prev);

  // control arm of stratum 0 is exponential with median 3 -> mean 3/ln2
  double sum = 0.0;
  int count = 0;
  for (const auto& r : records) {
    if (r.stratum == 0 && r.arm == 0) {
      REQUIRE(r.event);
      sum += r.time;
      ++count;
    }
  }
  const double mean = sum / count;
  const double expected = 3.0 / std::numbers::ln2;
  const double se = expected / std::sqrt(static_cast<double>(count));
  CHECK(std::fabs(mean - expected) < 3.0 * se);
}

TEST_CASE("delayed builtin matches its closed-form survival") {
  const auto spec = builtin_scenario(Prognostic::moderate, 4);
  SimConfig config;
  config.n_total = 100000;
  config.recruitment_months = 0.0;
  config.study_months = 1e7;
  config.allocation = Allocation::bernoulli;
  const auto records = sample_trial(spec, config, 31415);

  for (int stratum = 0; stratum < 2; ++stratum) {
    const auto& model = spec.strata[static_cast<std::size_t>(stratum)];
    // during the 6-month delay the experimental hazard equals control
    CHECK(model.experimental.survival(6.0) ==
          doctest::Approx(model.control.survival(6.0)).epsilon(1e-12));
    for (double t : {6.0, 12.0, 18.0}) {
      int alive = 0, total = 0;
      for (const auto& r : records) {
        if (r.stratum == stratum && r.arm == 1) {
          ++total;
          alive += (r.time > t);
        }
      }
      const double expected = model.experimental.survival(t);
      const double se =
          std::sqrt(expected * (1.0 - expected) / total);
      CHECK(std::fabs(alive / static_cast<double>(total) - expected) <
            3.5 * se);
    }
  }
}

TEST_CASE("config validation") {
  const auto spec = builtin_scenario(Prognostic::none, 1);
  SimConfig config;
  config.n_reps = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = SimConfig{};
  config.study_months = 5.0;
  config.recruitment_months = 9.0;
  CHECK_THROWS_AS(sample_trial(spec, config, 1), std::invalid_argument);
  config = SimConfig{};
  config.alpha_one_sided = 0.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);

  ScenarioSpec bad;
  bad.name = "bad";
  StratumModel s;
  s.label = "a";
  s.prevalence = 0.6;
  s.control = PiecewiseExp{{}, {0.1}};
  s.experimental = s.control;
  bad.strata.push_back(s);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // sums to 0.6
}
