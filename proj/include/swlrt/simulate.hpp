#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "swlrt/logrank.hpp"
#include "swlrt/normal.hpp"
#include "swlrt/scenarios.hpp"

namespace swlrt {

/// Rejection tallies for the seven statistics under one scenario. `failures`
/// counts replicates where a statistic was undefined; those count as
/// non-rejections.
struct SimResult {
  std::string scenario;
  std::string prognostic;
  int effect = 0;
  int n_reps = 0;
  std::array<int, 7> rejections{};
  std::array<int, 7> failures{};

  double proportion(std::size_t test) const {
    return static_cast<double>(rejections[test]) / n_reps;
  }

  double mc_se(std::size_t test) const {
    const double p = proportion(test);
    return std::sqrt(p * (1.0 - p) / n_reps);
  }

  bool high_failure_rate() const {
    for (int f : failures)
      if (f * 100 > n_reps) return true;
    return false;
  }
};

/// Monte Carlo rejection probability under a scenario: sample a trial per
/// replicate, run all seven tests, reject when the statistic falls below the
/// lower-tail critical value. Replicates are seeded independently of the
/// schedule, so the result does not depend on the worker count.
inline SimResult estimate_power(const ScenarioSpec& spec,
                                const SimConfig& config) {
  spec.validate();
  config.validate();

  SimResult result;
  result.scenario = spec.name;
  result.prognostic = spec.prognostic;
  result.effect = spec.effect;
  result.n_reps = config.n_reps;

  const double z_crit = norm_quantile(config.alpha_one_sided);
  const WeightSpec wspec = WeightSpec::modest(config.t_star);

  auto run_range = [&](int lo, int hi, std::array<int, 7>& rej,
                       std::array<int, 7>& fail) {
    for (int r = lo; r < hi; ++r) {
      const auto records =
          sample_trial(spec, config, derive_stream(config.seed, r));
      try {
        const auto analysis =
            run_all(records, spec.n_strata(), wspec, config.pooling);
        for (std::size_t k = 0; k < analysis.tests.size(); ++k) {
          const auto& report = analysis.tests[k];
          if (!report.ok)
            ++fail[k];
          else if (report.result.z < z_crit)
            ++rej[k];
        }
      } catch (const std::invalid_argument&) {
        // degenerate replicate (e.g. a single arm was drawn): every
        // statistic is undefined, counted as non-rejections
        for (std::size_t k = 0; k < 7; ++k) ++fail[k];
      }
    }
  };

  const int workers = std::min(config.threads, config.n_reps);
  if (workers <= 1) {
    run_range(0, config.n_reps, result.rejections, result.failures);
    return result;
  }

  std::vector<std::array<int, 7>> rej(workers, std::array<int, 7>{});
  std::vector<std::array<int, 7>> fail(workers, std::array<int, 7>{});
  std::vector<std::thread> pool;
  const int chunk = (config.n_reps + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * chunk;
    const int hi = std::min(config.n_reps, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(
        [&, lo, hi, w] { run_range(lo, hi, rej[w], fail[w]); });
  }
  for (auto& t : pool) t.join();
  for (int w = 0; w < workers; ++w) {
    for (std::size_t k = 0; k < 7; ++k) {
      result.rejections[k] += rej[w][k];
      result.failures[k] += fail[w][k];
    }
  }
  return result;
}

/// Power estimates over a scenario set. Scenario names must be unique.
inline std::vector<SimResult> run_grid(std::span<const ScenarioSpec> scenarios,
                                       const SimConfig& config) {
  config.validate();
  std::set<std::string> names;
  for (const auto& s : scenarios)
    if (!names.insert(s.name).second)
      throw std::invalid_argument("duplicate scenario name: " + s.name);
  std::vector<SimResult> out;
  out.reserve(scenarios.size());
  for (const auto& s : scenarios) out.push_back(estimate_power(s, config));
  return out;
}

/// Flat results table, one row per scenario and test. Numbers are written at
/// full precision.
inline void write_results_csv(std::ostream& os,
                              std::span<const SimResult> results) {
  os << "scenario,prognostic,effect,test,rejections,reps,proportion,se\n";
  char buf[64];
  for (const auto& r : results) {
    for (std::size_t k = 0; k < all_test_ids.size(); ++k) {
      os << r.scenario << ',' << r.prognostic << ',' << r.effect << ','
         << test_name(all_test_ids[k]) << ',' << r.rejections[k] << ','
         << r.n_reps << ',';
      std::snprintf(buf, sizeof buf, "%.17g", r.proportion(k));
      os << buf << ',';
      std::snprintf(buf, sizeof buf, "%.17g", r.mc_se(k));
      os << buf << '\n';
    }
  }
}

/// Schoenfeld event count for an exponential comparison:
/// ceil( 4 ((z_power + z_alpha) / log(m_c / m_e))^2 ).
inline int required_events(double median_control, double median_exp,
                           double alpha_one_sided, double power) {
  if (!(median_control > 0.0) || !(median_exp > 0.0) ||
      !std::isfinite(median_control) || !std::isfinite(median_exp))
    throw std::invalid_argument("medians must be positive and finite");
  if (median_control == median_exp)
    throw std::invalid_argument("equal medians: no effect to detect");
  if (!(alpha_one_sided > 0.0 && alpha_one_sided < 1.0))
    throw std::invalid_argument("alpha must lie in (0,1)");
  if (!(power > 0.0 && power < 1.0))
    throw std::invalid_argument("power must lie in (0,1)");
  const double log_ratio = std::log(median_control / median_exp);
  const double z = norm_quantile(power) + norm_quantile(1.0 - alpha_one_sided);
  const double events = 4.0 * (z / log_ratio) * (z / log_ratio);
  return static_cast<int>(std::ceil(events));
}

/// P(event by study end) for one exponential arm under uniform accrual:
/// 1 - E_A[ S(T - A) ] with A ~ U(0, R).
inline double event_probability(double hazard, double recruit_months,
                                double study_months) {
  if (!(hazard > 0.0)) throw std::invalid_argument("hazard must be positive");
  if (!(study_months >= recruit_months) || !(recruit_months >= 0.0))
    throw std::invalid_argument("study horizon must cover recruitment");
  if (recruit_months == 0.0) return -std::expm1(-hazard * study_months);
  const double x = hazard * recruit_months;
  return 1.0 - std::exp(-hazard * study_months) * std::expm1(x) / x;
}

struct DesignResult {
  int required_event_count = 0;
  int required_patients = 0;     // smallest even total reaching the target
  double expected_events = 0.0;  // at the returned patient count
  double event_fraction = 0.0;   // expected events per patient
};

/// Event count from the Schoenfeld formula, then the smallest even patient
/// total whose expected event count under the exponential / uniform-accrual
/// model reaches that target by the end of the study.
inline DesignResult design_trial(double median_control, double median_exp,
                                 double alpha_one_sided, double power,
                                 double recruit_months, double study_months) {
  DesignResult out;
  out.required_event_count =
      required_events(median_control, median_exp, alpha_one_sided, power);
  const double hazard_c = std::numbers::ln2 / median_control;
  const double hazard_e = std::numbers::ln2 / median_exp;
  const double p_event =
      0.5 * (event_probability(hazard_c, recruit_months, study_months) +
             event_probability(hazard_e, recruit_months, study_months));
  if (!(p_event > 1e-12))
    throw std::invalid_argument(
        "event target unreachable: no follow-up under this horizon");
  out.event_fraction = p_event;
  auto n = static_cast<long long>(
      std::ceil(out.required_event_count / p_event));
  if (n % 2 != 0) ++n;
  while (static_cast<double>(n) * p_event < out.required_event_count)
    n += 2;
  out.required_patients = static_cast<int>(n);
  out.expected_events = static_cast<double>(n) * p_event;
  return out;
}

}  // namespace swlrt
