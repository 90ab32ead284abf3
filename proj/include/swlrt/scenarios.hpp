#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "swlrt/logrank.hpp"
#include "swlrt/rng.hpp"
#include "swlrt/survival.hpp"

namespace swlrt {

/// Piecewise-constant hazard. `rates` has one entry more than `breakpoints`;
/// the first interval starts at 0, the last is unbounded.
struct PiecewiseExp {
  std::vector<double> breakpoints;
  std::vector<double> rates;

  void validate() const {
    if (rates.size() != breakpoints.size() + 1)
      throw std::invalid_argument("need one more rate than breakpoints");
    for (double r : rates)
      if (!std::isfinite(r) || r <= 0.0)
        throw std::invalid_argument("hazard rates must be positive");
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
      if (!std::isfinite(breakpoints[i]) || breakpoints[i] <= 0.0)
        throw std::invalid_argument("breakpoints must be positive");
      if (i > 0 && breakpoints[i] <= breakpoints[i - 1])
        throw std::invalid_argument("breakpoints must be strictly increasing");
    }
  }

  double cumulative_hazard(double t) const {
    double total = 0.0;
    double start = 0.0;
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
      if (t <= breakpoints[i]) return total + rates[i] * (t - start);
      total += rates[i] * (breakpoints[i] - start);
      start = breakpoints[i];
    }
    return total + rates.back() * (t - start);
  }

  double survival(double t) const { return std::exp(-cumulative_hazard(t)); }

  bool operator==(const PiecewiseExp&) const = default;
};

/// Event time t solving S(t) = 1 - u; exact inversion of the piecewise
/// cumulative hazard.
inline double piecewise_inverse_cdf(const PiecewiseExp& dist, double u) {
  if (!(u > 0.0 && u < 1.0))
    throw std::invalid_argument("u must lie strictly inside (0,1)");
  const double target = -std::log1p(-u);  // cumulative hazard to reach
  double total = 0.0;
  double start = 0.0;
  for (std::size_t i = 0; i < dist.breakpoints.size(); ++i) {
    const double seg = dist.rates[i] * (dist.breakpoints[i] - start);
    if (target <= total + seg) return start + (target - total) / dist.rates[i];
    total += seg;
    start = dist.breakpoints[i];
  }
  return start + (target - total) / dist.rates.back();
}

inline PiecewiseExp exponential_with_median(double median_months) {
  if (!(median_months > 0.0))
    throw std::invalid_argument("median must be positive");
  return {{}, {std::numbers::ln2 / median_months}};
}

/// Hazard scaled by a constant ratio everywhere.
inline PiecewiseExp proportional(const PiecewiseExp& base, double hazard_ratio) {
  if (!(hazard_ratio > 0.0))
    throw std::invalid_argument("hazard ratio must be positive");
  PiecewiseExp out = base;
  for (double& r : out.rates) r *= hazard_ratio;
  return out;
}

/// Hazard identical to `base` before `delay_months`, scaled by
/// `post_hr` afterwards.
inline PiecewiseExp delayed_effect(const PiecewiseExp& base,
                                   double delay_months, double post_hr) {
  if (!(delay_months > 0.0))
    throw std::invalid_argument("delay must be positive");
  if (!(post_hr > 0.0))
    throw std::invalid_argument("hazard ratio must be positive");
  PiecewiseExp out;
  double start = 0.0;
  bool past_delay = false;
  for (std::size_t i = 0; i <= base.breakpoints.size(); ++i) {
    const double end = i < base.breakpoints.size()
                           ? base.breakpoints[i]
                           : std::numeric_limits<double>::infinity();
    if (!past_delay && delay_months < end) {
      if (delay_months > start) {
        out.rates.push_back(base.rates[i]);
        out.breakpoints.push_back(delay_months);
      }
      past_delay = true;
      out.rates.push_back(base.rates[i] * post_hr);
    } else {
      out.rates.push_back(past_delay ? base.rates[i] * post_hr : base.rates[i]);
    }
    if (std::isfinite(end)) {
      out.breakpoints.push_back(end);
      if (!past_delay && end == delay_months) past_delay = true;
    }
    start = end;
  }
  return out;
}

struct StratumModel {
  std::string label;
  double prevalence = 0.0;
  PiecewiseExp control;
  PiecewiseExp experimental;
};

struct ScenarioSpec {
  std::string name;
  std::string prognostic = "custom";
  int effect = 0;
  std::vector<StratumModel> strata;

  void validate() const {
    if (strata.empty()) throw std::invalid_argument("need at least one stratum");
    double total = 0.0;
    for (const auto& s : strata) {
      if (!(s.prevalence > 0.0))
        throw std::invalid_argument("prevalence must be positive");
      total += s.prevalence;
      s.control.validate();
      s.experimental.validate();
    }
    if (std::fabs(total - 1.0) > 1e-9)
      throw std::invalid_argument("prevalences must sum to 1");
  }

  int n_strata() const { return static_cast<int>(strata.size()); }
};

enum class Prognostic { none, moderate, strong };

inline std::string to_string(Prognostic p) {
  switch (p) {
    case Prognostic::none: return "none";
    case Prognostic::moderate: return "moderate";
    case Prognostic::strong: return "strong";
  }
  return "?";
}

inline Prognostic prognostic_from_string(const std::string& s) {
  if (s == "none") return Prognostic::none;
  if (s == "moderate") return Prognostic::moderate;
  if (s == "strong") return Prognostic::strong;
  throw std::invalid_argument("unknown prognostic level: " + s);
}

namespace detail {

// Proportional hazard ratio that shifts the control survival probability of
// an exponential(median) stratum by `delta` at the landmark time.
inline double hr_for_survival_shift(double median, double landmark,
                                    double delta) {
  const double surv = std::exp2(-landmark / median);
  const double shifted = surv + delta;
  if (!(shifted > 0.0 && shifted < 1.0))
    throw std::logic_error("survival shift leaves (0,1)");
  return std::log(shifted) / std::log(surv);
}

// Effect-pattern constants behind the built-in grid. The delayed scenarios
// keep the control hazard for the first 6 months. The null-crossing
// scenarios 8/9 target a +/-0.10 survival-probability difference at month 18
// within each stratum. Override through a scenario file to use different
// constants.
inline constexpr double kEffectDelayMonths = 6.0;
inline constexpr double kNullShiftDelta = 0.10;
inline constexpr double kNullShiftLandmark = 18.0;
inline constexpr double kHomogeneousHr = 2.0 / 3.0;
inline constexpr double kPhSpread = 4.0 / 3.0;      // scenarios 2/3
inline constexpr double kDelayedHr = 0.45;          // scenarios 4-6
inline constexpr double kDelayedSpread = 1.5;       // scenarios 5/6

}  // namespace detail

/// One of the 27 built-in simulation scenarios: a prognostic level fixes the
/// control medians of the two equally-prevalent strata (stratum 0 is the
/// poor-prognosis one), an effect pattern 1..9 fixes the experimental arm.
inline ScenarioSpec builtin_scenario(Prognostic prognostic, int effect) {
  if (effect < 1 || effect > 9)
    throw std::invalid_argument("effect pattern must lie in 1..9");

  double medians[2];
  switch (prognostic) {
    case Prognostic::none: medians[0] = 8.0; medians[1] = 8.0; break;
    case Prognostic::moderate: medians[0] = 6.0; medians[1] = 10.0; break;
    case Prognostic::strong: medians[0] = 3.0; medians[1] = 15.0; break;
  }

  ScenarioSpec spec;
  spec.prognostic = to_string(prognostic);
  spec.effect = effect;
  spec.name = spec.prognostic + "_" + std::to_string(effect);
  const char* labels[2] = {"ECOG1", "ECOG0"};

  for (int i = 0; i < 2; ++i) {
    StratumModel stratum;
    stratum.label = labels[i];
    stratum.prevalence = 0.5;
    stratum.control = exponential_with_median(medians[i]);

    using namespace detail;
    switch (effect) {
      case 1:
        stratum.experimental = proportional(stratum.control, kHomogeneousHr);
        break;
      case 2:
        stratum.experimental = proportional(
            stratum.control,
            i == 0 ? kHomogeneousHr / kPhSpread : kHomogeneousHr * kPhSpread);
        break;
      case 3:
        stratum.experimental = proportional(
            stratum.control,
            i == 0 ? kHomogeneousHr * kPhSpread : kHomogeneousHr / kPhSpread);
        break;
      case 4:
        stratum.experimental =
            delayed_effect(stratum.control, kEffectDelayMonths, kDelayedHr);
        break;
      case 5:
        stratum.experimental = delayed_effect(
            stratum.control, kEffectDelayMonths,
            i == 0 ? kDelayedHr / kDelayedSpread : kDelayedHr * kDelayedSpread);
        break;
      case 6:
        stratum.experimental = delayed_effect(
            stratum.control, kEffectDelayMonths,
            i == 0 ? kDelayedHr * kDelayedSpread : kDelayedHr / kDelayedSpread);
        break;
      case 7:
        stratum.experimental = stratum.control;
        break;
      case 8:
        stratum.experimental = proportional(
            stratum.control,
            hr_for_survival_shift(medians[i], kNullShiftLandmark,
                                  i == 0 ? kNullShiftDelta : -kNullShiftDelta));
        break;
      case 9:
        stratum.experimental = proportional(
            stratum.control,
            1.0 / hr_for_survival_shift(
                      medians[i], kNullShiftLandmark,
                      i == 0 ? kNullShiftDelta : -kNullShiftDelta));
        break;
    }
    spec.strata.push_back(std::move(stratum));
  }
  return spec;
}

inline std::vector<ScenarioSpec> all_builtin_scenarios() {
  std::vector<ScenarioSpec> out;
  for (Prognostic p :
       {Prognostic::none, Prognostic::moderate, Prognostic::strong})
    for (int effect = 1; effect <= 9; ++effect)
      out.push_back(builtin_scenario(p, effect));
  return out;
}

enum class Allocation { permuted, bernoulli };

/// Trial and Monte Carlo parameters. Subjects accrue uniformly over the
/// recruitment window; censoring comes only from the end of study.
struct SimConfig {
  int n_total = 344;
  double recruitment_months = 9.0;
  double study_months = 24.0;
  double alloc_ratio = 1.0;  // experimental : control
  int n_reps = 10000;
  double alpha_one_sided = 0.025;
  double t_star = 12.0;
  std::uint64_t seed = 12345;
  Allocation allocation = Allocation::bernoulli;
  WeightPooling pooling = WeightPooling::across_strata;
  int threads = 1;

  void validate() const {
    if (n_total < 1) throw std::invalid_argument("n_total must be >= 1");
    if (!(recruitment_months >= 0.0))
      throw std::invalid_argument("recruitment_months must be >= 0");
    if (!(study_months >= recruitment_months))
      throw std::invalid_argument("study_months must cover recruitment");
    if (n_reps < 1) throw std::invalid_argument("n_reps must be >= 1");
    if (!(alpha_one_sided > 0.0 && alpha_one_sided < 1.0))
      throw std::invalid_argument("alpha must lie in (0,1)");
    if (!(t_star >= 0.0)) throw std::invalid_argument("t_star must be >= 0");
    if (!(alloc_ratio > 0.0))
      throw std::invalid_argument("allocation ratio must be positive");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  }
};

/// One simulated trial, deterministic in `replicate_seed`. Each subject gets
/// a stratum by prevalence, a recruitment time uniform over the accrual
/// window and a latent event time by inverse CDF; the arm comes from
/// independent draws at the allocation ratio, or from permuted blocks within
/// stratum when requested. Observed time is cut at study end.
///
/// Independent assignment is the default: within-stratum-balanced blocks make
/// the unstratified tests conservative whenever the stratum variable is
/// prognostic, which distorts their size under the null.
inline std::vector<SubjectRecord> sample_trial(const ScenarioSpec& spec,
                                               const SimConfig& config,
                                               std::uint64_t replicate_seed) {
  spec.validate();
  config.validate();
  Rng rng(replicate_seed);

  const auto n = static_cast<std::size_t>(config.n_total);
  const double exp_fraction = config.alloc_ratio / (1.0 + config.alloc_ratio);

  std::vector<SubjectRecord> subjects(n);
  std::vector<double> latent_u(n);
  std::vector<double> recruit(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double us = rng.next_uniform();
    double cum = 0.0;
    int stratum = spec.n_strata() - 1;
    for (int s = 0; s < spec.n_strata(); ++s) {
      cum += spec.strata[static_cast<std::size_t>(s)].prevalence;
      if (us <= cum) {
        stratum = s;
        break;
      }
    }
    subjects[i].stratum = stratum;
    recruit[i] = rng.next_uniform() * config.recruitment_months;
    latent_u[i] = rng.next_uniform();
  }

  if (config.allocation == Allocation::permuted) {
    std::vector<std::vector<std::size_t>> members(
        static_cast<std::size_t>(spec.n_strata()));
    for (std::size_t i = 0; i < n; ++i)
      members[static_cast<std::size_t>(subjects[i].stratum)].push_back(i);
    for (auto& idx : members) {
      if (idx.empty()) continue;
      const double target = static_cast<double>(idx.size()) * exp_fraction;
      auto n_exp = static_cast<std::size_t>(std::floor(target));
      if (rng.next_uniform() < target - std::floor(target)) ++n_exp;
      std::vector<int> arms(idx.size(), 0);
      for (std::size_t k = 0; k < n_exp && k < arms.size(); ++k) arms[k] = 1;
      rng.shuffle(arms);
      for (std::size_t k = 0; k < idx.size(); ++k)
        subjects[idx[k]].arm = arms[k];
    }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      subjects[i].arm = rng.next_uniform() < exp_fraction ? 1 : 0;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& stratum =
        spec.strata[static_cast<std::size_t>(subjects[i].stratum)];
    const auto& dist =
        subjects[i].arm == 1 ? stratum.experimental : stratum.control;
    const double latent = piecewise_inverse_cdf(dist, latent_u[i]);
    const double horizon = config.study_months - recruit[i];
    subjects[i].event = latent <= horizon;
    subjects[i].time = subjects[i].event ? latent : horizon;
  }
  return subjects;
}

}  // namespace swlrt
