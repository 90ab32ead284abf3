#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "swlrt/survival.hpp"

namespace swlrt {

enum class WeightKind { unit, modest };

/// Weight scheme for the test statistics. `modest` caps the inverse-survival
/// weights at 1/S(t_star): w_j = 1 / max{S(t_j-), S(t_star)}, where S is the
/// Kaplan-Meier estimate of the pooled sample. t_star = 0 reduces to unit
/// weights, i.e. the plain log-rank test.
struct WeightSpec {
  WeightKind kind = WeightKind::unit;
  double t_star = 0.0;

  static WeightSpec unit() { return {WeightKind::unit, 0.0}; }
  static WeightSpec modest(double t_star) {
    return {WeightKind::modest, t_star};
  }
};

/// Weights aligned one-to-one with `event_times`. Every event time must be a
/// knot of `km`; the curve must come from the pooled sample that produced the
/// event times.
inline std::vector<double> compute_weights(const WeightSpec& spec,
                                           const KMCurve& km,
                                           std::span<const double> event_times) {
  if (!std::isfinite(spec.t_star) || spec.t_star < 0.0)
    throw std::invalid_argument("t_star must be finite and >= 0");

  std::vector<double> weights(event_times.size(), 1.0);
  if (spec.kind == WeightKind::unit) return weights;

  const double surv_star = km.surv_at(spec.t_star);
  for (std::size_t j = 0; j < event_times.size(); ++j) {
    const auto idx = km.find_time(event_times[j]);
    if (!idx)
      throw std::logic_error("event time not on the KM support");
    const double surv_minus = km.surv_left[*idx];
    if (!(surv_minus > 0.0))
      throw std::logic_error("KM left limit must be positive at an event time");
    weights[j] = 1.0 / std::max(surv_minus, surv_star);
  }
  return weights;
}

}  // namespace swlrt
