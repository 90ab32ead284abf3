#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace swlrt {

/// One subject: follow-up time in months, event indicator (false = censored),
/// arm (0 = control, 1 = experimental) and 0-based stratum index.
struct SubjectRecord {
  double time = 0.0;
  bool event = false;
  int arm = 0;
  int stratum = 0;
};

/// 2x2 summary at one event time: at-risk totals and event counts, overall
/// and on the experimental arm.
struct RiskRow {
  double time = 0.0;
  int n_risk = 0;
  int n_risk_1 = 0;  // experimental arm at risk
  int n_risk_0 = 0;  // control arm at risk
  int n_event = 0;
  int n_event_1 = 0;  // events on the experimental arm
};

struct RiskTable {
  std::vector<RiskRow> rows;
  int n_subjects = 0;
};

inline void check_subject_times(std::span<const SubjectRecord> records) {
  for (const auto& r : records) {
    if (!std::isfinite(r.time) || r.time < 0.0)
      throw std::invalid_argument("subject time must be finite and >= 0");
  }
}

inline std::vector<std::size_t> order_by_time(
    std::span<const SubjectRecord> records) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].time < records[b].time;
  });
  return order;
}

/// Builds the risk table for one risk set (callers slice per stratum first;
/// the stratum field is not consulted). Rows appear only at times with at
/// least one event. A subject censored exactly at an event time is still at
/// risk there. Times are compared exactly, with no rounding.
inline RiskTable build_risk_table(std::span<const SubjectRecord> records) {
  if (records.empty()) throw std::invalid_argument("empty stratum");
  check_subject_times(records);
  const auto order = order_by_time(records);

  RiskTable table;
  table.n_subjects = static_cast<int>(records.size());
  int at_risk = table.n_subjects;
  int at_risk_1 = 0;
  for (const auto& r : records) at_risk_1 += (r.arm == 1);

  std::size_t k = 0;
  while (k < order.size()) {
    const double t = records[order[k]].time;
    int leaving = 0, leaving_1 = 0, events = 0, events_1 = 0;
    while (k < order.size() && records[order[k]].time == t) {
      const auto& r = records[order[k]];
      ++leaving;
      leaving_1 += (r.arm == 1);
      if (r.event) {
        ++events;
        events_1 += (r.arm == 1);
      }
      ++k;
    }
    if (events > 0) {
      table.rows.push_back(
          {t, at_risk, at_risk_1, at_risk - at_risk_1, events, events_1});
    }
    at_risk -= leaving;
    at_risk_1 -= leaving_1;
  }
  return table;
}

/// Kaplan-Meier product-limit curve over the distinct event times of a sample.
/// `surv` is the right-continuous step value at each event time, `surv_left`
/// its left limit (1 before the first event time).
struct KMCurve {
  std::vector<double> times;
  std::vector<double> surv;
  std::vector<double> surv_left;
  std::vector<int> n_risk;
  std::vector<int> n_event;

  /// Step-function value at t (right-continuous); 1 before the first event.
  double surv_at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return surv[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  /// Left limit at t: the step value just before t.
  double surv_before(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return surv[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  /// Index of an exact event time, if present.
  std::optional<std::size_t> find_time(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end() || *it != t) return std::nullopt;
    return static_cast<std::size_t>(it - times.begin());
  }
};

/// Pooled Kaplan-Meier estimate; arm and stratum fields are ignored.
inline KMCurve km_estimate(std::span<const SubjectRecord> records) {
  if (records.empty()) throw std::invalid_argument("empty sample");
  check_subject_times(records);
  const auto order = order_by_time(records);

  KMCurve curve;
  double surv = 1.0;
  int at_risk = static_cast<int>(records.size());
  std::size_t k = 0;
  while (k < order.size()) {
    const double t = records[order[k]].time;
    int leaving = 0, events = 0;
    while (k < order.size() && records[order[k]].time == t) {
      ++leaving;
      if (records[order[k]].event) ++events;
      ++k;
    }
    if (events > 0) {
      curve.times.push_back(t);
      curve.surv_left.push_back(surv);
      surv *= 1.0 - static_cast<double>(events) / at_risk;
      curve.surv.push_back(surv);
      curve.n_risk.push_back(at_risk);
      curve.n_event.push_back(events);
    }
    at_risk -= leaving;
  }
  return curve;
}

/// Split records by stratum index; strata with no records stay empty.
inline std::vector<std::vector<SubjectRecord>> split_by_stratum(
    std::span<const SubjectRecord> records, int n_strata) {
  if (n_strata < 1) throw std::invalid_argument("need at least one stratum");
  std::vector<std::vector<SubjectRecord>> out(
      static_cast<std::size_t>(n_strata));
  for (const auto& r : records) {
    if (r.stratum < 0 || r.stratum >= n_strata)
      throw std::invalid_argument("stratum index out of range");
    out[static_cast<std::size_t>(r.stratum)].push_back(r);
  }
  return out;
}

}  // namespace swlrt
