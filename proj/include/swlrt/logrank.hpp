#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "swlrt/normal.hpp"
#include "swlrt/survival.hpp"
#include "swlrt/weights.hpp"

namespace swlrt {

/// A statistic could not be formed from the data (zero variance, empty
/// stratum for a per-stratum ratio, ...). Distinct from input validation.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-stratum score sums. `u`/`v` use unit weights, `u_w`/`v_w` the supplied
/// weights; both come out of a single pass over the risk table.
struct StratumScore {
  double u = 0.0;
  double v = 0.0;
  double u_w = 0.0;
  double v_w = 0.0;
  int n_subjects = 0;
  int n_event_times = 0;
};

/// Score and variance sums for one stratum. At each event time the expected
/// experimental-arm event count is E = O * n1 / n and the hypergeometric
/// variance is V = n0 * n1 * O * (n - O) / (n^2 (n - 1)); a row with a single
/// subject at risk has a degenerate conditional distribution and contributes
/// zero variance.
inline StratumScore stratum_score(const RiskTable& table,
                                  std::span<const double> weights) {
  if (weights.size() != table.rows.size())
    throw std::logic_error("weights not aligned with risk-table rows");

  StratumScore score;
  score.n_subjects = table.n_subjects;
  score.n_event_times = static_cast<int>(table.rows.size());
  for (std::size_t j = 0; j < table.rows.size(); ++j) {
    const auto& row = table.rows[j];
    const double n = row.n_risk;
    const double expected = row.n_event * row.n_risk_1 / n;
    const double diff = row.n_event_1 - expected;
    double var = 0.0;
    if (row.n_risk > 1) {
      var = static_cast<double>(row.n_risk_0) * row.n_risk_1 * row.n_event *
            (row.n_risk - row.n_event) / (n * n * (n - 1.0));
    }
    const double w = weights[j];
    score.u += diff;
    score.v += var;
    score.u_w += w * diff;
    score.v_w += w * w * var;
  }
  return score;
}

enum class TestId {
  z,          // unstratified log-rank
  z_w,        // unstratified weighted log-rank
  zs,         // stratified log-rank
  zs_n,       // stratified log-rank, sample-size combination
  zs_wu,      // stratified weighted, U-statistic scale
  zs_wz,      // stratified weighted, Z-statistic scale
  zs_wn,      // stratified weighted, sample-size scale
};

inline constexpr std::array<TestId, 7> all_test_ids = {
    TestId::z,     TestId::z_w,   TestId::zs,   TestId::zs_n,
    TestId::zs_wu, TestId::zs_wz, TestId::zs_wn};

inline constexpr std::string_view test_name(TestId id) {
  switch (id) {
    case TestId::z: return "Z";
    case TestId::z_w: return "ZW";
    case TestId::zs: return "Zs";
    case TestId::zs_n: return "Zs_n";
    case TestId::zs_wu: return "Zs_Wu";
    case TestId::zs_wz: return "Zs_Wz";
    case TestId::zs_wn: return "Zs_Wn";
  }
  return "?";
}

inline constexpr std::string_view test_label(TestId id) {
  switch (id) {
    case TestId::z: return "unstratified log-rank";
    case TestId::z_w: return "unstratified weighted log-rank";
    case TestId::zs: return "stratified log-rank";
    case TestId::zs_n: return "stratified log-rank (sample-size combination)";
    case TestId::zs_wu: return "stratified weighted log-rank (U-statistic scale)";
    case TestId::zs_wz: return "stratified weighted log-rank (Z-statistic scale)";
    case TestId::zs_wn: return "stratified weighted log-rank (sample-size scale)";
  }
  return "?";
}

/// Standardized statistic with lower-tail (negative favors experimental) and
/// two-sided p-values. `note` carries non-fatal remarks such as skipped
/// strata.
struct TestResult {
  std::string name;
  double z = 0.0;
  double p_one_sided = 0.0;
  double p_two_sided = 0.0;
  std::string note;
};

namespace detail {

inline TestResult make_result(TestId id, double z) {
  return {std::string(test_name(id)), z, one_sided_p(z), two_sided_p(z), {}};
}

}  // namespace detail

/// z = U / sqrt(V) on a score computed from the full sample as one stratum.
inline TestResult unstratified_test(const StratumScore& score, bool weighted) {
  const double u = weighted ? score.u_w : score.u;
  const double v = weighted ? score.v_w : score.v;
  if (!(v > 0.0))
    throw DegenerateError("no events / degenerate variance");
  return detail::make_result(weighted ? TestId::z_w : TestId::z,
                             u / std::sqrt(v));
}

/// z = sum U_i / sqrt(sum V_i). Strata with zero variance contribute zero to
/// both sums.
inline TestResult stratified_lr(std::span<const StratumScore> scores) {
  double u = 0.0, v = 0.0;
  for (const auto& s : scores) {
    if (s.v > 0.0) {
      u += s.u;
      v += s.v;
    }
  }
  if (!(v > 0.0)) throw DegenerateError("all strata degenerate");
  return detail::make_result(TestId::zs, u / std::sqrt(v));
}

/// Sample-size combination of per-stratum score ratios:
/// z = sum n_i (U_i / V_i) / sqrt(sum n_i^2 / V_i). Every stratum must
/// carry positive variance for the ratio to exist.
inline TestResult stratified_lr_n(std::span<const StratumScore> scores) {
  double num = 0.0, denom = 0.0;
  for (const auto& s : scores) {
    if (!(s.v > 0.0))
      throw DegenerateError("degenerate stratum for sample-size combination");
    const double n = s.n_subjects;
    num += n * (s.u / s.v);
    denom += n * n / s.v;
  }
  if (!(denom > 0.0)) throw DegenerateError("all strata degenerate");
  return detail::make_result(TestId::zs_n, num / std::sqrt(denom));
}

/// Weighted scores summed on the U scale: z = sum U_i^W / sqrt(sum V_i^W).
inline TestResult stratified_wlr_u(std::span<const StratumScore> scores) {
  double u = 0.0, v = 0.0;
  for (const auto& s : scores) {
    if (s.v_w > 0.0) {
      u += s.u_w;
      v += s.v_w;
    }
  }
  if (!(v > 0.0)) throw DegenerateError("all strata degenerate");
  return detail::make_result(TestId::zs_wu, u / std::sqrt(v));
}

/// Per-stratum standardized weighted statistics recombined with the
/// unweighted variances: z = sum sqrt(V_i) (U_i^W / sqrt(V_i^W)) / sqrt(sum V_i).
/// Zero-variance strata are skipped and noted.
inline TestResult stratified_wlr_z(std::span<const StratumScore> scores) {
  double num = 0.0, v = 0.0;
  std::string skipped;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    if (!(s.v > 0.0)) {
      skipped += (skipped.empty() ? "" : ", ") + std::to_string(i);
      continue;
    }
    if (!(s.v_w > 0.0))
      throw std::logic_error("positive V with zero weighted V");
    num += std::sqrt(s.v) * (s.u_w / std::sqrt(s.v_w));
    v += s.v;
  }
  if (!(v > 0.0)) throw DegenerateError("all strata degenerate");
  auto result = detail::make_result(TestId::zs_wz, num / std::sqrt(v));
  if (!skipped.empty())
    result.note = "skipped zero-variance strata: " + skipped;
  return result;
}

/// Sample-size combination of weighted score ratios.
inline TestResult stratified_wlr_n(std::span<const StratumScore> scores) {
  double num = 0.0, denom = 0.0;
  for (const auto& s : scores) {
    if (!(s.v_w > 0.0))
      throw DegenerateError("degenerate stratum for sample-size combination");
    const double n = s.n_subjects;
    num += n * (s.u_w / s.v_w);
    denom += n * n / s.v_w;
  }
  if (!(denom > 0.0)) throw DegenerateError("all strata degenerate");
  return detail::make_result(TestId::zs_wn, num / std::sqrt(denom));
}

/// Where the pooled KM curve behind the modest weights comes from in a
/// stratified analysis: each stratum's own arm-pooled curve, or one curve
/// pooled across strata as well. Pooling across strata keeps the weights
/// bounded by the overall survival, which preserves the size of the weighted
/// statistics when one stratum has very short survival; per-stratum weights
/// follow each stratum's own curve and can grow much larger there.
enum class WeightPooling { per_stratum, across_strata };

struct StratumDiagnostics {
  int stratum = 0;
  StratumScore score;
  double peto_loghr = 0.0;    // U / V
  double peto_loghr_w = 0.0;  // U^W / V^W
};

struct TestReport {
  TestId id = TestId::z;
  bool ok = false;
  TestResult result;
  std::string error;
};

struct AnalysisResult {
  std::vector<TestReport> tests;  // the seven statistics, fixed order
  std::vector<StratumDiagnostics> strata;
  KMCurve pooled_km;               // pooled over arms and strata
  std::vector<KMCurve> stratum_km; // per-stratum, pooled over arms

  const TestReport& report(TestId id) const {
    for (const auto& t : tests)
      if (t.id == id) return t;
    throw std::logic_error("unknown test id");
  }
};

/// Runs all seven statistics off a single pass of risk tables. Unstratified
/// variants treat the full sample as one stratum with weights from the fully
/// pooled KM curve. Failures of individual statistics are reported per item
/// without aborting the rest.
inline AnalysisResult run_all(std::span<const SubjectRecord> records,
                              int n_strata, const WeightSpec& spec,
                              WeightPooling pooling = WeightPooling::across_strata) {
  if (records.empty()) throw std::invalid_argument("empty sample");
  int arms_seen[2] = {0, 0};
  for (const auto& r : records) {
    if (r.arm != 0 && r.arm != 1)
      throw std::invalid_argument("arm must be 0 or 1");
    ++arms_seen[r.arm];
  }
  if (arms_seen[0] == 0 || arms_seen[1] == 0)
    throw std::invalid_argument("both arms must be present");

  AnalysisResult out;
  out.pooled_km = km_estimate(records);

  // Unstratified pair off the full sample as one risk set.
  const RiskTable pooled_table = build_risk_table(records);
  std::vector<double> pooled_times;
  pooled_times.reserve(pooled_table.rows.size());
  for (const auto& row : pooled_table.rows) pooled_times.push_back(row.time);
  const auto pooled_weights =
      compute_weights(spec, out.pooled_km, pooled_times);
  const StratumScore pooled_score = stratum_score(pooled_table, pooled_weights);

  // Per-stratum scores with weights from the configured pooling.
  const auto groups = split_by_stratum(records, n_strata);
  std::vector<StratumScore> scores;
  scores.reserve(groups.size());
  for (int i = 0; i < n_strata; ++i) {
    const auto& group = groups[static_cast<std::size_t>(i)];
    StratumScore s;
    if (!group.empty()) {
      const RiskTable table = build_risk_table(group);
      KMCurve km;
      if (pooling == WeightPooling::per_stratum) {
        km = km_estimate(group);
        out.stratum_km.push_back(km);
      } else {
        km = out.pooled_km;
        out.stratum_km.push_back(km_estimate(group));
      }
      std::vector<double> times;
      times.reserve(table.rows.size());
      for (const auto& row : table.rows) times.push_back(row.time);
      s = stratum_score(table, compute_weights(spec, km, times));
    } else {
      out.stratum_km.push_back(KMCurve{});
    }
    scores.push_back(s);

    StratumDiagnostics diag;
    diag.stratum = i;
    diag.score = s;
    diag.peto_loghr = s.v > 0.0 ? s.u / s.v
                                : std::numeric_limits<double>::quiet_NaN();
    diag.peto_loghr_w = s.v_w > 0.0
                            ? s.u_w / s.v_w
                            : std::numeric_limits<double>::quiet_NaN();
    out.strata.push_back(diag);
  }

  auto attempt = [&](TestId id, auto&& fn) {
    TestReport report;
    report.id = id;
    try {
      report.result = fn();
      report.ok = true;
    } catch (const DegenerateError& err) {
      report.ok = false;
      report.error = err.what();
      report.result.name = std::string(test_name(id));
    }
    out.tests.push_back(std::move(report));
  };

  attempt(TestId::z, [&] { return unstratified_test(pooled_score, false); });
  attempt(TestId::z_w, [&] { return unstratified_test(pooled_score, true); });
  attempt(TestId::zs, [&] { return stratified_lr(scores); });
  attempt(TestId::zs_n, [&] { return stratified_lr_n(scores); });
  attempt(TestId::zs_wu, [&] { return stratified_wlr_u(scores); });
  attempt(TestId::zs_wz, [&] { return stratified_wlr_z(scores); });
  attempt(TestId::zs_wn, [&] { return stratified_wlr_n(scores); });
  return out;
}

}  // namespace swlrt
