#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "swlrt/csv.hpp"
#include "swlrt/logrank.hpp"
#include "swlrt/scenario_io.hpp"
#include "swlrt/scenarios.hpp"
#include "swlrt/simulate.hpp"
#include "swlrt/version.hpp"

namespace swlrt {
namespace cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_input = 2;   // ingestion / validation problems
inline constexpr int exit_degenerate = 3;  // statistics undefined on the data

inline std::string fixed4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

inline std::string full17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// KM table output

struct KMBlock {
  std::string stratum;
  std::string arm;
  KMCurve curve;
};

/// Curves per stratum x arm plus all pooled margins, in stable order.
inline std::vector<KMBlock> km_blocks(const Dataset& data) {
  std::vector<KMBlock> blocks;
  auto add = [&](const std::string& stratum_label, const std::string& arm_label,
                 auto&& keep) {
    std::vector<SubjectRecord> subset;
    for (const auto& r : data.records)
      if (keep(r)) subset.push_back(r);
    if (subset.empty()) return;
    blocks.push_back({stratum_label, arm_label, km_estimate(subset)});
  };
  for (int s = 0; s < data.n_strata(); ++s) {
    const auto& label = data.stratum_labels[static_cast<std::size_t>(s)];
    for (int arm = 0; arm <= 1; ++arm)
      add(label, std::to_string(arm),
          [&](const SubjectRecord& r) { return r.stratum == s && r.arm == arm; });
    add(label, "pooled", [&](const SubjectRecord& r) { return r.stratum == s; });
  }
  for (int arm = 0; arm <= 1; ++arm)
    add("pooled", std::to_string(arm),
        [&](const SubjectRecord& r) { return r.arm == arm; });
  add("pooled", "pooled", [](const SubjectRecord&) { return true; });
  return blocks;
}

inline void write_km_csv(std::ostream& os, const std::vector<KMBlock>& blocks) {
  os << "stratum,arm,time,n_risk,n_event,survival\n";
  for (const auto& b : blocks) {
    for (std::size_t j = 0; j < b.curve.times.size(); ++j) {
      os << b.stratum << ',' << b.arm << ',' << full17(b.curve.times[j]) << ','
         << b.curve.n_risk[j] << ',' << b.curve.n_event[j] << ','
         << full17(b.curve.surv[j]) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOptions {
  std::string input;
  ColumnMap columns;
  std::string delimiter;  // empty = auto
  double t_star = 0.0;
  std::string pooling = "across-strata";
  std::string out;  // base path for machine outputs
};

inline WeightPooling parse_pooling(const std::string& s) {
  if (s == "per-stratum") return WeightPooling::per_stratum;
  if (s == "across-strata") return WeightPooling::across_strata;
  throw std::invalid_argument("pooling must be per-stratum or across-strata");
}

inline void write_analyze_outputs(const AnalyzeOptions& opts,
                                  const Dataset& data,
                                  const AnalysisResult& analysis) {
  {
    std::ofstream os(opts.out + "_tests.csv");
    os << "name,ok,z,p_one_sided,p_two_sided,note,error\n";
    for (const auto& t : analysis.tests) {
      os << test_name(t.id) << ',' << (t.ok ? 1 : 0) << ',';
      if (t.ok)
        os << full17(t.result.z) << ',' << full17(t.result.p_one_sided) << ','
           << full17(t.result.p_two_sided);
      else
        os << ",,";
      os << ',' << t.result.note << ',' << t.error << '\n';
    }
  }
  {
    std::ofstream os(opts.out + "_strata.csv");
    os << "stratum,label,n,d,U,V,U_W,V_W,peto_loghr,peto_loghr_w\n";
    for (const auto& d : analysis.strata) {
      os << d.stratum << ','
         << data.stratum_labels[static_cast<std::size_t>(d.stratum)] << ','
         << d.score.n_subjects << ',' << d.score.n_event_times << ','
         << full17(d.score.u) << ',' << full17(d.score.v) << ','
         << full17(d.score.u_w) << ',' << full17(d.score.v_w) << ','
         << full17(d.peto_loghr) << ',' << full17(d.peto_loghr_w) << '\n';
    }
  }
  {
    std::ofstream os(opts.out + "_km.csv");
    write_km_csv(os, km_blocks(data));
  }
  {
    nlohmann::json meta;
    meta["tool"] = "swlrt";
    meta["version"] = version;
    meta["command"] = "analyze";
    meta["input"] = opts.input;
    meta["t_star"] = opts.t_star;
    meta["pooling"] = opts.pooling;
    meta["columns"] = {{"time", opts.columns.time},
                       {"event", opts.columns.event},
                       {"arm", opts.columns.arm},
                       {"stratum", opts.columns.stratum}};
    meta["n_subjects"] = data.records.size();
    meta["stratum_labels"] = data.stratum_labels;
    meta["seed"] = nullptr;
    std::ofstream os(opts.out + ".meta.json");
    os << meta.dump(2) << '\n';
  }
}

inline int cmd_analyze(const AnalyzeOptions& opts) {
  Dataset data;
  try {
    data = read_records_csv(opts.input, opts.columns,
                            opts.delimiter.empty() ? 0 : opts.delimiter[0]);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_input;
  }

  int per_arm[2] = {0, 0};
  for (const auto& r : data.records) ++per_arm[r.arm];
  if (per_arm[0] < 2 || per_arm[1] < 2) {
    std::cerr << "error: need at least 2 subjects per arm (control: "
              << per_arm[0] << ", experimental: " << per_arm[1] << ")\n";
    return exit_input;
  }

  const auto pooling = parse_pooling(opts.pooling);
  const auto analysis = run_all(data.records, data.n_strata(),
                                WeightSpec::modest(opts.t_star), pooling);

  std::cout << "swlrt analyze\n"
            << "  input:    " << opts.input << '\n'
            << "  subjects: " << data.records.size() << " (control "
            << per_arm[0] << ", experimental " << per_arm[1] << ")\n"
            << "  arm 1 (experimental) label: " << data.arm_labels[1] << '\n'
            << "  strata:   " << data.n_strata() << " (";
  for (int s = 0; s < data.n_strata(); ++s)
    std::cout << (s ? ", " : "") << data.stratum_labels[static_cast<std::size_t>(s)];
  std::cout << ")\n"
            << "  t*:       " << fixed4(opts.t_star)
            << "   weight pooling: " << opts.pooling << "\n\n";

  std::cout << "per-stratum diagnostics\n"
            << "  stratum      label      n     d          U          V"
            << "        U_W        V_W   peto_loghr  peto_loghr_w\n";
  for (const auto& d : analysis.strata) {
    std::cout << "  " << std::setw(7) << d.stratum << std::setw(11)
              << data.stratum_labels[static_cast<std::size_t>(d.stratum)]
              << std::setw(7) << d.score.n_subjects << std::setw(6)
              << d.score.n_event_times << std::setw(11) << fixed4(d.score.u)
              << std::setw(11) << fixed4(d.score.v) << std::setw(11)
              << fixed4(d.score.u_w) << std::setw(11) << fixed4(d.score.v_w)
              << std::setw(13) << fixed4(d.peto_loghr) << std::setw(14)
              << fixed4(d.peto_loghr_w) << '\n';
  }

  std::cout << "\ntest statistics\n"
            << "  name       z     p_one     p_two   description\n";
  bool any_failed = false;
  for (const auto& t : analysis.tests) {
    std::cout << "  " << std::setw(5) << std::left << test_name(t.id)
              << std::right;
    if (t.ok) {
      std::cout << std::setw(8) << fixed4(t.result.z) << std::setw(10)
                << fixed4(t.result.p_one_sided) << std::setw(10)
                << fixed4(t.result.p_two_sided) << "   " << test_label(t.id);
      if (!t.result.note.empty()) std::cout << " [" << t.result.note << "]";
    } else {
      any_failed = true;
      std::cout << "  FAILED: " << t.error << "   (" << test_label(t.id) << ")";
    }
    std::cout << '\n';
  }

  if (data.n_strata() == 1)
    std::cout << "\nnote: single stratum; stratified statistics coincide with "
                 "their unstratified counterparts (Z = Zs = Zs_n, ZW = Zs_Wu "
                 "= Zs_Wz = Zs_Wn)\n";

  std::cout << "\nKaplan-Meier tables behind the weights (per stratum and "
               "pooled)\n";
  std::cout << "stratum,arm,time,n_risk,n_event,survival\n";
  const auto pooled_label = std::string("pooled");
  for (int s = 0; s < data.n_strata(); ++s) {
    const auto& km = analysis.stratum_km[static_cast<std::size_t>(s)];
    for (std::size_t j = 0; j < km.times.size(); ++j)
      std::cout << data.stratum_labels[static_cast<std::size_t>(s)]
                << ",pooled," << full17(km.times[j]) << ',' << km.n_risk[j]
                << ',' << km.n_event[j] << ',' << full17(km.surv[j]) << '\n';
  }
  for (std::size_t j = 0; j < analysis.pooled_km.times.size(); ++j)
    std::cout << pooled_label << ",pooled,"
              << full17(analysis.pooled_km.times[j]) << ','
              << analysis.pooled_km.n_risk[j] << ','
              << analysis.pooled_km.n_event[j] << ','
              << full17(analysis.pooled_km.surv[j]) << '\n';

  if (!opts.out.empty()) write_analyze_outputs(opts, data, analysis);
  return any_failed ? exit_degenerate : exit_ok;
}

// ---------------------------------------------------------------------------
// km

struct KmOptions {
  std::string input;
  ColumnMap columns;
  std::string delimiter;
  std::string out;
};

inline int cmd_km(const KmOptions& opts) {
  Dataset data;
  try {
    data = read_records_csv(opts.input, opts.columns,
                            opts.delimiter.empty() ? 0 : opts.delimiter[0]);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_input;
  }
  const auto blocks = km_blocks(data);
  if (opts.out.empty()) {
    write_km_csv(std::cout, blocks);
  } else {
    std::ofstream os(opts.out);
    if (!os) {
      std::cerr << "error: cannot write " << opts.out << '\n';
      return exit_input;
    }
    write_km_csv(os, blocks);
    nlohmann::json meta;
    meta["tool"] = "swlrt";
    meta["version"] = version;
    meta["command"] = "km";
    meta["input"] = opts.input;
    meta["n_subjects"] = data.records.size();
    meta["seed"] = nullptr;
    std::ofstream ms(opts.out + ".meta.json");
    ms << meta.dump(2) << '\n';
  }
  return exit_ok;
}

// ---------------------------------------------------------------------------
// design

struct DesignOptions {
  double median_control = 0.0;
  double median_exp = 0.0;
  double alpha = 0.025;
  double power = 0.9;
  double recruit_months = 9.0;
  double study_months = 24.0;
};

inline int cmd_design(const DesignOptions& opts) {
  const auto design =
      design_trial(opts.median_control, opts.median_exp, opts.alpha,
                   opts.power, opts.recruit_months, opts.study_months);
  std::cout << "swlrt design\n"
            << "  control median:        " << fixed4(opts.median_control)
            << " months\n"
            << "  experimental median:   " << fixed4(opts.median_exp)
            << " months\n"
            << "  one-sided alpha:       " << fixed4(opts.alpha) << '\n'
            << "  power:                 " << fixed4(opts.power) << '\n'
            << "  recruitment:           " << fixed4(opts.recruit_months)
            << " months (uniform)\n"
            << "  study duration:        " << fixed4(opts.study_months)
            << " months\n\n"
            << "  required events:       " << design.required_event_count
            << '\n'
            << "  event fraction:        " << fixed4(design.event_fraction)
            << " per patient\n"
            << "  required patients:     " << design.required_patients << " ("
            << design.required_patients / 2 << " per arm at 1:1)\n"
            << "  expected events:       " << fixed4(design.expected_events)
            << " at that size\n";
  return exit_ok;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  bool all = false;
  std::vector<std::string> scenario_names;
  std::string prognostic;
  int effect = 0;
  std::string scenario_file;
  SimConfig config;
  std::string allocation = "bernoulli";
  std::string pooling = "across-strata";
  std::string out;
};

inline std::vector<ScenarioSpec> select_scenarios(const SimulateOptions& opts) {
  std::vector<ScenarioSpec> chosen;
  if (!opts.scenario_file.empty()) {
    auto from_file = load_scenarios(opts.scenario_file);
    if (opts.scenario_names.empty()) return from_file;
    for (const auto& want : opts.scenario_names) {
      bool found = false;
      for (const auto& s : from_file)
        if (s.name == want) {
          chosen.push_back(s);
          found = true;
          break;
        }
      if (!found)
        throw std::invalid_argument("scenario '" + want +
                                    "' not present in " + opts.scenario_file);
    }
    return chosen;
  }
  if (opts.all) return all_builtin_scenarios();
  if (!opts.scenario_names.empty()) {
    const auto builtins = all_builtin_scenarios();
    for (const auto& want : opts.scenario_names) {
      bool found = false;
      for (const auto& s : builtins)
        if (s.name == want) {
          chosen.push_back(s);
          found = true;
          break;
        }
      if (!found)
        throw std::invalid_argument("unknown builtin scenario '" + want +
                                    "' (use e.g. moderate_4)");
    }
    return chosen;
  }
  if (!opts.prognostic.empty())
    return {builtin_scenario(prognostic_from_string(opts.prognostic),
                             opts.effect)};
  throw std::invalid_argument(
      "no scenario selected (use --all, --scenario, or --prognostic/--effect)");
}

inline int cmd_simulate(SimulateOptions& opts) {
  opts.config.allocation = opts.allocation == "bernoulli"
                               ? Allocation::bernoulli
                               : Allocation::permuted;
  opts.config.pooling = parse_pooling(opts.pooling);

  const auto scenarios = select_scenarios(opts);
  const auto results = run_grid(scenarios, opts.config);

  for (const auto& r : results) {
    if (r.high_failure_rate()) {
      std::cerr << "WARNING: scenario " << r.scenario
                << ": more than 1% of replicates had undefined statistics";
      for (std::size_t k = 0; k < all_test_ids.size(); ++k)
        if (r.failures[k] * 100 > r.n_reps)
          std::cerr << ' ' << test_name(all_test_ids[k]) << '='
                    << r.failures[k];
      std::cerr << '\n';
    }
  }

  if (opts.out.empty()) {
    write_results_csv(std::cout, results);
    return exit_ok;
  }
  std::ofstream os(opts.out);
  if (!os) {
    std::cerr << "error: cannot write " << opts.out << '\n';
    return exit_input;
  }
  write_results_csv(os, results);

  // Run metadata. The worker count is deliberately absent: it changes only
  // the schedule, never the results.
  nlohmann::json meta;
  meta["tool"] = "swlrt";
  meta["version"] = version;
  meta["command"] = "simulate";
  meta["seed"] = opts.config.seed;
  meta["n_reps"] = opts.config.n_reps;
  meta["n_total"] = opts.config.n_total;
  meta["recruitment_months"] = opts.config.recruitment_months;
  meta["study_months"] = opts.config.study_months;
  meta["alloc_ratio"] = opts.config.alloc_ratio;
  meta["allocation"] = opts.allocation;
  meta["pooling"] = opts.pooling;
  meta["alpha_one_sided"] = opts.config.alpha_one_sided;
  meta["t_star"] = opts.config.t_star;
  meta["scenarios"] = nlohmann::json::array();
  for (const auto& s : scenarios) meta["scenarios"].push_back(s.name);
  meta["output"] = opts.out;
  std::ofstream ms(opts.out + ".meta.json");
  ms << meta.dump(2) << '\n';
  return exit_ok;
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"stratified weighted log-rank tests for survival data"};
  app.require_subcommand(1);

  AnalyzeOptions analyze_opts;
  auto* analyze = app.add_subcommand(
      "analyze", "compute the seven test statistics on a dataset");
  analyze->add_option("input", analyze_opts.input, "delimited data file")
      ->required();
  analyze->add_option("--t-star", analyze_opts.t_star,
                      "weight cap time t* in months (0 = plain log-rank)");
  analyze->add_option("--pooling", analyze_opts.pooling,
                      "KM pooling for weights: per-stratum | across-strata")
      ->check(CLI::IsMember({"per-stratum", "across-strata"}));
  analyze->add_option("--time-col", analyze_opts.columns.time, "time column");
  analyze->add_option("--event-col", analyze_opts.columns.event,
                      "event column (0/1)");
  analyze->add_option("--arm-col", analyze_opts.columns.arm, "arm column");
  analyze->add_option("--stratum-col", analyze_opts.columns.stratum,
                      "stratum column");
  analyze->add_option("--arm-experimental",
                      analyze_opts.columns.arm_experimental,
                      "arm label to code as experimental (1)");
  analyze->add_option("--delim", analyze_opts.delimiter,
                      "field delimiter (default: auto , ; tab)");
  analyze->add_option("--out", analyze_opts.out,
                      "base path for machine-readable outputs");

  KmOptions km_opts;
  auto* km = app.add_subcommand("km", "export Kaplan-Meier tables");
  km->add_option("input", km_opts.input, "delimited data file")->required();
  km->add_option("--time-col", km_opts.columns.time, "time column");
  km->add_option("--event-col", km_opts.columns.event, "event column (0/1)");
  km->add_option("--arm-col", km_opts.columns.arm, "arm column");
  km->add_option("--stratum-col", km_opts.columns.stratum, "stratum column");
  km->add_option("--arm-experimental", km_opts.columns.arm_experimental,
                 "arm label to code as experimental (1)");
  km->add_option("--delim", km_opts.delimiter, "field delimiter");
  km->add_option("--out", km_opts.out, "output CSV path (default stdout)");

  DesignOptions design_opts;
  auto* design = app.add_subcommand(
      "design", "required events and patients for an exponential comparison");
  design->add_option("--median-control", design_opts.median_control,
                     "control median survival, months")
      ->required();
  design->add_option("--median-exp", design_opts.median_exp,
                     "experimental median survival, months")
      ->required();
  design->add_option("--alpha", design_opts.alpha, "one-sided alpha");
  design->add_option("--power", design_opts.power, "target power");
  design->add_option("--recruit-months", design_opts.recruit_months,
                     "uniform recruitment window, months");
  design->add_option("--study-months", design_opts.study_months,
                     "total study duration, months");

  SimulateOptions sim_opts;
  auto* simulate = app.add_subcommand(
      "simulate", "Monte Carlo power / type-I error for the seven tests");
  auto* all_flag =
      simulate->add_flag("--all", sim_opts.all, "run the full 27-scenario grid");
  auto* scen_opt =
      simulate->add_option("--scenario", sim_opts.scenario_names,
                           "scenario name (e.g. strong_8); repeatable");
  auto* prog_opt =
      simulate->add_option("--prognostic", sim_opts.prognostic,
                           "prognostic level: none | moderate | strong")
          ->check(CLI::IsMember({"none", "moderate", "strong"}));
  simulate->add_option("--effect", sim_opts.effect,
                       "treatment-effect pattern 1..9")
      ->needs(prog_opt);
  auto* file_opt =
      simulate->add_option("--scenario-file", sim_opts.scenario_file,
                           "JSON scenario file (see export-scenarios)");
  all_flag->excludes(scen_opt)->excludes(prog_opt)->excludes(file_opt);
  prog_opt->excludes(scen_opt)->excludes(file_opt);
  simulate->add_option("--reps", sim_opts.config.n_reps,
                       "Monte Carlo replicates");
  simulate->add_option("--seed", sim_opts.config.seed, "master seed")
      ->envname("SWLRT_SEED");
  simulate->add_option("--t-star", sim_opts.config.t_star,
                       "weight cap time t*");
  simulate->add_option("--n", sim_opts.config.n_total, "patients per trial");
  simulate->add_option("--alpha", sim_opts.config.alpha_one_sided,
                       "one-sided alpha");
  simulate->add_option("--recruit-months", sim_opts.config.recruitment_months,
                       "uniform recruitment window, months");
  simulate->add_option("--study-months", sim_opts.config.study_months,
                       "total study duration, months");
  simulate->add_option("--alloc-ratio", sim_opts.config.alloc_ratio,
                       "experimental:control allocation ratio");
  simulate->add_option("--alloc", sim_opts.allocation,
                       "arm assignment: permuted | bernoulli")
      ->check(CLI::IsMember({"permuted", "bernoulli"}));
  simulate->add_option("--pooling", sim_opts.pooling,
                       "KM pooling for weights: per-stratum | across-strata")
      ->check(CLI::IsMember({"per-stratum", "across-strata"}));
  simulate->add_option("--threads", sim_opts.config.threads,
                       "worker threads (never changes results)");
  simulate->add_option("--out", sim_opts.out, "results CSV path");

  std::string export_path = "scenarios.json";
  auto* export_cmd = app.add_subcommand(
      "export-scenarios", "write the 27 built-in scenarios to a JSON file");
  export_cmd->add_option("--out", export_path, "output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_input;
  }

  try {
    if (analyze->parsed()) return cmd_analyze(analyze_opts);
    if (km->parsed()) return cmd_km(km_opts);
    if (design->parsed()) return cmd_design(design_opts);
    if (simulate->parsed()) return cmd_simulate(sim_opts);
    if (export_cmd->parsed()) {
      const auto scenarios = all_builtin_scenarios();
      save_scenarios(export_path, scenarios);
      std::cout << "wrote " << scenarios.size() << " scenarios to "
                << export_path << '\n';
      return exit_ok;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_input;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_input;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_input;
  }
  return exit_ok;
}

}  // namespace cli
}  // namespace swlrt
