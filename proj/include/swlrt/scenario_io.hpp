#pragma once

#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "swlrt/scenarios.hpp"

namespace swlrt {

inline constexpr int scenario_file_version = 1;

inline nlohmann::json to_json(const PiecewiseExp& dist) {
  return {{"breakpoints", dist.breakpoints}, {"rates", dist.rates}};
}

inline PiecewiseExp piecewise_from_json(const nlohmann::json& j) {
  PiecewiseExp dist;
  dist.breakpoints = j.at("breakpoints").get<std::vector<double>>();
  dist.rates = j.at("rates").get<std::vector<double>>();
  dist.validate();
  return dist;
}

inline nlohmann::json to_json(const ScenarioSpec& spec) {
  nlohmann::json strata = nlohmann::json::array();
  for (const auto& s : spec.strata) {
    strata.push_back({{"label", s.label},
                      {"prevalence", s.prevalence},
                      {"control", to_json(s.control)},
                      {"experimental", to_json(s.experimental)}});
  }
  return {{"name", spec.name},
          {"prognostic", spec.prognostic},
          {"effect", spec.effect},
          {"strata", strata}};
}

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  ScenarioSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.prognostic = j.value("prognostic", std::string("custom"));
  spec.effect = j.value("effect", 0);
  for (const auto& js : j.at("strata")) {
    StratumModel s;
    s.label = js.at("label").get<std::string>();
    s.prevalence = js.at("prevalence").get<double>();
    s.control = piecewise_from_json(js.at("control"));
    s.experimental = piecewise_from_json(js.at("experimental"));
    spec.strata.push_back(std::move(s));
  }
  spec.validate();
  return spec;
}

inline void save_scenarios(const std::string& path,
                           std::span<const ScenarioSpec> scenarios) {
  nlohmann::json doc;
  doc["version"] = scenario_file_version;
  doc["scenarios"] = nlohmann::json::array();
  for (const auto& s : scenarios) doc["scenarios"].push_back(to_json(s));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file: " + path);
  out << doc.dump(2) << '\n';
}

inline std::vector<ScenarioSpec> load_scenarios(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("scenario file " + path + ": " + e.what());
  }
  if (doc.value("version", 0) != scenario_file_version)
    throw std::runtime_error("scenario file " + path +
                             ": unsupported version");
  std::vector<ScenarioSpec> out;
  try {
    for (const auto& js : doc.at("scenarios"))
      out.push_back(scenario_from_json(js));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("scenario file " + path + ": " + e.what());
  }
  return out;
}

}  // namespace swlrt
