#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "swlrt/survival.hpp"

namespace swlrt {

/// Ingestion problem; the message carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Which header names map onto the subject fields. `arm_experimental`, when
/// set, names the label coded as arm 1; any single other label becomes arm 0.
struct ColumnMap {
  std::string time = "time";
  std::string event = "event";
  std::string arm = "arm";
  std::string stratum = "stratum";
  std::string arm_experimental;
};

struct Dataset {
  std::vector<SubjectRecord> records;
  std::vector<std::string> stratum_labels;  // first-appearance order
  std::vector<std::string> arm_labels;      // index 0 = control, 1 = experimental

  int n_strata() const { return static_cast<int>(stratum_labels.size()); }
};

namespace detail {

inline std::string trim_field(std::string s) {
  const char* ws = " \t\r\n";
  const auto begin = s.find_first_not_of(ws);
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(ws);
  s = s.substr(begin, end - begin + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
    s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split_line(const std::string& line,
                                           char delim) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == delim) {
      fields.push_back(trim_field(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(trim_field(current));
  return fields;
}

inline char detect_delimiter(const std::string& header) {
  const char candidates[3] = {',', '\t', ';'};
  char best = ',';
  std::size_t best_count = 0;
  for (char c : candidates) {
    const auto count = static_cast<std::size_t>(
        std::count(header.begin(), header.end(), c));
    if (count > best_count) {
      best = c;
      best_count = count;
    }
  }
  return best;
}

inline std::size_t find_column(const std::vector<std::string>& header,
                               const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ParseError("line 1: column '" + name + "' not found in header");
}

inline double parse_time(const std::string& field, std::size_t line_no) {
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last)
    throw ParseError("line " + std::to_string(line_no) +
                     ": cannot parse time value '" + field + "'");
  return value;
}

}  // namespace detail

/// Reads subject records from a delimited text file with a header row.
/// `delim` = 0 auto-detects among comma, tab and semicolon. Stratum labels
/// may be arbitrary strings and are indexed in first-appearance order.
inline Dataset read_records_csv(const std::string& path, const ColumnMap& cols,
                                char delim = 0) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open input file: " + path);

  std::string header_line;
  if (!std::getline(in, header_line))
    throw ParseError("line 1: empty input file");
  if (delim == 0) delim = detail::detect_delimiter(header_line);
  const auto header = detail::split_line(header_line, delim);

  const auto time_idx = detail::find_column(header, cols.time);
  const auto event_idx = detail::find_column(header, cols.event);
  const auto arm_idx = detail::find_column(header, cols.arm);
  const auto stratum_idx = detail::find_column(header, cols.stratum);

  struct RawRow {
    double time;
    bool event;
    std::string arm;
    std::string stratum;
    std::size_t line_no;
  };
  std::vector<RawRow> raw;
  std::map<std::string, int> stratum_index;
  Dataset data;

  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim_field(line).empty()) continue;
    const auto fields = detail::split_line(line, delim);
    const std::size_t needed =
        std::max({time_idx, event_idx, arm_idx, stratum_idx}) + 1;
    if (fields.size() < needed)
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected at least " + std::to_string(needed) +
                       " fields, got " + std::to_string(fields.size()));

    RawRow row;
    row.line_no = line_no;
    row.time = detail::parse_time(fields[time_idx], line_no);
    if (row.time < 0.0)
      throw ParseError("line " + std::to_string(line_no) +
                       ": negative time value");
    const auto& ev = fields[event_idx];
    if (ev == "0")
      row.event = false;
    else if (ev == "1")
      row.event = true;
    else
      throw ParseError("line " + std::to_string(line_no) +
                       ": event value '" + ev + "' is not 0/1");
    row.arm = fields[arm_idx];
    row.stratum = fields[stratum_idx];
    raw.push_back(std::move(row));
  }
  if (raw.empty()) throw ParseError("no data rows in input");

  // Arm mapping: native 0/1, or a named experimental label vs one other.
  std::map<std::string, int> arm_code;
  std::vector<std::string> arm_labels_seen;
  for (const auto& row : raw)
    if (!arm_code.count(row.arm)) {
      arm_code[row.arm] = -1;
      arm_labels_seen.push_back(row.arm);
    }
  const bool native01 =
      arm_code.size() <= 2 && [&] {
        for (const auto& [label, _] : arm_code)
          if (label != "0" && label != "1") return false;
        return true;
      }();
  if (native01) {
    for (auto& [label, code] : arm_code) code = label == "1" ? 1 : 0;
    data.arm_labels = {"0", "1"};
  } else if (!cols.arm_experimental.empty()) {
    if (arm_code.size() > 2) {
      for (const auto& row : raw)
        if (row.arm != arm_labels_seen[0] && row.arm != arm_labels_seen[1])
          throw ParseError("line " + std::to_string(row.line_no) +
                           ": more than two arm labels present ('" + row.arm +
                           "')");
    }
    if (!arm_code.count(cols.arm_experimental))
      throw ParseError("experimental arm label '" + cols.arm_experimental +
                       "' does not occur in the data");
    for (auto& [label, code] : arm_code)
      code = label == cols.arm_experimental ? 1 : 0;
    data.arm_labels = {"", cols.arm_experimental};
    for (const auto& label : arm_labels_seen)
      if (label != cols.arm_experimental) data.arm_labels[0] = label;
  } else {
    for (const auto& row : raw)
      if (row.arm != "0" && row.arm != "1")
        throw ParseError("line " + std::to_string(row.line_no) +
                         ": arm value '" + row.arm +
                         "' is not 0/1 (use --arm-experimental to map labels)");
  }

  for (const auto& row : raw) {
    SubjectRecord rec;
    rec.time = row.time;
    rec.event = row.event;
    rec.arm = arm_code[row.arm];
    auto it = stratum_index.find(row.stratum);
    if (it == stratum_index.end()) {
      it = stratum_index.emplace(row.stratum, data.n_strata()).first;
      data.stratum_labels.push_back(row.stratum);
    }
    rec.stratum = it->second;
    data.records.push_back(rec);
  }
  return data;
}

/// Writes records back out in the canonical column order; inverse of
/// ingestion up to header normalization.
inline void write_records_csv(std::ostream& os, const Dataset& data) {
  os << "time,event,arm,stratum\n";
  char buf[64];
  for (const auto& r : data.records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.time);
    os << buf << ',' << (r.event ? 1 : 0) << ',' << r.arm << ','
       << data.stratum_labels[static_cast<std::size_t>(r.stratum)] << '\n';
  }
}

}  // namespace swlrt
