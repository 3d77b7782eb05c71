#pragma once

// Signal CSV schema:
//
//   ch1,ch2,ch3,ch4,ch5,ch6[,rpm,torque]
//   <six numbers>[,<rpm>,<torque>]
//   ...
//
// One row per sampling instant at 12.8 kHz. Channel order is motor x/y/z,
// then gearbox intermediate-shaft x/y/z. The rpm/torque columns are optional
// but must appear together.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "atta/datagen/recording.hpp"

namespace atta {

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Parses a signal CSV. The fault label and condition index are metadata the
/// file does not carry; callers pass them in.
inline RawRecording load_csv(const std::string& path, int fault_label = -1, int condition = 0) {
  std::ifstream f(path);
  if (!f) throw DataError("load_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line)) throw SchemaError("load_csv: '" + path + "' is empty");

  const auto header = detail::split_commas(line);
  std::vector<std::string> names;
  for (auto h : header) names.emplace_back(detail::trim(h));
  const bool with_meta = names.size() == 8;
  if (names.size() != kChannels && !with_meta) {
    throw SchemaError("load_csv: expected 6 channel columns (optionally + rpm,torque), got " +
                      std::to_string(names.size()) + " columns");
  }
  for (std::size_t c = 0; c < kChannels; ++c) {
    if (names[c] != "ch" + std::to_string(c + 1)) {
      throw SchemaError("load_csv: column " + std::to_string(c + 1) + " should be 'ch" +
                        std::to_string(c + 1) + "', got '" + names[c] + "'");
    }
  }
  if (with_meta && (names[6] != "rpm" || names[7] != "torque")) {
    throw SchemaError("load_csv: metadata columns must be 'rpm,torque'");
  }

  std::vector<std::vector<double>> cols(names.size());
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_commas(line);
    if (fields.size() != names.size()) {
      throw ParseError("load_csv: expected " + std::to_string(names.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const auto field = detail::trim(fields[i]);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
        throw ParseError("load_csv: bad number '" + std::string(field) + "' in column " +
                             names[i],
                         line_no);
      }
      cols[i].push_back(v);
    }
  }

  RawRecording rec;
  const std::size_t n = cols[0].size();
  rec.channels.resize(static_cast<Eigen::Index>(kChannels), static_cast<Eigen::Index>(n));
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t i = 0; i < n; ++i)
      rec.channels(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = cols[c][i];
  }
  if (with_meta) {
    rec.rpm = std::move(cols[6]);
    rec.torque = std::move(cols[7]);
  }
  rec.fault_label = fault_label;
  rec.condition_trace.assign(n, condition);
  return rec;
}

/// Writes shortest round-trip decimal representations, so load_csv
/// reproduces the channels exactly.
inline void write_csv(const RawRecording& rec, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("write_csv: cannot open '" + path + "'");
  const bool with_meta = rec.rpm.size() == rec.length() && rec.torque.size() == rec.length();
  f << "ch1,ch2,ch3,ch4,ch5,ch6" << (with_meta ? ",rpm,torque" : "") << '\n';
  std::string line;
  for (std::size_t i = 0; i < rec.length(); ++i) {
    line.clear();
    for (std::size_t c = 0; c < kChannels; ++c) {
      if (c) line += ',';
      line += detail::format_double(
          rec.channels(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)));
    }
    if (with_meta) {
      line += ',' + detail::format_double(rec.rpm[i]);
      line += ',' + detail::format_double(rec.torque[i]);
    }
    f << line << '\n';
  }
  if (!f) throw DataError("write_csv: failed writing '" + path + "'");
}

}  // namespace atta
