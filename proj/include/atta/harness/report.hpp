#pragma once

// metrics.csv (long format), summary.csv (one row per fault × adapter) and
// one cumulative-accuracy SVG per scenario and fault.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "atta/datagen/csv.hpp"
#include "atta/harness/experiment.hpp"
#include "atta/harness/metrics.hpp"

namespace atta {

inline constexpr const char* kMetricsHeader =
    "scenario,fault,adapter,seed,index,prediction,truth,correct,cumulative_accuracy,segment";

inline void write_metrics_csv(const std::vector<RunMetrics>& runs, std::ostream& out) {
  out << kMetricsHeader << '\n';
  std::string line;
  for (const RunMetrics& m : runs) {
    const std::string prefix =
        m.scenario + ',' + m.fault + ',' + m.adapter + ',' + std::to_string(m.seed) + ',';
    for (std::size_t i = 0; i < m.correct.size(); ++i) {
      line = prefix;
      line += std::to_string(i + 1);
      line += ',' + std::to_string(m.predictions[i]);
      line += ',' + std::to_string(m.truth[i]);
      line += ',' + std::to_string(m.correct[i]);
      line += ',' + detail::format_double(m.cumulative[i]);
      line += ',' + m.segment[i];
      out << line << '\n';
    }
  }
}

namespace detail {
inline long long parse_int(std::string_view s, std::size_t line) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("metrics.csv: bad integer '" + std::string(s) + "'", line);
  }
  return v;
}
inline double parse_real(std::string_view s, std::size_t line) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("metrics.csv: bad number '" + std::string(s) + "'", line);
  }
  return v;
}
}  // namespace detail

/// Inverse of write_metrics_csv.
inline std::vector<RunMetrics> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kMetricsHeader) {
    throw SchemaError("metrics.csv: unexpected header");
  }
  std::vector<RunMetrics> runs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_commas(detail::trim(line));
    if (f.size() != 10) throw ParseError("metrics.csv: expected 10 fields", line_no);
    const auto seed = static_cast<std::uint64_t>(detail::parse_int(f[3], line_no));
    if (runs.empty() || runs.back().scenario != f[0] || runs.back().fault != f[1] ||
        runs.back().adapter != f[2] || runs.back().seed != seed) {
      RunMetrics m;
      m.scenario = f[0];
      m.fault = f[1];
      m.adapter = f[2];
      m.seed = seed;
      runs.push_back(std::move(m));
    }
    RunMetrics& m = runs.back();
    if (detail::parse_int(f[4], line_no) != static_cast<long long>(m.correct.size() + 1)) {
      throw ParseError("metrics.csv: sample index out of sequence", line_no);
    }
    m.predictions.push_back(static_cast<int>(detail::parse_int(f[5], line_no)));
    m.truth.push_back(static_cast<int>(detail::parse_int(f[6], line_no)));
    m.correct.push_back(static_cast<int>(detail::parse_int(f[7], line_no)));
    m.cumulative.push_back(detail::parse_real(f[8], line_no));
    m.segment.emplace_back(f[9]);
  }
  return runs;
}

/// Runs grouped by (scenario, fault, adapter) in first-seen order.
struct RunGroup {
  std::string scenario;
  std::string fault;
  std::string adapter;
  std::vector<const RunMetrics*> runs;  ///< one per seed
};

inline std::vector<RunGroup> group_runs(const std::vector<RunMetrics>& runs) {
  std::vector<RunGroup> groups;
  for (const RunMetrics& m : runs) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const RunGroup& g) {
      return g.scenario == m.scenario && g.fault == m.fault && g.adapter == m.adapter;
    });
    if (it == groups.end()) {
      groups.push_back({m.scenario, m.fault, m.adapter, {}});
      it = std::prev(groups.end());
    }
    it->runs.push_back(&m);
  }
  // canonical adapter order within each (scenario, fault), keys in first-seen order
  std::vector<std::pair<std::string, std::string>> keys;
  for (const RunGroup& g : groups)
    if (std::find(keys.begin(), keys.end(), std::make_pair(g.scenario, g.fault)) == keys.end())
      keys.emplace_back(g.scenario, g.fault);
  std::vector<RunGroup> ordered;
  for (const auto& [scenario, fault] : keys) {
    std::vector<std::string> names = adapter_names();
    for (const RunGroup& g : groups)
      if (g.scenario == scenario && g.fault == fault &&
          std::find(names.begin(), names.end(), g.adapter) == names.end())
        names.push_back(g.adapter);
    for (const auto& name : names)
      for (const RunGroup& g : groups)
        if (g.scenario == scenario && g.fault == fault && g.adapter == name) ordered.push_back(g);
  }
  groups = std::move(ordered);
  return groups;
}

inline double mean_final_accuracy(const RunGroup& g) {
  double s = 0.0;
  for (const RunMetrics* m : g.runs) s += m->final_accuracy();
  return s / static_cast<double>(g.runs.size());
}

inline std::vector<std::string> segment_tags(const std::vector<RunMetrics>& runs) {
  std::vector<std::string> tags;
  for (const RunMetrics& m : runs)
    for (const auto& t : m.segment)
      if (std::find(tags.begin(), tags.end(), t) == tags.end()) tags.push_back(t);
  return tags;
}

inline std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline void write_summary_csv(const std::vector<RunMetrics>& runs, std::ostream& out) {
  const auto groups = group_runs(runs);
  std::vector<std::uint64_t> seeds;
  for (const RunMetrics& m : runs)
    if (std::find(seeds.begin(), seeds.end(), m.seed) == seeds.end()) seeds.push_back(m.seed);
  const auto tags = segment_tags(runs);

  out << "scenario,fault,adapter,final_cumulative_accuracy";
  for (auto s : seeds) out << ",seed_" << s;
  for (const auto& t : tags) out << ",acc_" << t;
  out << '\n';
  for (const RunGroup& g : groups) {
    out << g.scenario << ',' << g.fault << ',' << g.adapter << ',' << fixed6(mean_final_accuracy(g));
    for (auto s : seeds) {
      out << ',';
      for (const RunMetrics* m : g.runs)
        if (m->seed == s) out << fixed6(m->final_accuracy());
    }
    for (const auto& t : tags) {
      double sum = 0.0;
      double n = 0.0;
      for (const RunMetrics* m : g.runs) {
        const auto acc = m->segment_accuracy();
        if (auto it = acc.find(t); it != acc.end()) {
          sum += it->second;
          n += 1.0;
        }
      }
      out << ',' << (n > 0 ? fixed6(sum / n) : std::string());
    }
    out << '\n';
  }
}

/// Cumulative-accuracy curves (mean over seeds) for one scenario and fault,
/// with non-steady segments shaded.
inline void write_svg(const std::vector<RunMetrics>& runs, const std::string& scenario,
                      const std::string& fault, std::ostream& out) {
  std::vector<RunGroup> groups;
  for (const RunGroup& g : group_runs(runs))
    if (g.scenario == scenario && g.fault == fault) groups.push_back(g);
  if (groups.empty()) throw DataError("write_svg: no runs for " + scenario + "/" + fault);

  std::size_t n = SIZE_MAX;
  for (const RunGroup& g : groups)
    for (const RunMetrics* m : g.runs) n = std::min(n, m->cumulative.size());

  const double w = 760.0;
  const double h = 440.0;
  const double left = 60.0;
  const double right = 150.0;
  const double top = 40.0;
  const double bottom = 50.0;
  const double pw = w - left - right;
  const double ph = h - top - bottom;
  auto px = [&](double i) { return left + pw * (n > 1 ? i / static_cast<double>(n - 1) : 0.0); };
  auto py = [&](double a) { return top + ph * (1.0 - a); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
  out << "  <title>Cumulative accuracy, scenario " << scenario << ", " << fault << "</title>\n";
  out << "  <rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";

  // shaded non-steady segments, taken from the first run
  const RunMetrics& first = *groups.front().runs.front();
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && first.segment[j] == first.segment[i]) ++j;
    if (first.segment[i].rfind("steady", 0) != 0) {
      out << "  <rect class=\"segment\" data-segment=\"" << first.segment[i] << "\" x=\""
          << num(px(static_cast<double>(i))) << "\" y=\"" << num(top) << "\" width=\""
          << num(px(static_cast<double>(j - 1)) - px(static_cast<double>(i))) << "\" height=\""
          << num(ph) << "\" fill=\"#f2d7a6\" fill-opacity=\"0.6\"/>\n";
    }
    i = j;
  }

  for (int g = 0; g <= 5; ++g) {
    const double a = g / 5.0;
    out << "  <line x1=\"" << num(left) << "\" y1=\"" << num(py(a)) << "\" x2=\"" << num(left + pw)
        << "\" y2=\"" << num(py(a)) << "\" stroke=\"#dddddd\"/>\n";
    out << "  <text x=\"" << num(left - 8) << "\" y=\"" << num(py(a) + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">" << num(a) << "</text>\n";
  }
  out << "  <rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw)
      << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "  <text x=\"" << num(left + pw / 2) << "\" y=\"" << num(h - 12)
      << "\" font-size=\"12\" text-anchor=\"middle\">sample index</text>\n";
  out << "  <text x=\"16\" y=\"" << num(top + ph / 2) << "\" font-size=\"12\" text-anchor=\"middle\""
      << " transform=\"rotate(-90 16 " << num(top + ph / 2) << ")\">cumulative accuracy</text>\n";
  out << "  <text x=\"" << num(left) << "\" y=\"24\" font-size=\"14\">Scenario " << scenario << ", "
      << fault << "</text>\n";

  static const std::map<std::string, std::string> colors{
      {"Proposed", "#d62728"}, {"Baseline", "#1f77b4"}, {"Naive", "#2ca02c"}};
  const std::size_t stride = std::max<std::size_t>(1, n / 800);
  int legend = 0;
  for (const RunGroup& g : groups) {
    const auto c = colors.count(g.adapter) ? colors.at(g.adapter) : std::string("#555555");
    out << "  <polyline class=\"curve\" data-adapter=\"" << g.adapter << "\" fill=\"none\" stroke=\""
        << c << "\" stroke-width=\"1.5\" points=\"";
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; i += stride) idx.push_back(i);
    if (idx.back() != n - 1) idx.push_back(n - 1);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      double mean = 0.0;
      for (const RunMetrics* m : g.runs) mean += m->cumulative[idx[j]];
      mean /= static_cast<double>(g.runs.size());
      out << (j ? " " : "") << num(px(static_cast<double>(idx[j]))) << ',' << num(py(mean));
    }
    out << "\"/>\n";
    const double ly = top + 14 + 18 * legend++;
    out << "  <line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\""
        << num(left + pw + 36) << "\" y2=\"" << num(ly) << "\" stroke=\"" << c
        << "\" stroke-width=\"2\"/>\n";
    out << "  <text x=\"" << num(left + pw + 42) << "\" y=\"" << num(ly + 4) << "\" font-size=\"12\">"
        << g.adapter << ' ' << num(100.0 * mean_final_accuracy(g)) << "%</text>\n";
  }
  out << "</svg>\n";
}

inline std::string svg_name(const std::string& scenario, const std::string& fault) {
  return "cumulative_" + scenario + "_" + fault + ".svg";
}

/// Writes metrics.csv, summary.csv and the SVGs into `dir`.
inline std::vector<std::filesystem::path> emit_report(const std::vector<RunMetrics>& runs,
                                                      const std::string& dir) {
  return staged("report", [&] {
    if (runs.empty()) throw DataError("emit_report: no runs");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create '" + dir + "': " + ec.message());
    std::vector<std::filesystem::path> written;
    auto open = [&](const std::filesystem::path& p) {
      std::ofstream f(p, std::ios::binary);
      if (!f) throw Error("cannot write '" + p.string() + "'");
      written.push_back(p);
      return f;
    };
    const std::filesystem::path base(dir);
    {
      auto f = open(base / "metrics.csv");
      write_metrics_csv(runs, f);
    }
    {
      auto f = open(base / "summary.csv");
      write_summary_csv(runs, f);
    }
    std::set<std::pair<std::string, std::string>> done;
    for (const RunMetrics& m : runs) {
      if (!done.insert({m.scenario, m.fault}).second) continue;
      auto f = open(base / svg_name(m.scenario, m.fault));
      write_svg(runs, m.scenario, m.fault, f);
    }
    return written;
  });
}

/// Regenerates summary.csv and the SVGs from an existing metrics.csv.
inline std::vector<RunMetrics> load_metrics(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open '" + path + "'");
  return read_metrics_csv(f);
}

}  // namespace atta
