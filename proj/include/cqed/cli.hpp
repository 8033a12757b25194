#pragma once

// Config resolution and output writers for the sim tool.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cqed/errors.hpp"
#include "cqed/scenarios.hpp"

namespace cqed {

// ---------------------------------------------------------------------------
// Config

struct RunConfig {
  std::string scenario;
  ParamSet params;
  std::uint64_t seed = 20240611;
  std::filesystem::path out_dir;  // empty: ./out
  std::vector<std::string> formats = {"json"};
  int workers = 1;
  bool paper_scale = false;
  std::vector<std::string> warnings;
};

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::string nearest_key(const std::string& key, const std::vector<std::string>& valid) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (const std::string& v : valid) {
    const std::size_t d = edit_distance(key, v);
    if (d < best_d) {
      best_d = d;
      best = v;
    }
  }
  return best;
}

// Keys accepted besides the scenario parameters.
inline const std::vector<std::string>& run_keys() {
  static const std::vector<std::string> keys = {"run.seed", "run.workers", "run.formats", "run.out_dir"};
  return keys;
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parse "key = value" lines; '#' starts a comment.  A key repeated with a
/// different value is a conflict.
inline KeyValues parse_key_values(std::istream& in, const std::string& source) {
  KeyValues out;
  std::map<std::string, std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key or value");
    }
    auto it = seen.find(key);
    if (it != seen.end()) {
      if (it->second != value) {
        throw ConfigError(source + ":" + std::to_string(lineno) + ": conflicting values for '" + key + "' ('" +
                          it->second + "' and '" + value + "')");
      }
      continue;
    }
    seen.emplace(key, value);
    out.emplace_back(key, value);
  }
  return out;
}

inline KeyValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse_key_values(in, path.string());
}

inline std::pair<std::string, std::string> split_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + text + "' is not key=value");
  std::string key = trim(text.substr(0, eq));
  std::string value = trim(text.substr(eq + 1));
  if (key.empty() || value.empty()) throw ConfigError("override '" + text + "' has an empty key or value");
  return {key, value};
}

inline std::vector<std::string> parse_formats(const std::string& text) {
  std::vector<std::string> out;
  for (const std::string& item : split(text, ',')) {
    const std::string f = trim(item);
    if (f != "csv" && f != "json" && f != "svg") throw ConfigError("unknown output format '" + f + "'");
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  }
  // the summary is always written
  if (std::find(out.begin(), out.end(), "json") == out.end()) out.push_back("json");
  return out;
}

namespace detail {

inline void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "run.seed") {
    double v = 0.0;
    if (!parse_number(value, v) || v < 0 || v != std::floor(v)) throw ConfigError("run.seed must be a non-negative integer");
    cfg.seed = std::stoull(value);
  } else if (key == "run.workers") {
    double v = 0.0;
    if (!parse_number(value, v) || v < 1 || v != std::floor(v)) throw ConfigError("run.workers must be a positive integer");
    cfg.workers = static_cast<int>(v);
  } else if (key == "run.formats") {
    cfg.formats = parse_formats(value);
  } else if (key == "run.out_dir") {
    cfg.out_dir = value;
  } else if (cfg.params.contains(key)) {
    cfg.params.set(key, value);
  } else {
    std::vector<std::string> valid = cfg.params.keys();
    valid.insert(valid.end(), run_keys().begin(), run_keys().end());
    throw ConfigError("unknown key '" + key + "' for scenario " + cfg.scenario + "; did you mean '" +
                      nearest_key(key, valid) + "'?");
  }
}

}  // namespace detail

/// defaults < file < overrides.  Command-line run options (seed, out, ...) are
/// applied by the caller after this returns.
inline RunConfig parse_config(const std::string& scenario, const std::optional<std::filesystem::path>& file,
                              const std::vector<std::string>& overrides, bool paper_scale = false) {
  RunConfig cfg;
  cfg.scenario = scenario;
  cfg.params = scenario == "calc" ? calc_defaults() : scenario_defaults(scenario);
  cfg.paper_scale = paper_scale;
  if (paper_scale) apply_paper_scale(cfg.params);
  if (file) {
    for (const auto& [k, v] : read_config_file(*file)) detail::apply_key(cfg, k, v);
  }
  std::map<std::string, std::string> seen;
  for (const std::string& o : overrides) {
    const auto [k, v] = split_override(o);
    auto it = seen.find(k);
    if (it != seen.end() && it->second != v) {
      throw ConfigError("conflicting overrides for '" + k + "' ('" + it->second + "' and '" + v + "')");
    }
    seen[k] = v;
    detail::apply_key(cfg, k, v);
  }
  // surface physical-range warnings without failing
  cfg.warnings = system_from(cfg.params).warnings();
  return cfg;
}

inline std::string render_config(const ParamSet& ps) {
  std::ostringstream os;
  for (const ParamEntry& e : ps.entries()) {
    os << "# " << e.help << "\n" << e.key << " = " << e.value << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void emit_csv(const TimeSeries& ts, const std::filesystem::path& path) {
  ts.check();
  std::ofstream out = open_output(path);
  out << ts.axis_name;
  for (const auto& [name, values] : ts.channels) out << "," << name;
  out << "\n";
  for (std::size_t i = 0; i < ts.times.size(); ++i) {
    out << csv_number(ts.times[i]);
    for (const auto& [name, values] : ts.channels) out << "," << csv_number(values[i]);
    out << "\n";
  }
  finish_output(out, path);
}

inline void emit_csv(const Grid2D& g, const std::filesystem::path& path) {
  if (g.values.size() != g.axis1.size() * g.axis2.size()) throw ContractViolation("emit_csv: grid shape mismatch");
  std::ofstream out = open_output(path);
  out << g.axis1_name << "," << g.axis2_name << "," << g.value_name << "\n";
  for (std::size_t i = 0; i < g.axis1.size(); ++i) {
    for (std::size_t j = 0; j < g.axis2.size(); ++j) {
      out << csv_number(g.axis1[i]) << "," << csv_number(g.axis2[j]) << "," << csv_number(g.at(i, j)) << "\n";
    }
  }
  finish_output(out, path);
}

/// Parsed CSV: header plus numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  CsvTable t;
  std::string line;
  if (std::getline(in, line)) t.header = split(line, ',');
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const std::string& cell : split(line, ',')) row.push_back(std::stod(cell));
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// JSON summary

inline ordered_json summary_json(const RunConfig& cfg, const ScenarioOutput& out, double runtime_s) {
  ordered_json j;
  j["scenario"] = cfg.scenario;
  j["seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  j["paper_scale"] = cfg.paper_scale;
  j["config"] = cfg.params.to_json();
  j["warnings"] = cfg.warnings;
  j["results"] = out.results;
  ordered_json files = ordered_json::array();
  for (const auto& t : out.tables) files.push_back(t.first);
  for (const auto& g : out.grids) files.push_back(g.first);
  j["tables"] = files;
  j["runtime_s"] = runtime_s;
  return j;
}

inline void emit_json_summary(const ordered_json& summary, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << summary.dump(2) << "\n";
  finish_output(out, path);
}

// ---------------------------------------------------------------------------
// SVG

namespace svg {

inline constexpr double kWidth = 720.0;
inline constexpr double kHeight = 440.0;
inline constexpr double kLeft = 70.0;
inline constexpr double kRight = 150.0;
inline constexpr double kTop = 40.0;
inline constexpr double kBottom = 60.0;

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  return colors[i % 7];
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Axis {
  double lo, hi, px_lo, px_hi;
  double operator()(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

inline std::pair<double, double> padded(double lo, double hi) {
  if (hi > lo) return {lo, hi};
  const double d = std::abs(lo) > 0 ? 0.05 * std::abs(lo) : 0.5;
  return {lo - d, hi + d};
}

inline void frame(std::ostream& os, const std::string& title, const std::string& xlabel, const std::string& ylabel,
                  const Axis& x, const Axis& y) {
  os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(kWidth - kLeft - kRight)
     << "\" height=\"" << num(kHeight - kTop - kBottom) << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n";
  os << "<text x=\"" << num((kLeft + kWidth - kRight) / 2) << "\" y=\"" << num(kHeight - 15)
     << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(xlabel) << "</text>\n";
  os << "<text x=\"18\" y=\"" << num((kTop + kHeight - kBottom) / 2) << "\" text-anchor=\"middle\" font-size=\"13\" "
     << "transform=\"rotate(-90 18 " << num((kTop + kHeight - kBottom) / 2) << ")\">" << escape(ylabel) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x.lo + (x.hi - x.lo) * k / 4.0;
    const double yv = y.lo + (y.hi - y.lo) * k / 4.0;
    os << "<text x=\"" << num(x(xv)) << "\" y=\"" << num(kHeight - kBottom + 16)
       << "\" text-anchor=\"middle\" font-size=\"11\">" << tick(xv) << "</text>\n";
    os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(y(yv) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
       << tick(yv) << "</text>\n";
  }
}

}  // namespace svg

inline void render_svg(const LinePlot& plot, const std::filesystem::path& path) {
  const TimeSeries& ts = plot.series;
  if (ts.times.size() < 2) throw NoData("render_svg: line plot needs at least two points");
  std::vector<std::string> names = plot.channels;
  if (names.empty()) {
    for (const auto& c : ts.channels) names.push_back(c.first);
  }
  if (names.empty()) throw NoData("render_svg: no channels");
  double ylo = 0.0, yhi = 0.0;
  if (plot.y_range) {
    std::tie(ylo, yhi) = *plot.y_range;
  } else {
    ylo = std::numeric_limits<double>::infinity();
    yhi = -ylo;
    for (const std::string& n : names) {
      for (double v : ts.channel(n)) {
        ylo = std::min(ylo, v);
        yhi = std::max(yhi, v);
      }
    }
    std::tie(ylo, yhi) = svg::padded(ylo, yhi);
  }
  const auto [xlo, xhi] = svg::padded(ts.times.front(), ts.times.back());
  const svg::Axis x{xlo, xhi, svg::kLeft, svg::kWidth - svg::kRight};
  const svg::Axis y{ylo, yhi, svg::kHeight - svg::kBottom, svg::kTop};

  std::ofstream os = open_output(path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg::num(svg::kWidth) << "\" height=\""
     << svg::num(svg::kHeight) << "\" font-family=\"sans-serif\">\n";
  svg::frame(os, plot.title, ts.axis_name, plot.y_label, x, y);
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto& v = ts.channel(names[c]);
    os << "<polyline class=\"series\" fill=\"none\" stroke=\"" << svg::palette(c) << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ts.times.size(); ++i) {
      const double yy = std::clamp(y(v[i]), svg::kTop, svg::kHeight - svg::kBottom);
      os << svg::num(x(ts.times[i])) << "," << svg::num(yy) << (i + 1 < ts.times.size() ? " " : "");
    }
    os << "\"/>\n";
    const double ly = svg::kTop + 16.0 * static_cast<double>(c + 1);
    os << "<text x=\"" << svg::num(svg::kWidth - svg::kRight + 10) << "\" y=\"" << svg::num(ly) << "\" font-size=\"11\" fill=\""
       << svg::palette(c) << "\">" << svg::escape(names[c]) << "</text>\n";
  }
  for (double t : plot.vlines) {
    if (t < xlo || t > xhi) continue;
    os << "<line class=\"marker\" x1=\"" << svg::num(x(t)) << "\" x2=\"" << svg::num(x(t)) << "\" y1=\""
       << svg::num(svg::kTop) << "\" y2=\"" << svg::num(svg::kHeight - svg::kBottom)
       << "\" stroke=\"gray\" stroke-dasharray=\"5,4\"/>\n";
  }
  os << "</svg>\n";
  finish_output(os, path);
}

inline void render_svg(const HeatmapPlot& plot, const std::filesystem::path& path) {
  const Grid2D& g = plot.grid;
  if (g.axis1.size() < 2 || g.axis2.size() < 2) throw NoData("render_svg: heatmap needs at least a 2x2 grid");
  double vlo = std::numeric_limits<double>::infinity(), vhi = -vlo;
  for (double v : g.values) {
    vlo = std::min(vlo, v);
    vhi = std::max(vhi, v);
  }
  std::tie(vlo, vhi) = svg::padded(vlo, vhi);
  // x: axis2, y: axis1; cells centred on the samples
  const double dx = (g.axis2.back() - g.axis2.front()) / static_cast<double>(g.axis2.size() - 1);
  const double dy = (g.axis1.back() - g.axis1.front()) / static_cast<double>(g.axis1.size() - 1);
  const svg::Axis x{g.axis2.front() - dx / 2, g.axis2.back() + dx / 2, svg::kLeft, svg::kWidth - svg::kRight};
  const svg::Axis y{g.axis1.front() - dy / 2, g.axis1.back() + dy / 2, svg::kHeight - svg::kBottom, svg::kTop};
  const double w = std::abs(x(g.axis2.front() + dx) - x(g.axis2.front()));
  const double h = std::abs(y(g.axis1.front() + dy) - y(g.axis1.front()));

  std::ofstream os = open_output(path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg::num(svg::kWidth) << "\" height=\""
     << svg::num(svg::kHeight) << "\" font-family=\"sans-serif\">\n";
  auto color = [&](double v) {
    const double s = std::clamp((v - vlo) / (vhi - vlo), 0.0, 1.0);
    const int r = static_cast<int>(255 * s);
    const int b = static_cast<int>(255 * (1 - s));
    const int gr = static_cast<int>(255 * (1 - std::abs(2 * s - 1)) * 0.6);
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, gr, b);
    return std::string(buf);
  };
  os << "<g shape-rendering=\"crispEdges\">\n";
  for (std::size_t i = 0; i < g.axis1.size(); ++i) {
    for (std::size_t j = 0; j < g.axis2.size(); ++j) {
      os << "<rect class=\"cell\" x=\"" << svg::num(x(g.axis2[j]) - w / 2) << "\" y=\"" << svg::num(y(g.axis1[i]) - h / 2)
         << "\" width=\"" << svg::num(w + 0.05) << "\" height=\"" << svg::num(h + 0.05) << "\" fill=\""
         << color(g.at(i, j)) << "\"/>\n";
    }
  }
  os << "</g>\n";
  svg::frame(os, plot.title, g.axis2_name, g.axis1_name, x, y);
  os << "<text x=\"" << svg::num(svg::kWidth - svg::kRight + 10) << "\" y=\"" << svg::num(svg::kTop + 16)
     << "\" font-size=\"11\">" << svg::escape(g.value_name) << " " << svg::tick(vlo) << " (blue) to " << svg::tick(vhi)
     << " (red)</text>\n";
  if (plot.hline) {
    os << "<line class=\"marker\" x1=\"" << svg::num(svg::kLeft) << "\" x2=\"" << svg::num(svg::kWidth - svg::kRight)
       << "\" y1=\"" << svg::num(y(*plot.hline)) << "\" y2=\"" << svg::num(y(*plot.hline))
       << "\" stroke=\"white\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n";
  }
  os << "</svg>\n";
  finish_output(os, path);
}

// ---------------------------------------------------------------------------

/// Write every requested artefact of a run; returns the written paths.
inline std::vector<std::filesystem::path> write_outputs(const RunConfig& cfg, const ScenarioOutput& out, double runtime_s) {
  std::vector<std::filesystem::path> written;
  auto wants = [&](const char* f) { return std::find(cfg.formats.begin(), cfg.formats.end(), f) != cfg.formats.end(); };
  const std::filesystem::path dir = (cfg.out_dir.empty() ? std::filesystem::path("out") : cfg.out_dir) / cfg.scenario;
  if (wants("csv")) {
    for (const auto& [name, ts] : out.tables) {
      written.push_back(dir / (name + ".csv"));
      emit_csv(ts, written.back());
    }
    for (const auto& [name, g] : out.grids) {
      written.push_back(dir / (name + ".csv"));
      emit_csv(g, written.back());
    }
  }
  if (wants("svg")) {
    for (const LinePlot& p : out.line_plots) {
      written.push_back(dir / (p.name + ".svg"));
      render_svg(p, written.back());
    }
    for (const HeatmapPlot& p : out.heatmaps) {
      written.push_back(dir / (p.name + ".svg"));
      render_svg(p, written.back());
    }
  }
  written.push_back(dir / "summary.json");
  emit_json_summary(summary_json(cfg, out, runtime_s), written.back());
  return written;
}

/// Exit codes of the sim tool.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitContract = 3, kExitIo = 4 };

}  // namespace cqed
