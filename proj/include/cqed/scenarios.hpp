#pragma once

// Named experiments built from the model, dynamics and gates layers.  Each
// scenario owns a parameter table (the single source of its defaults); every
// evolution time is derived from the effective-coupling calculators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cqed/dynamics.hpp"
#include "cqed/errors.hpp"
#include "cqed/gates.hpp"
#include "cqed/model.hpp"

namespace cqed {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Parameter tables

struct ParamEntry {
  std::string key;
  std::string value;
  std::string help;
};

inline bool parse_number(const std::string& text, double& out) {
  std::istringstream in(text);
  in >> out;
  if (in.fail()) return false;
  in >> std::ws;
  return in.eof();
}

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Ordered key -> text value table.  A value whose default is numeric must
/// stay numeric; list values are comma separated numbers.
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::vector<ParamEntry> entries) : entries_(std::move(entries)) {}

  const std::vector<ParamEntry>& entries() const { return entries_; }

  bool contains(const std::string& key) const { return find(key) != nullptr; }

  const std::string& text(const std::string& key) const {
    const ParamEntry* e = find(key);
    if (e == nullptr) throw ConfigError("unknown parameter '" + key + "'");
    return e->value;
  }

  double number(const std::string& key) const {
    double v = 0.0;
    if (!parse_number(text(key), v)) throw ConfigError("parameter '" + key + "' is not a number: " + text(key));
    return v;
  }

  int integer(const std::string& key) const {
    const double v = number(key);
    if (v != std::floor(v)) throw ConfigError("parameter '" + key + "' must be an integer");
    return static_cast<int>(v);
  }

  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& item : split(text(key), ',')) {
      double v = 0.0;
      if (!parse_number(trim(item), v)) throw ConfigError("parameter '" + key + "' has a non-numeric list item");
      out.push_back(v);
    }
    if (out.empty()) throw ConfigError("parameter '" + key + "' is an empty list");
    return out;
  }

  /// Replace a value; the key must exist and keep its kind (number, list, word).
  void set(const std::string& key, const std::string& raw) {
    ParamEntry* e = find_mut(key);
    if (e == nullptr) throw ConfigError("unknown parameter '" + key + "'");
    const std::string value = trim(raw);
    if (value.empty()) throw ConfigError("parameter '" + key + "' has an empty value");
    double v = 0.0;
    const bool was_number = parse_number(e->value, v);
    const bool was_list = !was_number && e->value.find(',') != std::string::npos;
    if (was_number && !parse_number(value, v)) throw ConfigError("parameter '" + key + "' expects a number, got '" + value + "'");
    if (was_list) {
      for (const std::string& item : split(value, ',')) {
        if (!parse_number(trim(item), v)) throw ConfigError("parameter '" + key + "' expects a number list, got '" + value + "'");
      }
    }
    e->value = value;
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const ParamEntry& e : entries_) out.push_back(e.key);
    return out;
  }

  ordered_json to_json() const {
    ordered_json j = ordered_json::object();
    for (const ParamEntry& e : entries_) {
      double v = 0.0;
      if (parse_number(e.value, v)) {
        j[e.key] = v;
      } else {
        j[e.key] = e.value;
      }
    }
    return j;
  }

 private:
  const ParamEntry* find(const std::string& key) const {
    for (const ParamEntry& e : entries_) {
      if (e.key == key) return &e;
    }
    return nullptr;
  }
  ParamEntry* find_mut(const std::string& key) {
    for (ParamEntry& e : entries_) {
      if (e.key == key) return &e;
    }
    return nullptr;
  }

  std::vector<ParamEntry> entries_;
};

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {"fig2a",   "fig2b",    "chevron",    "selectivity",
                                                 "protocol", "iswap-tomo", "rb", "leakage"};
  return names;
}

namespace detail {

// Shared device values; each scenario picks its own working frequencies.
inline std::vector<ParamEntry> system_entries(double f_r, double f_q, bool with_f_r = true, bool with_f_2 = true) {
  std::vector<ParamEntry> out;
  if (with_f_r) out.push_back({"system.f_r_ghz", std::to_string(f_r), "resonator frequency"});
  out.push_back({"system.f_1_ghz", std::to_string(f_q), "atom 1 frequency"});
  if (with_f_2) out.push_back({"system.f_2_ghz", std::to_string(f_q), "atom 2 frequency"});
  out.push_back({"system.alpha_1_ghz", "0.3", "atom 1 anharmonicity (signed)"});
  out.push_back({"system.alpha_2_ghz", "0.3", "atom 2 anharmonicity (signed)"});
  out.push_back({"system.g_1_ghz", "0.08", "atom 1 - resonator coupling"});
  out.push_back({"system.g_2_ghz", "0.08", "atom 2 - resonator coupling"});
  out.push_back({"system.g_p_ghz", "0.004", "direct atom-atom (parasitic) coupling"});
  out.push_back({"system.dim_atom", "5", "levels kept per atom"});
  out.push_back({"system.dim_resonator", "5", "levels kept in the resonator"});
  return out;
}

inline void append(std::vector<ParamEntry>& a, std::vector<ParamEntry> b) {
  for (auto& e : b) a.push_back(std::move(e));
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace detail

inline ParamSet scenario_defaults(const std::string& name) {
  using detail::append;
  std::vector<ParamEntry> e;
  if (name == "fig2a") {
    e = detail::system_entries(6.0, 3.0);
    append(e, {{"fig2a.window_factor", "2.5", "window as a multiple of the slower swap time"},
               {"fig2a.samples", "1001", "time samples"}});
  } else if (name == "fig2b") {
    e = detail::system_entries(6.0, 3.0, true, false);
    append(e, {{"fig2b.kappa_min", "0", "smallest kappa = (f_2 - f_1) / |g_p|"},
               {"fig2b.kappa_max", "50", "largest kappa"},
               {"fig2b.kappa_points", "101", "kappa samples"},
               {"fig2b.window_factor", "10", "window in units of the degenerate swap time"},
               {"fig2b.time_points", "201", "time samples per kappa"}});
  } else if (name == "chevron") {
    e = detail::system_entries(6.0, 3.0, true, false);
    append(e, {{"chevron.f_r_points", "101", "resonator frequency rows"},
               {"chevron.f_r_step_ghz", "0.025", "row spacing"},
               {"chevron.f_r_offset_ghz", "-1.0", "first row relative to the idle frequency"},
               {"chevron.time_points", "201", "time samples"},
               {"chevron.window_factor", "10", "window in units of the swap time at system.f_r_ghz"}});
  } else if (name == "selectivity") {
    e = detail::system_entries(5.19, 6.617, true, false);
    append(e, {{"selectivity.kappa_min", "-25", "smallest kappa"},
               {"selectivity.kappa_max", "25", "largest kappa"},
               {"selectivity.kappa_points", "21", "kappa samples"},
               {"selectivity.samples", "201", "time samples per pulse"},
               {"drive.amplitude_ghz", "0.1", "drive amplitude eps_0"},
               {"drive.ramp_ns", "1", "cosine ramp time"},
               {"integrator.steps_per_period", "100", "RK4 steps per period of the fastest frequency"}});
  } else if (name == "protocol") {
    e = detail::system_entries(8.22, 6.617, false, false);
    append(e, {{"protocol.detuning_ghz", "-0.1", "f_2 - f_1 during preparation"},
               {"protocol.wait_ns", "100", "waiting stage duration"},
               {"protocol.final_rabi_cycles", "1", "final stage length in Rabi periods"},
               {"protocol.samples_per_segment", "201", "time samples per stage"},
               {"protocol.calibration_points", "11", "pi-pulse scan points"},
               {"protocol.calibration_span", "0.05", "relative half-width of the pi-pulse scan"},
               {"drive.amplitude_ghz", "0.1", "drive amplitude eps_0"},
               {"drive.ramp_ns", "1", "cosine ramp time"},
               {"integrator.steps_per_period", "100", "RK4 steps per period of the fastest frequency"}});
  } else if (name == "iswap-tomo") {
    e = detail::system_entries(5.19, 6.617);
    append(e, {{"gate.frame", "dressed", "qubit subspace frame: dressed or bare"}});
  } else if (name == "rb") {
    e = detail::system_entries(5.19, 6.617);
    append(e, {{"gate.frame", "dressed", "qubit subspace frame: dressed or bare"},
               {"rb.n_max", "50", "longest circuit"},
               {"rb.realizations", "100", "random circuits per length"}});
  } else if (name == "leakage") {
    e = detail::system_entries(5.19, 6.617);
    append(e, {{"gate.frame", "dressed", "qubit subspace frame: dressed or bare"},
               {"leakage.alphas_ghz", "0.1,0.2,0.3", "anharmonicities swept (applied to both atoms)"},
               {"leakage.n_max", "30", "longest circuit"},
               {"leakage.realizations", "100", "random circuits per length"}});
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  for (ParamEntry& x : e) {
    double v = 0.0;
    if (parse_number(x.value, v)) x.value = detail::fmt(v);
  }
  return ParamSet(std::move(e));
}

/// Parameter table of the `calc` command: the device keys only.
inline ParamSet calc_defaults() {
  std::vector<ParamEntry> e = detail::system_entries(5.19, 6.617);
  for (ParamEntry& x : e) {
    double v = 0.0;
    if (parse_number(x.value, v)) x.value = detail::fmt(v);
  }
  return ParamSet(std::move(e));
}

/// Apply the paper-scale statistics to an rb/leakage table.
inline void apply_paper_scale(ParamSet& params) {
  if (params.contains("rb.n_max")) {
    params.set("rb.n_max", "100");
    params.set("rb.realizations", "1000");
  }
  if (params.contains("leakage.realizations")) params.set("leakage.realizations", "1000");
}

inline SystemParams system_from(const ParamSet& ps) {
  SystemParams p;
  if (ps.contains("system.f_r_ghz")) p.f_r = ps.number("system.f_r_ghz");
  p.f_1 = ps.number("system.f_1_ghz");
  p.f_2 = ps.contains("system.f_2_ghz") ? ps.number("system.f_2_ghz") : p.f_1;
  p.alpha_1 = ps.number("system.alpha_1_ghz");
  p.alpha_2 = ps.number("system.alpha_2_ghz");
  p.g_1 = ps.number("system.g_1_ghz");
  p.g_2 = ps.number("system.g_2_ghz");
  p.g_p = ps.number("system.g_p_ghz");
  p.dims = SubsystemDims::device(ps.integer("system.dim_atom"), ps.integer("system.dim_resonator"));
  p.validate();
  return p;
}

inline ProjectionFrame frame_from(const ParamSet& ps) {
  const std::string f = ps.text("gate.frame");
  if (f == "dressed") return ProjectionFrame::Dressed;
  if (f == "bare") return ProjectionFrame::Bare;
  throw ConfigError("gate.frame must be 'dressed' or 'bare', got '" + f + "'");
}

inline ordered_json system_json(const SystemParams& p) {
  return {{"f_r_ghz", p.f_r},         {"f_1_ghz", p.f_1}, {"f_2_ghz", p.f_2},         {"alpha_1_ghz", p.alpha_1},
          {"alpha_2_ghz", p.alpha_2}, {"g_1_ghz", p.g_1}, {"g_2_ghz", p.g_2},         {"g_p_ghz", p.g_p},
          {"dims", p.dims.values()}};
}

inline ordered_json effective_json(const EffectiveParams& e) {
  ordered_json j = {{"eta_1", e.eta_1},         {"eta_2", e.eta_2},         {"f_r_shift_ghz", e.f_r_shift},
                    {"f_1_shift_ghz", e.f_1_shift}, {"f_2_shift_ghz", e.f_2_shift}, {"g_eff_ghz", e.g_eff},
                    {"g_res_ghz", e.g_res}};
  j["dt_leak_ns"] = e.dt_leak ? ordered_json(*e.dt_leak) : ordered_json(nullptr);
  return j;
}

/// Closed-form quantities at one configuration and at g_p = 0.
inline ordered_json calc_results(const SystemParams& p) {
  ordered_json j;
  j["system"] = system_json(p);
  SystemParams p0 = p;
  p0.g_p = 0.0;
  for (const auto& [label, q] : {std::pair<const char*, const SystemParams*>{"configured", &p}, {"g_p_zero", &p0}}) {
    const EffectiveParams e = effective_params(*q);
    ordered_json c = effective_json(e);
    c["g_p_ghz"] = q->g_p;
    try {
      c["swap_time_ns"] = swap_time(e.g_eff);
    } catch (const DomainError&) {
      c["swap_time_ns"] = nullptr;
    }
    j[label] = c;
  }
  auto idle = [](auto&& fn) -> ordered_json {
    try {
      return fn();
    } catch (const DomainError&) {
      return nullptr;
    }
  };
  j["idle_degenerate_atom1_ghz"] = idle([&] { return idle_frequency_degenerate(p.f_1, p); });
  j["idle_degenerate_atom2_ghz"] = idle([&] { return idle_frequency_degenerate(p.f_2, p); });
  j["idle_general_ghz"] = idle([&] { return idle_frequency_general(p); });
  return j;
}

// ---------------------------------------------------------------------------
// Output bundle consumed by the CLI writers

struct LinePlot {
  std::string name;
  std::string title;
  std::string y_label;
  TimeSeries series;
  std::vector<std::string> channels;  // empty: all
  std::vector<double> vlines;
  std::optional<std::pair<double, double>> y_range;
};

struct HeatmapPlot {
  std::string name;
  std::string title;
  Grid2D grid;
  std::optional<double> hline;  // axis1 value
};

struct ScenarioOutput {
  ordered_json results = ordered_json::object();
  std::vector<std::pair<std::string, TimeSeries>> tables;
  std::vector<std::pair<std::string, Grid2D>> grids;
  std::vector<LinePlot> line_plots;
  std::vector<HeatmapPlot> heatmaps;
};

struct RunContext {
  std::uint64_t seed = 20240611;
  int workers = 1;
};

// ---------------------------------------------------------------------------
// fig2a: free swap from |1,0,0> with and without the parasitic coupling

struct SwapModelRun {
  std::string label;
  double g_p;
  double g_eff;
  double tau_pred;     // ns
  double t_first_min;  // ns
  TimeSeries series;
};

struct Fig2aResult {
  SwapModelRun g0;
  SwapModelRun gp;
};

inline SwapModelRun run_swap_model(const SystemParams& p, const std::string& label, double window_ns, std::size_t samples) {
  SwapModelRun out;
  out.label = label;
  out.g_p = p.g_p;
  out.g_eff = g_eff(p);
  out.tau_pred = swap_time(out.g_eff);
  const std::vector<double> grid = uniform_grid(0.0, window_ns, samples);
  out.series = free_evolution_populations(p, atom1_excited(p.dims), grid);
  out.t_first_min = grid[first_swap_minimum(out.series.channel("P_atom1"))];
  return out;
}

inline Fig2aResult run_fig2a(const ParamSet& ps) {
  SystemParams p = system_from(ps);
  SystemParams p0 = p;
  p0.g_p = 0.0;
  const double tau_max = std::max(swap_time(g_eff(p0)), swap_time(g_eff(p)));
  const double window = ps.number("fig2a.window_factor") * tau_max;
  const auto samples = static_cast<std::size_t>(ps.integer("fig2a.samples"));
  return {run_swap_model(p0, "g=0", window, samples), run_swap_model(p, "g!=0", window, samples)};
}

inline ScenarioOutput fig2a_output(const ParamSet& ps, const Fig2aResult& r) {
  ScenarioOutput out;
  out.results["system"] = system_json(system_from(ps));
  for (const SwapModelRun* m : {&r.g0, &r.gp}) {
    out.results["models"].push_back({{"label", m->label},
                                     {"g_p_ghz", m->g_p},
                                     {"g_eff_ghz", m->g_eff},
                                     {"swap_time_ns", m->tau_pred},
                                     {"first_minimum_ns", m->t_first_min},
                                     {"relative_offset", (m->t_first_min - m->tau_pred) / m->tau_pred}});
  }
  out.results["swap_time_difference_ns"] = r.gp.tau_pred - r.g0.tau_pred;
  TimeSeries ts;
  ts.times = r.g0.series.times;
  ts.add("P_atom1_g0", r.g0.series.channel("P_atom1"));
  ts.add("P_atom1_gp", r.gp.series.channel("P_atom1"));
  out.tables.emplace_back("fig2a_populations", ts);
  out.line_plots.push_back({"fig2a", "Atom 1 population", "P_atom1", ts, {}, {r.g0.tau_pred, r.gp.tau_pred}, {{0.0, 1.0}}});
  return out;
}

// ---------------------------------------------------------------------------
// fig2b: kappa sweep

struct Fig2bResult {
  double window_ns;
  double g_eff_degenerate;
  std::vector<KappaPoint> points;
};

inline Fig2bResult run_fig2b(const ParamSet& ps, const RunContext& ctx) {
  const SystemParams p = system_from(ps);
  Fig2bResult out;
  out.g_eff_degenerate = g_eff(p);
  out.window_ns = ps.number("fig2b.window_factor") * swap_time(out.g_eff_degenerate);
  const auto n = static_cast<std::size_t>(ps.integer("fig2b.kappa_points"));
  std::vector<double> kappas = n >= 2 ? uniform_grid(ps.number("fig2b.kappa_min"), ps.number("fig2b.kappa_max"), n)
                                      : std::vector<double>{ps.number("fig2b.kappa_min")};
  out.points = kappa_sweep(p, kappas, out.window_ns, static_cast<std::size_t>(ps.integer("fig2b.time_points")),
                           ctx.workers);
  return out;
}

inline ScenarioOutput fig2b_output(const ParamSet& ps, const Fig2bResult& r) {
  ScenarioOutput out;
  out.results["system"] = system_json(system_from(ps));
  out.results["g_eff_degenerate_ghz"] = r.g_eff_degenerate;
  out.results["window_ns"] = r.window_ns;
  // g_leak read as |g_eff|: detuning of 10 |g_eff| in kappa units
  out.results["kappa_trapping_estimate"] = 10.0 * std::abs(r.g_eff_degenerate) / std::abs(system_from(ps).g_p);
  TimeSeries ts;
  ts.axis_name = "kappa";
  std::vector<double> a, b, c;
  for (const KappaPoint& k : r.points) {
    ts.times.push_back(k.kappa);
    a.push_back(k.p1_min);
    b.push_back(k.p2_max);
    c.push_back(k.pres_max);
  }
  ts.add("P1_min", a);
  ts.add("P2_max", b);
  ts.add("Pres_max", c);
  out.tables.emplace_back("fig2b_kappa", ts);
  if (ts.times.size() >= 2) out.line_plots.push_back({"fig2b", "Population extrema vs kappa", "population", ts, {}, {}, {{0.0, 1.0}}});
  return out;
}

// ---------------------------------------------------------------------------
// chevron

struct ChevronScenarioResult {
  double f_idle;
  std::size_t idle_row;
  double window_ns;
  double tau_ref;
  ChevronResult maps;
  double idle_max_transfer;  // max P_atom2 along the idle row
};

inline ChevronScenarioResult run_chevron(const ParamSet& ps, const RunContext& ctx) {
  const SystemParams p = system_from(ps);
  ChevronScenarioResult out;
  out.f_idle = idle_frequency_degenerate(p.f_1, p);
  out.tau_ref = swap_time(g_eff(p));
  out.window_ns = ps.number("chevron.window_factor") * out.tau_ref;
  const int rows = ps.integer("chevron.f_r_points");
  if (rows < 1) throw ConfigError("chevron.f_r_points must be >= 1");
  const double step = ps.number("chevron.f_r_step_ghz");
  const double offset = ps.number("chevron.f_r_offset_ghz");
  std::vector<double> f_grid;
  for (int i = 0; i < rows; ++i) f_grid.push_back(out.f_idle + offset + step * i);
  // row nearest the idle frequency (exact when offset is a multiple of step)
  out.idle_row = 0;
  for (std::size_t i = 0; i < f_grid.size(); ++i) {
    if (std::abs(f_grid[i] - out.f_idle) < std::abs(f_grid[out.idle_row] - out.f_idle)) out.idle_row = i;
  }
  f_grid[out.idle_row] = out.f_idle;
  const std::vector<double> t_grid =
      uniform_grid(0.0, out.window_ns, static_cast<std::size_t>(ps.integer("chevron.time_points")));
  out.maps = chevron_sweep(p, f_grid, t_grid, ctx.workers);
  out.idle_max_transfer = 0.0;
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    out.idle_max_transfer = std::max(out.idle_max_transfer, out.maps.p_atom2.at(out.idle_row, j));
  }
  return out;
}

inline ScenarioOutput chevron_output(const ParamSet& ps, const ChevronScenarioResult& r) {
  ScenarioOutput out;
  out.results["system"] = system_json(system_from(ps));
  out.results["idle_frequency_ghz"] = r.f_idle;
  out.results["reference_swap_time_ns"] = r.tau_ref;
  out.results["window_ns"] = r.window_ns;
  out.results["idle_row_max_transfer"] = r.idle_max_transfer;
  out.grids.emplace_back("chevron_P_atom1", r.maps.p_atom1);
  out.grids.emplace_back("chevron_P_atom2", r.maps.p_atom2);
  out.heatmaps.push_back({"chevron", "Atom 1 population", r.maps.p_atom1, r.f_idle});
  return out;
}

// ---------------------------------------------------------------------------
// selectivity

struct SelectivityResult {
  double kappa;
  double S;
  double P_add_max;
  double P_spe_max;
  std::string configuration;
};

inline double selectivity(double p_add, double p_spe) {
  const double den = p_add + p_spe;
  if (den == 0.0) throw DomainError("selectivity: both populations are zero");
  return (p_add - p_spe) / den;
}

struct PiPulse {
  DriveTone tone;
  double rabi;      // |Omega_1|, GHz
  double duration;  // total pulse length, ns
};

/// Resonant with the shifted atom-1 frequency; hold chosen so the pulse area
/// equals that of an ideal square pi pulse 1 / (4 |Omega_1|).
inline PiPulse pi_pulse_for_atom1(const SystemParams& p, double eps0, double ramp, double t_start = 0.0,
                                  double scale = 1.0) {
  const EffectiveParams eff = effective_params(p);
  DriveTone probe;
  probe.f_d = eff.f_1_shift;
  probe.envelope = Envelope::constant(eps0);
  const double rabi = std::abs(resultant_phasor(p, {probe}, 0.0).atom1.omega);
  if (!(rabi > 0.0)) throw DomainError("pi_pulse_for_atom1: zero Rabi frequency");
  const double t_pi = scale / (4.0 * rabi);
  if (t_pi <= ramp) throw DomainError("pi_pulse_for_atom1: ramp longer than the pi pulse");
  PiPulse out;
  out.tone.f_d = eff.f_1_shift;
  out.tone.envelope = Envelope::flat_top(eps0, ramp, t_pi - ramp, t_start);
  out.rabi = rabi;
  out.duration = out.tone.envelope.t_stop() - t_start;
  return out;
}

inline SelectivityResult selectivity_point(const SystemParams& p, double kappa, const std::string& label, double eps0,
                                           double ramp, std::size_t samples, const IntegratorOptions& opts) {
  const PiPulse pulse = pi_pulse_for_atom1(p, eps0, ramp);
  const DrivenHamiltonian h = lab_hamiltonian(p, {pulse.tone}, pulse.tone.f_d);
  const TimeSeries ts = population_series(
      integrate_state(h, StateVector::basis(p.dims, {0, 0, 0}), uniform_grid(0.0, pulse.duration, samples), opts));
  const auto& a = ts.channel("P_atom1");
  const auto& b = ts.channel("P_atom2");
  SelectivityResult r;
  r.kappa = kappa;
  r.P_add_max = *std::max_element(a.begin(), a.end());
  r.P_spe_max = *std::max_element(b.begin(), b.end());
  r.S = selectivity(r.P_add_max, r.P_spe_max);
  r.configuration = label;
  return r;
}

struct SelectivityConfig {
  std::string label;
  double g_p;
  bool idle;
};

inline std::vector<SelectivityConfig> selectivity_configs(double g_p) {
  return {{"g=0", 0.0, false}, {"g!=0", g_p, false}, {"idle", g_p, true}};
}

/// kappa counts detuning f_2 - f_1 in units of the configured |g_p| for every
/// configuration, including g = 0.
inline std::vector<SelectivityResult> run_selectivity(const ParamSet& ps, const RunContext& ctx) {
  const SystemParams base = system_from(ps);
  const double unit = std::abs(base.g_p);
  if (!(unit > 0.0)) throw ConfigError("selectivity: system.g_p_ghz sets the kappa unit and must be non-zero");
  const auto n = static_cast<std::size_t>(ps.integer("selectivity.kappa_points"));
  const std::vector<double> kappas =
      n >= 2 ? uniform_grid(ps.number("selectivity.kappa_min"), ps.number("selectivity.kappa_max"), n)
             : std::vector<double>{ps.number("selectivity.kappa_min")};
  const double eps0 = ps.number("drive.amplitude_ghz");
  const double ramp = ps.number("drive.ramp_ns");
  const auto samples = static_cast<std::size_t>(ps.integer("selectivity.samples"));
  IntegratorOptions opts;
  opts.steps_per_period = ps.number("integrator.steps_per_period");
  const auto configs = selectivity_configs(base.g_p);
  std::vector<SelectivityResult> out(configs.size() * kappas.size());
  parallel_for(out.size(), ctx.workers, [&](std::size_t job) {
    const SelectivityConfig& c = configs[job / kappas.size()];
    const double kappa = kappas[job % kappas.size()];
    SystemParams p = base;
    p.g_p = c.g_p;
    p.f_2 = p.f_1 + kappa * unit;
    if (c.idle) p.f_r = idle_frequency_general(p);
    out[job] = selectivity_point(p, kappa, c.label, eps0, ramp, samples, opts);
  });
  return out;
}

inline ScenarioOutput selectivity_output(const ParamSet& ps, const std::vector<SelectivityResult>& rs) {
  ScenarioOutput out;
  out.results["system"] = system_json(system_from(ps));
  for (const auto& c : selectivity_configs(system_from(ps).g_p)) {
    TimeSeries ts;
    ts.axis_name = "kappa";
    std::vector<double> s, pa, pb;
    ordered_json rows = ordered_json::array();
    for (const SelectivityResult& r : rs) {
      if (r.configuration != c.label) continue;
      ts.times.push_back(r.kappa);
      s.push_back(r.S);
      pa.push_back(r.P_add_max);
      pb.push_back(r.P_spe_max);
      rows.push_back({{"kappa", r.kappa}, {"S", r.S}, {"P_add_max", r.P_add_max}, {"P_spe_max", r.P_spe_max}});
    }
    ts.add("S", s);
    ts.add("P_add_max", pa);
    ts.add("P_spe_max", pb);
    out.results["configurations"][c.label] = rows;
    std::string stem = c.label == "g=0" ? "g0" : (c.label == "g!=0" ? "gp" : "idle");
    out.tables.emplace_back("selectivity_" + stem, ts);
    if (ts.times.size() >= 2) {
      out.line_plots.push_back({"selectivity_" + stem, "Selectivity (" + c.label + ")", "S", ts, {"S"}, {}, {{-1.0, 1.0}}});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// protocol: prepare |10>, wait at the idle point, drive both atoms

struct ProtocolResult {
  SystemParams prep;
  SystemParams wait;
  PiPulse prep_pulse;
  DriveTone final_tone;
  double final_rabi;
  double calibration_scale;
  ScheduleRun run;
  TimeSeries series;  // simulated and analytic channels
  double prep_final_population;
  double wait_drift;
  double prep_max_deviation;
  double final_max_deviation;
  double max_step_drift;
};

inline double joint_population(const StateVector& psi, int n1_excited, int n2_excited) {
  return population_where(psi, [&](const std::vector<int>& occ) {
    return (occ[kAtom1] >= 1) == (n1_excited == 1) && (occ[kAtom2] >= 1) == (n2_excited == 1);
  });
}

inline ProtocolResult run_protocol(const ParamSet& ps) {
  const SystemParams base = system_from(ps);
  ProtocolResult out;
  out.prep = base;
  out.prep.f_2 = base.f_1 + ps.number("protocol.detuning_ghz");
  out.prep.f_r = idle_frequency_general(out.prep);
  out.wait = base;
  out.wait.f_2 = base.f_1;
  out.wait.f_r = idle_frequency_degenerate(base.f_1, out.wait);

  const double eps0 = ps.number("drive.amplitude_ghz");
  const double ramp = ps.number("drive.ramp_ns");
  const auto samples = static_cast<std::size_t>(ps.integer("protocol.samples_per_segment"));
  IntegratorOptions opts;
  opts.steps_per_period = ps.number("integrator.steps_per_period");
  const StateVector ground = StateVector::basis(base.dims, {0, 0, 0});

  // pi-pulse refinement: scan the area around the analytic value
  const int points = ps.integer("protocol.calibration_points");
  const double span = ps.number("protocol.calibration_span");
  out.calibration_scale = 1.0;
  double best = -1.0;
  for (int i = 0; i < points; ++i) {
    const double scale = points > 1 ? 1.0 - span + 2.0 * span * i / (points - 1) : 1.0;
    const PiPulse pulse = pi_pulse_for_atom1(out.prep, eps0, ramp, 0.0, scale);
    const DrivenHamiltonian h = lab_hamiltonian(out.prep, {pulse.tone}, pulse.tone.f_d);
    const Trajectory tr = integrate_state(h, ground, {0.0, pulse.duration}, opts);
    const double pop = excited_population(tr.final_state(), kAtom1);
    if (pop > best) {
      best = pop;
      out.calibration_scale = scale;
    }
  }
  out.prep_pulse = pi_pulse_for_atom1(out.prep, eps0, ramp, 0.0, out.calibration_scale);
  const double t_prep = out.prep_pulse.duration;
  const double t_wait = ps.number("protocol.wait_ns");

  const EffectiveParams eff_wait = effective_params(out.wait);
  DriveTone probe;
  probe.f_d = eff_wait.f_1_shift;
  probe.envelope = Envelope::constant(eps0);
  out.final_rabi = std::abs(resultant_phasor(out.wait, {probe}, 0.0).atom1.omega);
  const double hold = ps.number("protocol.final_rabi_cycles") / out.final_rabi - ramp;
  if (hold < 0.0) throw ConfigError("protocol: final stage shorter than the ramps");
  out.final_tone.f_d = eff_wait.f_1_shift;
  out.final_tone.envelope = Envelope::flat_top(eps0, ramp, hold, t_prep + t_wait);
  const double t_final = out.final_tone.envelope.t_stop() - (t_prep + t_wait);

  Schedule sched;
  sched.segments.push_back({"prep", t_prep, out.prep, {out.prep_pulse.tone}});
  sched.segments.push_back({"wait", t_wait, out.wait, {}});
  sched.segments.push_back({"drive", t_final, out.wait, {out.final_tone}});
  out.run = integrate_schedule(sched, ground, samples, out.prep_pulse.tone.f_d, opts);
  out.max_step_drift = out.run.trajectory.stats.max_step_drift;

  const Trajectory& tr = out.run.trajectory;
  const std::size_t n = tr.times.size();
  std::vector<double> p1(n), p2(n), p10(n), p01(n), a1(n), a2(n), a10(n), a01(n), stage(n);
  const double rabi_prep_signed = rabi_rate(out.prep, kAtom1, out.prep_pulse.tone, out.prep_pulse.tone.envelope.t_start() + ramp);
  const double rabi_fin_signed = rabi_rate(out.wait, kAtom1, out.final_tone, out.final_tone.envelope.t_start() + ramp);
  const double k_prep = rabi_prep_signed / eps0;  // Omega per unit drive amplitude
  const double k_fin = rabi_fin_signed / eps0;
  out.prep_max_deviation = 0.0;
  out.final_max_deviation = 0.0;
  out.wait_drift = 0.0;
  double p1_wait_start = 0.0, p2_wait_start = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const StateVector& psi = tr.states[i];
    const double t = tr.times[i];
    p1[i] = excited_population(psi, kAtom1);
    p2[i] = excited_population(psi, kAtom2);
    p10[i] = joint_population(psi, 1, 0);
    p01[i] = joint_population(psi, 0, 1);
    const std::size_t seg = out.run.segment_of_sample[i];
    stage[i] = static_cast<double>(seg);
    if (seg == 0) {
      const double theta = kTwoPi * k_prep * out.prep_pulse.tone.envelope.area_until(t);
      a1[i] = std::pow(std::sin(theta), 2);
      a2[i] = 0.0;
      a10[i] = a1[i];
      a01[i] = 0.0;
      out.prep_max_deviation = std::max(out.prep_max_deviation, std::abs(p1[i] - a1[i]));
      p1_wait_start = p1[i];
      p2_wait_start = p2[i];
    } else if (seg == 1) {
      a1[i] = 1.0;
      a2[i] = 0.0;
      a10[i] = 1.0;
      a01[i] = 0.0;
      out.wait_drift = std::max({out.wait_drift, std::abs(p1[i] - p1_wait_start), std::abs(p2[i] - p2_wait_start)});
    } else {
      const double theta = kTwoPi * k_fin * out.final_tone.envelope.area_until(t);
      const double c2 = std::pow(std::cos(theta), 2);
      const double s2 = std::pow(std::sin(theta), 2);
      a1[i] = c2;
      a2[i] = s2;
      a10[i] = c2 * c2;
      a01[i] = s2 * s2;
      out.final_max_deviation =
          std::max({out.final_max_deviation, std::abs(p10[i] - a10[i]), std::abs(p01[i] - a01[i])});
    }
  }
  out.prep_final_population = p1_wait_start;
  out.series.times = tr.times;
  out.series.add("stage", stage);
  out.series.add("P_atom1", p1);
  out.series.add("P_atom2", p2);
  out.series.add("P_10_joint", p10);
  out.series.add("P_01_joint", p01);
  out.series.add("analytic_P_atom1", a1);
  out.series.add("analytic_P_atom2", a2);
  out.series.add("analytic_P_10_cos4", a10);
  out.series.add("analytic_P_01_sin4", a01);
  return out;
}

inline ScenarioOutput protocol_output(const ParamSet& ps, const ProtocolResult& r) {
  (void)ps;
  ScenarioOutput out;
  out.results["prep_system"] = system_json(r.prep);
  out.results["wait_system"] = system_json(r.wait);
  out.results["idle_prep_ghz"] = r.prep.f_r;
  out.results["idle_wait_ghz"] = r.wait.f_r;
  out.results["prep_drive_ghz"] = r.prep_pulse.tone.f_d;
  out.results["prep_rabi_ghz"] = r.prep_pulse.rabi;
  out.results["prep_duration_ns"] = r.prep_pulse.duration;
  out.results["calibration_scale"] = r.calibration_scale;
  out.results["final_drive_ghz"] = r.final_tone.f_d;
  out.results["final_rabi_ghz"] = r.final_rabi;
  out.results["segment_boundaries_ns"] = r.run.boundaries;
  out.results["prep_final_population"] = r.prep_final_population;
  out.results["prep_max_deviation"] = r.prep_max_deviation;
  out.results["wait_drift"] = r.wait_drift;
  out.results["final_max_deviation"] = r.final_max_deviation;
  out.results["max_step_norm_drift"] = r.max_step_drift;
  out.tables.emplace_back("protocol", r.series);
  std::vector<double> lines(r.run.boundaries.begin(), r.run.boundaries.end() - 1);
  out.line_plots.push_back({"protocol", "Simultaneous control protocol", "population", r.series,
                            {"P_10_joint", "P_01_joint", "analytic_P_10_cos4", "analytic_P_01_sin4"}, lines, {{0.0, 1.0}}});
  return out;
}

// ---------------------------------------------------------------------------
// iswap-tomo

struct TomoCase {
  std::string label;
  IswapGate gate;
  ChiMatrix chi;
  double fidelity;
};

struct TomoResult {
  ChiMatrix ideal;
  TomoCase g0;
  TomoCase gp;
};

inline TomoCase tomo_case(const SystemParams& p, const std::string& label, ProjectionFrame frame, const Matrix16& ideal) {
  TomoCase c;
  c.label = label;
  c.gate = build_iswap_gate(p, frame);
  c.chi = chi_tomography(unitary_channel(c.gate.corrected));
  c.fidelity = process_fidelity(ideal, c.chi.chi);
  return c;
}

inline TomoResult run_iswap_tomo(const ParamSet& ps) {
  const SystemParams p = system_from(ps);
  SystemParams p0 = p;
  p0.g_p = 0.0;
  const ProjectionFrame frame = frame_from(ps);
  TomoResult r;
  r.ideal = chi_tomography(unitary_channel(iswap_dagger_ideal()));
  r.g0 = tomo_case(p0, "g=0", frame, r.ideal.chi);
  r.gp = tomo_case(p, "g!=0", frame, r.ideal.chi);
  return r;
}

inline ordered_json chi_json(const ChiMatrix& c) {
  ordered_json re = ordered_json::array(), im = ordered_json::array();
  for (int m = 0; m < 16; ++m) {
    ordered_json rr = ordered_json::array(), ii = ordered_json::array();
    for (int n = 0; n < 16; ++n) {
      rr.push_back(c.chi(m, n).real());
      ii.push_back(c.chi(m, n).imag());
    }
    re.push_back(rr);
    im.push_back(ii);
  }
  ordered_json labels = ordered_json::array();
  for (int m = 0; m < 16; ++m) labels.push_back(pauli_label(m));
  return {{"basis", labels},          {"real", re},
          {"imag", im},               {"trace", c.trace()},
          {"min_eigenvalue", c.min_eigenvalue}, {"nonphysical", c.nonphysical}};
}

inline Grid2D chi_grid(const ChiMatrix& c, const std::string& name) {
  Grid2D g;
  g.axis1_name = "row";
  g.axis2_name = "col";
  g.value_name = name;
  for (int m = 0; m < 16; ++m) {
    g.axis1.push_back(m);
    g.axis2.push_back(m);
  }
  for (int m = 0; m < 16; ++m) {
    for (int n = 0; n < 16; ++n) g.values.push_back(std::abs(c.chi(m, n)));
  }
  return g;
}

inline ScenarioOutput iswap_tomo_output(const ParamSet& ps, const TomoResult& r) {
  ScenarioOutput out;
  out.results["system"] = system_json(system_from(ps));
  out.results["frame"] = ps.text("gate.frame");
  out.results["chi_ideal"] = chi_json(r.ideal);
  for (const TomoCase* c : {&r.g0, &r.gp}) {
    ordered_json j;
    j["label"] = c->label;
    j["effective"] = effective_json(c->gate.eff);
    j["swap_time_ns"] = c->gate.tau;
    j["process_fidelity"] = c->fidelity;
    j["subspace_defect"] = c->gate.defect;
    j["chi"] = chi_json(c->chi);
    out.results["cases"].push_back(j);
  }
  out.grids.emplace_back("chi_ideal_abs", chi_grid(r.ideal, "abs_chi"));
  out.grids.emplace_back("chi_g0_abs", chi_grid(r.g0.chi, "abs_chi"));
  out.grids.emplace_back("chi_gp_abs", chi_grid(r.gp.chi, "abs_chi"));
  out.heatmaps.push_back({"chi_ideal", "|chi| ideal", chi_grid(r.ideal, "abs_chi"), std::nullopt});
  out.heatmaps.push_back({"chi_g0", "|chi| g=0", chi_grid(r.g0.chi, "abs_chi"), std::nullopt});
  out.heatmaps.push_back({"chi_gp", "|chi| g!=0", chi_grid(r.gp.chi, "abs_chi"), std::nullopt});
  return out;
}

// ---------------------------------------------------------------------------
// rb

struct RBPair {
  IswapGate gate_g0;
  IswapGate gate_gp;
  RBResult g0;
  RBResult gp;
};

inline RBPair run_rb(const ParamSet& ps, const RunContext& ctx) {
  const SystemParams p = system_from(ps);
  SystemParams p0 = p;
  p0.g_p = 0.0;
  const ProjectionFrame frame = frame_from(ps);
  RBConfig cfg;
  cfg.n_max = ps.integer("rb.n_max");
  cfg.realizations = ps.integer("rb.realizations");
  cfg.seed = ctx.seed;
  cfg.workers = ctx.workers;
  RBPair r;
  r.gate_g0 = build_iswap_gate(p0, frame);
  r.gate_gp = build_iswap_gate(p, frame);
  r.g0 = rb_run(r.gate_g0.corrected_full, cfg);
  r.gp = rb_run(r.gate_gp.corrected_full, cfg);
  return r;
}

inline ordered_json rb_json(const RBResult& r, const IswapGate& g) {
  return {{"swap_time_ns", g.tau},           {"f_bar", r.f_bar},
          {"f_bar_uncertainty", r.f_bar_err}, {"realizations", r.realizations},
          {"seed", r.seed},                  {"n_max", r.counts.back()},
          {"max_abs_fit_residual", r.fit_residuals.empty() ? 0.0 : std::abs(*std::max_element(
                                       r.fit_residuals.begin(), r.fit_residuals.end(),
                                       [](double a, double b) { return std::abs(a) < std::abs(b); }))}};
}

inline ScenarioOutput rb_output(const ParamSet& ps, const RBPair& r) {
  ScenarioOutput out;
  out.results["system"] = system_json(system_from(ps));
  out.results["frame"] = ps.text("gate.frame");
  out.results["g0"] = rb_json(r.g0, r.gate_g0);
  out.results["gp"] = rb_json(r.gp, r.gate_gp);
  TimeSeries ts;
  ts.axis_name = "n_gates";
  for (int n : r.g0.counts) ts.times.push_back(n);
  ts.add("F_g0", r.g0.mean_fidelity);
  ts.add("F_g0_stderr", r.g0.std_error);
  ts.add("F_gp", r.gp.mean_fidelity);
  ts.add("F_gp_stderr", r.gp.std_error);
  std::vector<double> fit0, fitp;
  for (double n : ts.times) {
    fit0.push_back(std::pow(r.g0.f_bar, n));
    fitp.push_back(std::pow(r.gp.f_bar, n));
  }
  ts.add("fit_g0", fit0);
  ts.add("fit_gp", fitp);
  out.tables.emplace_back("rb_decay", ts);
  out.line_plots.push_back({"rb", "Randomized benchmarking", "fidelity", ts, {"F_g0", "F_gp", "fit_g0", "fit_gp"}, {}, std::nullopt});
  return out;
}

// ---------------------------------------------------------------------------
// leakage

struct LeakageResult {
  std::vector<double> alphas;
  std::vector<RBResult> runs;  // one per alpha
};

inline LeakageResult run_leakage(const ParamSet& ps, const RunContext& ctx) {
  const SystemParams base = system_from(ps);
  if (base.dims[kAtom1] < 4 || base.dims[kAtom2] < 4) throw ConfigError("leakage: atoms need at least 4 levels");
  const ProjectionFrame frame = frame_from(ps);
  RBConfig cfg;
  cfg.n_max = ps.integer("leakage.n_max");
  cfg.realizations = ps.integer("leakage.realizations");
  cfg.seed = ctx.seed;
  cfg.workers = ctx.workers;
  LeakageResult r;
  r.alphas = ps.list("leakage.alphas_ghz");
  for (double a : r.alphas) {
    SystemParams p = base;
    p.alpha_1 = a;
    p.alpha_2 = a;
    r.runs.push_back(rb_run(build_iswap_gate(p, frame).corrected_full, cfg));
  }
  return r;
}

inline ScenarioOutput leakage_output(const ParamSet& ps, const LeakageResult& r) {
  ScenarioOutput out;
  out.results["system"] = system_json(system_from(ps));
  out.results["frame"] = ps.text("gate.frame");
  TimeSeries ts;
  ts.axis_name = "n_gates";
  for (int n : r.runs.front().counts) ts.times.push_back(n);
  for (std::size_t i = 0; i < r.alphas.size(); ++i) {
    const std::string name = "P_leak_alpha_" + detail::fmt(r.alphas[i]);
    ts.add(name, r.runs[i].mean_leakage);
    out.results["final_leakage"].push_back({{"alpha_ghz", r.alphas[i]}, {"leakage", r.runs[i].mean_leakage.back()}});
  }
  out.tables.emplace_back("leakage", ts);
  out.line_plots.push_back({"leakage", "Leakage vs circuit length", "P_leak", ts, {}, {}, std::nullopt});
  return out;
}

// ---------------------------------------------------------------------------

inline ScenarioOutput run_scenario(const std::string& name, const ParamSet& ps, const RunContext& ctx) {
  if (name == "fig2a") return fig2a_output(ps, run_fig2a(ps));
  if (name == "fig2b") return fig2b_output(ps, run_fig2b(ps, ctx));
  if (name == "chevron") return chevron_output(ps, run_chevron(ps, ctx));
  if (name == "selectivity") return selectivity_output(ps, run_selectivity(ps, ctx));
  if (name == "protocol") return protocol_output(ps, run_protocol(ps));
  if (name == "iswap-tomo") return iswap_tomo_output(ps, run_iswap_tomo(ps));
  if (name == "rb") return rb_output(ps, run_rb(ps, ctx));
  if (name == "leakage") return leakage_output(ps, run_leakage(ps, ctx));
  throw ConfigError("unknown scenario '" + name + "'");
}

}  // namespace cqed
