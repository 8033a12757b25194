#pragma once

// Time integration (fixed-step RK4 with renormalization), the displaced-frame
// xi(t) solver, piecewise schedules and the sweep engines.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cqed/errors.hpp"
#include "cqed/fockalg.hpp"
#include "cqed/model.hpp"

namespace cqed {

// ---------------------------------------------------------------------------
// Containers

struct TimeSeries {
  std::string axis_name = "t_ns";
  std::vector<double> times;
  std::vector<std::pair<std::string, std::vector<double>>> channels;  // insertion order kept

  void add(std::string name, std::vector<double> values) {
    if (values.size() != times.size()) throw InvalidArgument("TimeSeries::add: channel '" + name + "' length mismatch");
    channels.emplace_back(std::move(name), std::move(values));
  }

  const std::vector<double>& channel(const std::string& name) const {
    for (const auto& [key, values] : channels) {
      if (key == name) return values;
    }
    throw InvalidArgument("TimeSeries: no channel '" + name + "'");
  }

  bool has(const std::string& name) const {
    return std::any_of(channels.begin(), channels.end(), [&](const auto& c) { return c.first == name; });
  }

  void check() const {
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (!(times[i] > times[i - 1])) throw InvalidArgument("TimeSeries: times must be strictly increasing");
    }
    for (const auto& [key, values] : channels) {
      if (values.size() != times.size()) throw InvalidArgument("TimeSeries: channel '" + key + "' length mismatch");
    }
  }
};

/// Row-major map values[i * axis2.size() + j] at (axis1[i], axis2[j]).
struct Grid2D {
  std::string axis1_name;
  std::string axis2_name;
  std::string value_name;
  std::vector<double> axis1;
  std::vector<double> axis2;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values.at(i * axis2.size() + j); }
};

struct XiTrajectory {
  std::vector<double> times;
  std::vector<cplx> xi;
};

inline std::vector<double> uniform_grid(double t0, double t1, std::size_t n) {
  if (n < 2) throw InvalidArgument("uniform_grid: need at least two points");
  if (!(t1 > t0)) throw InvalidArgument("uniform_grid: t1 must exceed t0");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n - 1);
  out.back() = t1;
  return out;
}

// ---------------------------------------------------------------------------
// Parallel helper: jobs are independent, results go into preallocated slots.

inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& job) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  const auto count = static_cast<std::size_t>(workers) < n ? static_cast<std::size_t>(workers) : n;
  std::vector<std::thread> pool;
  pool.reserve(count);
  for (std::size_t w = 0; w < count; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// RK4

struct IntegratorOptions {
  double dt = 0.0;               // ns; 0 selects 1 / (steps_per_period * f_max)
  double steps_per_period = 100; // default resolution of the fastest frequency
  bool renormalize = true;
};

inline constexpr double kMaxStepFraction = 1.0 / 50.0;  // dt <= 1 / (50 f_max)
inline constexpr double kStepDriftLimit = 1e-4;

/// Propagators must be accurate on every level, not only the occupied ones:
/// 400 steps per period keeps ||U^dagger U - 1|| near 1e-9 per 10 ns.
inline IntegratorOptions propagator_defaults() {
  IntegratorOptions o;
  o.steps_per_period = 400;
  return o;
}

struct IntegrationStats {
  double dt = 0.0;
  std::size_t steps = 0;
  double max_step_drift = 0.0;  // max | ||psi|| - 1 | after one raw step
  double total_drift = 0.0;     // sum over steps of the same quantity
  double duration = 0.0;        // ns
};

/// Adapter for a Hamiltonian given as a dense-operator function of t.
class FunctionHamiltonian {
 public:
  FunctionHamiltonian(std::function<FockOperator(double)> h, SubsystemDims dims, double frequency_scale)
      : h_(std::move(h)), dims_(std::move(dims)), f_scale_(frequency_scale) {}

  template <class In, class Out>
  void apply(double t, const In& psi, Out& out) const {
    out.noalias() = h_(t).matrix() * psi;
  }
  FockOperator at(double t) const { return h_(t); }
  double frequency_scale() const { return f_scale_; }
  Eigen::Index dim() const { return dims_.total(); }
  const SubsystemDims& dims() const { return dims_; }

 private:
  std::function<FockOperator(double)> h_;
  SubsystemDims dims_;
  double f_scale_;
};

namespace detail {

template <class Ham>
const SubsystemDims& ham_dims(const Ham& h) {
  if constexpr (requires { h.dims(); }) {
    return h.dims();
  } else {
    return h.dims;
  }
}

template <class Ham>
double step_size(const Ham& h, const IntegratorOptions& opts) {
  const double f_max = std::max(h.frequency_scale(), 1e-12);
  const double limit = kMaxStepFraction / f_max;
  if (opts.dt > 0.0) {
    if (opts.dt > limit * (1.0 + 1e-12)) {
      throw StepSizeError("RK4: dt = " + std::to_string(opts.dt) + " ns exceeds 1/(50 f_max) = " +
                          std::to_string(limit) + " ns; halve the step");
    }
    return opts.dt;
  }
  return 1.0 / (opts.steps_per_period * f_max);
}

template <class Ham, class State>
void rk4_step(const Ham& h, double t, double dt, State& y, State& k1, State& k2, State& k3, State& k4, State& tmp) {
  // y' = -i H y
  h.apply(t, y, k1);
  k1 *= -kI;
  tmp = y + (0.5 * dt) * k1;
  h.apply(t + 0.5 * dt, tmp, k2);
  k2 *= -kI;
  tmp = y + (0.5 * dt) * k2;
  h.apply(t + 0.5 * dt, tmp, k3);
  k3 *= -kI;
  tmp = y + dt * k3;
  h.apply(t + dt, tmp, k4);
  k4 *= -kI;
  y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

struct Trajectory {
  std::vector<double> times;
  std::vector<StateVector> states;
  IntegrationStats stats;

  const StateVector& final_state() const { return states.back(); }
};

/// Fixed-step RK4 on i psi' = H(t) psi, sampled at `samples` (samples[0] is t0).
template <class Ham>
Trajectory integrate_state(const Ham& h, const StateVector& psi0, const std::vector<double>& samples,
                           const IntegratorOptions& opts = {}) {
  if (samples.empty()) throw InvalidArgument("integrate_state: empty sample grid");
  if (psi0.dim() != h.dim()) throw InvalidDimension("integrate_state: state and Hamiltonian dimensions differ");
  if (std::abs(psi0.norm() - 1.0) > 1e-9) throw InvalidArgument("integrate_state: initial state not normalized");
  const double dt_max = detail::step_size(h, opts);

  Trajectory out;
  out.stats.dt = dt_max;
  out.times = samples;
  out.states.reserve(samples.size());
  out.states.push_back(psi0);

  Vector y = psi0.amplitudes();
  Vector k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()), tmp(y.size());
  for (std::size_t s = 1; s < samples.size(); ++s) {
    const double span = samples[s] - samples[s - 1];
    if (!(span > 0.0)) throw InvalidArgument("integrate_state: sample times must be strictly increasing");
    const auto n = static_cast<std::size_t>(std::ceil(span / dt_max - 1e-9));
    const double dt = span / static_cast<double>(n);
    double t = samples[s - 1];
    for (std::size_t k = 0; k < n; ++k) {
      detail::rk4_step(h, t, dt, y, k1, k2, k3, k4, tmp);
      t = samples[s - 1] + static_cast<double>(k + 1) * dt;
      const double norm = y.norm();
      const double drift = std::abs(norm - 1.0);
      if (drift > kStepDriftLimit) {
        throw StepSizeError("RK4: norm drift " + std::to_string(drift) + " in one step of " + std::to_string(dt) +
                            " ns; halve the step");
      }
      out.stats.max_step_drift = std::max(out.stats.max_step_drift, drift);
      out.stats.total_drift += drift;
      if (opts.renormalize) y /= norm;
    }
    out.stats.steps += n;
    out.states.emplace_back(y, psi0.dims());
  }
  out.stats.duration = samples.back() - samples.front();
  return out;
}

/// U(t1, t0) from RK4 on i U' = H U starting at the identity.
template <class Ham>
FockOperator integrate_propagator(const Ham& h, double t0, double t1, const IntegratorOptions& opts = propagator_defaults(),
                                  IntegrationStats* stats = nullptr) {
  if (!(t1 > t0)) throw InvalidArgument("integrate_propagator: t1 must exceed t0");
  const double dt_max = detail::step_size(h, opts);
  const auto n = static_cast<std::size_t>(std::ceil((t1 - t0) / dt_max - 1e-9));
  const double dt = (t1 - t0) / static_cast<double>(n);
  const Eigen::Index d = h.dim();
  Matrix u = Matrix::Identity(d, d);
  Matrix k1(d, d), k2(d, d), k3(d, d), k4(d, d), tmp(d, d);
  IntegrationStats st;
  st.dt = dt;
  for (std::size_t k = 0; k < n; ++k) {
    detail::rk4_step(h, t0 + static_cast<double>(k) * dt, dt, u, k1, k2, k3, k4, tmp);
    double drift = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) {
      const double norm = u.col(c).norm();
      drift = std::max(drift, std::abs(norm - 1.0));
      if (opts.renormalize) u.col(c) /= norm;
    }
    if (drift > kStepDriftLimit) throw StepSizeError("RK4 propagator: column norm drift too large; halve the step");
    st.max_step_drift = std::max(st.max_step_drift, drift);
    st.total_drift += drift;
  }
  st.steps = n;
  st.duration = t1 - t0;
  if (stats != nullptr) *stats = st;
  return {std::move(u), detail::ham_dims(h)};
}

/// Exact evolution under a constant Hamiltonian at the sample times.
inline Trajectory evolve_constant(const HermitianPropagator& prop, const StateVector& psi0,
                                  const std::vector<double>& samples) {
  Trajectory out;
  out.times = samples;
  out.states.reserve(samples.size());
  const Vector c0 = prop.eigenvectors().adjoint() * psi0.amplitudes();
  for (double t : samples) {
    Vector c = c0;
    c.array() *= (-kI * (t - samples.front()) * prop.eigenvalues().cast<cplx>()).array().exp();
    out.states.emplace_back(prop.eigenvectors() * c, psi0.dims());
  }
  out.stats.duration = samples.empty() ? 0.0 : samples.back() - samples.front();
  return out;
}

/// P_atom1, P_atom2, P_res channels (probability of at least one excitation).
inline TimeSeries population_series(const Trajectory& traj) {
  TimeSeries ts;
  ts.times = traj.times;
  const std::size_t n = traj.states.size();
  std::vector<double> p1(n), p2(n), pr(n);
  for (std::size_t i = 0; i < n; ++i) {
    p1[i] = excited_population(traj.states[i], kAtom1);
    p2[i] = excited_population(traj.states[i], kAtom2);
    pr[i] = excited_population(traj.states[i], kResonator);
  }
  ts.add("P_atom1", std::move(p1));
  ts.add("P_atom2", std::move(p2));
  ts.add("P_res", std::move(pr));
  return ts;
}

// ---------------------------------------------------------------------------
// Schedules: parameters switch instantaneously at segment boundaries.

struct Segment {
  std::string label;
  double duration;  // ns
  SystemParams params;
  DriveSet drives;  // envelopes in absolute time
};

struct Schedule {
  std::vector<Segment> segments;

  double total_duration() const {
    double t = 0.0;
    for (const Segment& s : segments) t += s.duration;
    return t;
  }

  void check() const {
    if (segments.empty()) throw InvalidArgument("Schedule: no segments");
    for (const Segment& s : segments) {
      if (!(s.duration > 0.0)) throw InvalidArgument("Schedule: segment durations must be > 0");
    }
  }
};

struct ScheduleRun {
  Trajectory trajectory;
  std::vector<std::size_t> segment_of_sample;  // index into segments
  std::vector<double> boundaries;              // segment end times
};

/// Lab-frame integration of every segment in one frame rotating at frame_f.
inline ScheduleRun integrate_schedule(const Schedule& schedule, const StateVector& psi0, std::size_t samples_per_segment,
                                      double frame_f, const IntegratorOptions& opts = {}) {
  schedule.check();
  ScheduleRun run;
  StateVector psi = psi0;
  double t0 = 0.0;
  run.trajectory.times.push_back(0.0);
  run.trajectory.states.push_back(psi0);
  run.segment_of_sample.push_back(0);
  for (std::size_t s = 0; s < schedule.segments.size(); ++s) {
    const Segment& seg = schedule.segments[s];
    const DrivenHamiltonian h = lab_hamiltonian(seg.params, seg.drives, frame_f);
    const std::vector<double> grid = uniform_grid(t0, t0 + seg.duration, samples_per_segment);
    Trajectory part = integrate_state(h, psi, grid, opts);
    for (std::size_t i = 1; i < part.times.size(); ++i) {
      run.trajectory.times.push_back(part.times[i]);
      run.trajectory.states.push_back(part.states[i]);
      run.segment_of_sample.push_back(s);
    }
    run.trajectory.stats.steps += part.stats.steps;
    run.trajectory.stats.max_step_drift = std::max(run.trajectory.stats.max_step_drift, part.stats.max_step_drift);
    run.trajectory.stats.total_drift += part.stats.total_drift;
    run.trajectory.stats.dt = std::max(run.trajectory.stats.dt, part.stats.dt);
    psi = part.final_state();
    t0 += seg.duration;
    run.boundaries.push_back(t0);
  }
  run.trajectory.stats.duration = t0;
  return run;
}

// ---------------------------------------------------------------------------
// Displaced frame

/// Closed-form steady displacement eps(t) / (f_r - f_d) e^{-i w_d t + i phi_d}.
inline cplx xi_steady(const DriveTone& tone, double f_r, double t) {
  const double delta = f_r - tone.f_d;
  if (std::abs(delta) < kDenominatorGuard) throw SingularDetuning("xi_steady: drive resonant with the resonator");
  return tone.envelope(t) / delta * tone.carrier(t);
}

/// RK4 solution of i xi' = w_r xi - sum_k eps_k(t) e^{-i w_k t + i phi_k} (lab frame).
inline XiTrajectory solve_xi(const DriveSet& tones, double f_r, cplx xi0, const std::vector<double>& samples,
                             const IntegratorOptions& opts = {}) {
  if (samples.empty()) throw InvalidArgument("solve_xi: empty sample grid");
  double f_max = std::abs(f_r);
  for (const DriveTone& tone : tones) f_max = std::max(f_max, std::abs(tone.f_d));
  f_max = std::max(f_max, 1e-12);
  double dt_max = 1.0 / (opts.steps_per_period * f_max);
  if (opts.dt > 0.0) {
    if (opts.dt > kMaxStepFraction / f_max * (1.0 + 1e-12)) throw StepSizeError("solve_xi: dt exceeds 1/(50 f_max)");
    dt_max = opts.dt;
  }
  const double wr = kTwoPi * f_r;
  auto rhs = [&](double t, cplx xi) {
    cplx drive = 0.0;
    for (const DriveTone& tone : tones) drive += kTwoPi * tone.envelope(t) * tone.carrier(t);
    return -kI * (wr * xi - drive);
  };
  XiTrajectory out;
  out.times = samples;
  out.xi.reserve(samples.size());
  out.xi.push_back(xi0);
  cplx y = xi0;
  for (std::size_t s = 1; s < samples.size(); ++s) {
    const double span = samples[s] - samples[s - 1];
    if (!(span > 0.0)) throw InvalidArgument("solve_xi: sample times must be strictly increasing");
    const auto n = static_cast<std::size_t>(std::ceil(span / dt_max - 1e-9));
    const double dt = span / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = samples[s - 1] + static_cast<double>(k) * dt;
      const cplx k1 = rhs(t, y);
      const cplx k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1);
      const cplx k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2);
      const cplx k4 = rhs(t + dt, y + dt * k3);
      y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    out.xi.push_back(y);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps (no drive: exact eigendecomposition per parameter point)

/// Index of the first swap minimum of P1: argmin inside the first contiguous
/// stretch where P1 < 0.5.  Fast atom-resonator ripples never reach 0.5.
inline std::size_t first_swap_minimum(const std::vector<double>& p1) {
  std::size_t i = 0;
  while (i < p1.size() && p1[i] >= 0.5) ++i;
  if (i == p1.size()) throw NoData("first_swap_minimum: P1 never drops below 0.5");
  std::size_t best = i;
  while (i < p1.size() && p1[i] < 0.5) {
    if (p1[i] < p1[best]) best = i;
    ++i;
  }
  return best;
}

inline StateVector atom1_excited(const SubsystemDims& dims) { return StateVector::basis(dims, {1, 0, 0}); }

inline TimeSeries free_evolution_populations(const SystemParams& p, const StateVector& psi0,
                                             const std::vector<double>& samples) {
  const HermitianPropagator prop(build_H0(p) + build_Hcpg(p));
  return population_series(evolve_constant(prop, psi0, samples));
}

struct ChevronResult {
  Grid2D p_atom1;
  Grid2D p_atom2;
};

inline ChevronResult chevron_sweep(const SystemParams& p, const std::vector<double>& f_r_grid,
                                   const std::vector<double>& t_grid, int workers = 1) {
  ChevronResult out;
  for (Grid2D* g : {&out.p_atom1, &out.p_atom2}) {
    g->axis1_name = "f_r_ghz";
    g->axis2_name = "t_ns";
    g->axis1 = f_r_grid;
    g->axis2 = t_grid;
    g->values.assign(f_r_grid.size() * t_grid.size(), 0.0);
  }
  out.p_atom1.value_name = "P_atom1";
  out.p_atom2.value_name = "P_atom2";
  const StateVector psi0 = atom1_excited(p.dims);
  parallel_for(f_r_grid.size(), workers, [&](std::size_t i) {
    SystemParams q = p;
    q.f_r = f_r_grid[i];
    const TimeSeries ts = free_evolution_populations(q, psi0, t_grid);
    const auto& a = ts.channel("P_atom1");
    const auto& b = ts.channel("P_atom2");
    std::copy(a.begin(), a.end(), out.p_atom1.values.begin() + static_cast<std::ptrdiff_t>(i * t_grid.size()));
    std::copy(b.begin(), b.end(), out.p_atom2.values.begin() + static_cast<std::ptrdiff_t>(i * t_grid.size()));
  });
  return out;
}

struct KappaPoint {
  double kappa;
  double p1_min;
  double p2_max;
  double pres_max;
};

/// f_2 = f_1 + kappa |g_p| per point; window [0, window_ns].
inline std::vector<KappaPoint> kappa_sweep(const SystemParams& p, const std::vector<double>& kappas, double window_ns,
                                           std::size_t n_time = 201, int workers = 1) {
  std::vector<KappaPoint> out(kappas.size());
  const std::vector<double> grid = uniform_grid(0.0, window_ns, n_time);
  const StateVector psi0 = atom1_excited(p.dims);
  parallel_for(kappas.size(), workers, [&](std::size_t i) {
    SystemParams q = p;
    q.f_2 = p.f_1 + kappas[i] * std::abs(p.g_p);
    const TimeSeries ts = free_evolution_populations(q, psi0, grid);
    const auto& a = ts.channel("P_atom1");
    const auto& b = ts.channel("P_atom2");
    const auto& r = ts.channel("P_res");
    out[i] = {kappas[i], *std::min_element(a.begin(), a.end()), *std::max_element(b.begin(), b.end()),
              *std::max_element(r.begin(), r.end())};
  });
  return out;
}

/// |P_full - P_eff| per atom; full lab model vs dispersive model + semiclassical drive.
inline TimeSeries model_discrepancy(const SystemParams& p, const DriveSet& tones, const StateVector& psi0,
                                    const std::vector<double>& samples, double frame_f,
                                    const IntegratorOptions& opts = {}) {
  const TimeSeries full = population_series(integrate_state(lab_hamiltonian(p, tones, frame_f), psi0, samples, opts));
  const TimeSeries eff =
      population_series(integrate_state(effective_driven_hamiltonian(p, tones, frame_f), psi0, samples, opts));
  TimeSeries out;
  out.times = samples;
  for (const char* name : {"P_atom1", "P_atom2"}) {
    const auto& a = full.channel(name);
    const auto& b = eff.channel(name);
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a[i] - b[i]);
    out.add(std::string("dP_") + (name + 2), std::move(d));
  }
  return out;
}

}  // namespace cqed
