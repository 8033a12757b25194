#include <gtest/gtest.h>

#include <random>

#include "cqed/dynamics.hpp"
#include "cqed/gates.hpp"

using namespace cqed;

namespace {

// RK4 global error scales as steps_per_period^-4; the oracle comparisons at
// 1e-8 need about ten times the default resolution over several ns.
IntegratorOptions fine() {
  IntegratorOptions o;
  o.steps_per_period = 1000;
  return o;
}

SystemParams small_device(double g_p = 0.004) {
  SystemParams p;
  p.f_r = 5.19;
  p.f_1 = p.f_2 = 6.617;
  p.g_p = g_p;
  p.dims = SubsystemDims{3, 3, 3};
  return p;
}

DriveTone tone_at(double f_d, double amp, double ramp = 1.0, double hold = 1e9) {
  DriveTone t;
  t.f_d = f_d;
  t.envelope = Envelope::flat_top(amp, ramp, hold);
  return t;
}

double max_component_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(TimeSeries, Checks) {
  TimeSeries ts;
  ts.times = {0.0, 1.0, 2.0};
  ts.add("a", {1, 2, 3});
  EXPECT_NO_THROW(ts.check());
  EXPECT_THROW(ts.add("b", {1, 2}), InvalidArgument);
  ts.times = {0.0, 2.0, 1.0};
  EXPECT_THROW(ts.check(), InvalidArgument);
  EXPECT_THROW(ts.channel("missing"), InvalidArgument);
}

TEST(IntegrateState, ConstantDiagonalKeepsPopulations) {
  const SubsystemDims d{3, 3};
  Matrix h = Matrix::Zero(9, 9);
  for (int i = 0; i < 9; ++i) h(i, i) = 0.7 * i;
  Vector psi = Vector::Constant(9, 1.0 / 3.0);
  const Trajectory tr = integrate_state(static_hamiltonian(FockOperator(h, d)), StateVector(psi, d),
                                        uniform_grid(0.0, 20.0, 11), fine());
  for (const StateVector& s : tr.states) {
    for (int i = 0; i < 9; ++i) EXPECT_NEAR(std::norm(s.amplitudes()(i)), 1.0 / 9.0, 1e-10);
  }
}

TEST(IntegrateState, MatchesExpm) {
  const SystemParams p = small_device();
  const FockOperator h = build_H0(p) + build_Hcpg(p);
  const StateVector psi0 = atom1_excited(p.dims);
  IntegratorOptions opts = fine();
  opts.renormalize = false;
  const Trajectory tr = integrate_state(static_hamiltonian(h), psi0, {0.0, 10.0}, opts);
  const Vector want = expm_unitary(h, 10.0).matrix() * psi0.amplitudes();
  EXPECT_LT(max_component_diff(tr.final_state().amplitudes(), want), 1e-8);
}

TEST(IntegrateState, TwoLevelSwapPeriod) {
  // resonant two-level atoms coupled at g: full swap period pi / g_angular
  const SubsystemDims d{2, 2};
  const double g = 0.0085;
  const FockOperator a1 = embed_annihilation(0, d);
  const FockOperator a2 = embed_annihilation(1, d);
  const FockOperator h = (kTwoPi * 6.6) * (a1.adjoint() * a1 + a2.adjoint() * a2) +
                         (kTwoPi * g) * (a1.adjoint() * a2 + a2.adjoint() * a1);
  const double period = 1.0 / (2.0 * g);
  const StateVector psi0 = StateVector::basis(d, {1, 0});
  const Trajectory tr = integrate_state(static_hamiltonian(h), psi0, {0.0, period / 2.0, period});
  EXPECT_NEAR(excited_population(tr.states[1], 1), 1.0, 1e-6);
  EXPECT_NEAR(excited_population(tr.final_state(), 0), 1.0, 1e-6);
  EXPECT_NEAR(excited_population(tr.final_state(), 1), 0.0, 1e-6);
}

TEST(IntegrateState, StepSizeGuard) {
  const SystemParams p = small_device();
  const DrivenHamiltonian h = lab_hamiltonian(p, {});
  IntegratorOptions opts;
  opts.dt = 2.0 * kMaxStepFraction / h.frequency_scale();
  EXPECT_THROW(integrate_state(h, atom1_excited(p.dims), {0.0, 1.0}, opts), StepSizeError);
  opts.dt = 0.5 * kMaxStepFraction / h.frequency_scale();
  EXPECT_NO_THROW(integrate_state(h, atom1_excited(p.dims), {0.0, 1.0}, opts));
}

TEST(IntegrateState, RejectsBadInput) {
  const SystemParams p = small_device();
  const DrivenHamiltonian h = lab_hamiltonian(p, {});
  const StateVector bad(2.0 * atom1_excited(p.dims).amplitudes(), p.dims);
  EXPECT_THROW(integrate_state(h, bad, {0.0, 1.0}), InvalidArgument);
  EXPECT_THROW(integrate_state(h, atom1_excited(p.dims), {0.0, 0.0}), InvalidArgument);
}

TEST(IntegrateState, NormDriftPerNs) {
  const SystemParams p = small_device();
  const EffectiveParams eff = effective_params(p);
  const DriveTone tone = tone_at(eff.f_1_shift, 0.1);
  const DrivenHamiltonian h = lab_hamiltonian(p, {tone}, tone.f_d);
  IntegratorOptions opts;
  opts.renormalize = false;
  const Trajectory tr = integrate_state(h, StateVector::basis(p.dims, {0, 0, 0}), uniform_grid(0.0, 20.0, 5), opts);
  EXPECT_LT(std::abs(tr.final_state().norm() - 1.0) / 20.0, 1e-8);
  EXPECT_LT(std::abs(tr.final_state().norm() - 1.0), 1e-7);
}

TEST(IntegrateState, GridHalving) {
  const SystemParams p = small_device();
  const EffectiveParams eff = effective_params(p);
  const DriveTone tone = tone_at(eff.f_1_shift, 0.1);
  const DrivenHamiltonian h = lab_hamiltonian(p, {tone}, tone.f_d);
  const std::vector<double> grid = uniform_grid(0.0, 30.0, 7);
  IntegratorOptions a;
  IntegratorOptions b;
  b.steps_per_period = 2.0 * a.steps_per_period;
  const StateVector psi0 = StateVector::basis(p.dims, {0, 0, 0});
  const TimeSeries pa = population_series(integrate_state(h, psi0, grid, a));
  const TimeSeries pb = population_series(integrate_state(h, psi0, grid, b));
  for (const auto& [name, values] : pa.channels) {
    for (std::size_t i = 0; i < values.size(); ++i) EXPECT_LT(std::abs(values[i] - pb.channel(name)[i]), 1e-6) << name;
  }
}

TEST(IntegrateState, TimeReversal) {
  const SystemParams p = small_device();
  const FockOperator h = build_H0(p) + build_Hcpg(p);
  const StateVector psi0 = atom1_excited(p.dims);
  const Trajectory fwd = integrate_state(static_hamiltonian(h), psi0, {0.0, 15.0});
  const Trajectory back = integrate_state(static_hamiltonian(-h), fwd.final_state(), {0.0, 15.0});
  EXPECT_LT(max_component_diff(back.final_state().amplitudes(), psi0.amplitudes()), 1e-7);
}

TEST(IntegratePropagator, ZeroAndConstant) {
  const SystemParams p = small_device();
  const Eigen::Index n = p.dims.total();
  const FockOperator zero = FockOperator::zero(p.dims);
  EXPECT_LT(max_abs(integrate_propagator(FunctionHamiltonian([zero](double) { return zero; }, p.dims, 1.0), 0.0, 3.0)
                        .matrix() -
                    Matrix::Identity(n, n)),
            1e-14);
  const FockOperator h = build_H0(p) + build_Hcpg(p);
  const FockOperator u = integrate_propagator(static_hamiltonian(h), 0.0, 2.0, fine());
  EXPECT_LT(unitarity_defect(u.matrix()), 1e-8);
  EXPECT_LT(max_abs(u.matrix() - expm_unitary(h, 2.0).matrix()), 1e-8);
}

TEST(IntegratePropagator, Composition) {
  const SystemParams p = small_device();
  const EffectiveParams eff = effective_params(p);
  const DriveTone tone = tone_at(eff.f_1_shift, 0.1);
  const DrivenHamiltonian h = lab_hamiltonian(p, {tone}, tone.f_d);
  const FockOperator u01 = integrate_propagator(h, 0.0, 3.0, fine());
  const FockOperator u12 = integrate_propagator(h, 3.0, 7.0, fine());
  const FockOperator u02 = integrate_propagator(h, 0.0, 7.0, fine());
  EXPECT_LT(max_abs(u02.matrix() - u12.matrix() * u01.matrix()), 1e-8);
  EXPECT_LT(unitarity_defect(u02.matrix()), 1e-8);
}

TEST(FrameChoice, PopulationsIndependentOfFrame) {
  const SystemParams p = small_device();
  const EffectiveParams eff = effective_params(p);
  const DriveTone tone = tone_at(eff.f_1_shift, 0.1);
  const StateVector psi0 = StateVector::basis(p.dims, {0, 0, 0});
  const std::vector<double> grid = uniform_grid(0.0, 10.0, 6);
  IntegratorOptions opts;
  opts.steps_per_period = 400;
  const TimeSeries lab = population_series(integrate_state(lab_hamiltonian(p, {tone}, 0.0), psi0, grid, opts));
  const TimeSeries rot = population_series(integrate_state(lab_hamiltonian(p, {tone}, tone.f_d), psi0, grid, opts));
  for (const char* c : {"P_atom1", "P_atom2", "P_res"}) {
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(lab.channel(c)[i], rot.channel(c)[i], 1e-6);
  }
}

TEST(Xi, ZeroDrive) {
  DriveTone t = tone_at(6.0, 0.0);
  const XiTrajectory x = solve_xi({t}, 5.0, 0.0, uniform_grid(0.0, 5.0, 11));
  for (cplx v : x.xi) EXPECT_EQ(v, cplx(0.0));
}

TEST(Xi, SteadyClosedForm) {
  DriveTone t = tone_at(6.6, 0.1);
  t.phi_d = 0.3;
  t.envelope = Envelope::constant(0.1);
  EXPECT_NEAR(std::abs(xi_steady(t, 5.19, 0.0)), 0.1 / 1.41, 1e-12);
  EXPECT_NEAR(std::abs(xi_steady(t, 5.19, 3.7)), 0.1 / 1.41, 1e-12);
  const cplx a = xi_steady(t, 5.19, 1.0);
  const cplx b = xi_steady(t, 5.19, 1.25);
  EXPECT_NEAR(std::remainder(std::arg(b / a) + kTwoPi * t.f_d * 0.25, kTwoPi), 0.0, 1e-10);
  t.envelope = Envelope::constant(0.0);
  EXPECT_EQ(xi_steady(t, 5.19, 2.0), cplx(0.0));
  EXPECT_THROW(xi_steady(t, 6.6, 0.0), SingularDetuning);
}

TEST(Xi, ConvergesAfterRamp) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int draw = 0; draw < 10; ++draw) {
    const double f_r = 5.0 + 2.0 * u(rng);
    const double f_d = f_r + (u(rng) < 0.5 ? -1 : 1) * (0.5 + 1.5 * u(rng));
    DriveTone t = tone_at(f_d, 0.02 + 0.1 * u(rng), 5.0 + 5.0 * u(rng));
    t.phi_d = kTwoPi * u(rng);
    const double period = 1.0 / std::abs(f_r - f_d);
    const double t_end = t.envelope.t_start() + t.envelope.ramp() + 5.0 * period;
    const XiTrajectory x = solve_xi({t}, f_r, 0.0, {0.0, t_end});
    const double want = t.envelope.amplitude() / std::abs(f_r - f_d);
    EXPECT_LT(std::abs(std::abs(x.xi.back()) - want) / want, 0.02) << draw;
  }
}

TEST(Xi, SteadyInitialConditionStaysSteady) {
  DriveTone t;
  t.f_d = 6.617;
  t.phi_d = 0.5;
  t.envelope = Envelope::constant(0.1, -1e9);
  const double f_r = 5.19;
  const std::vector<double> grid = uniform_grid(0.0, 20.0, 41);
  const XiTrajectory x = solve_xi({t}, f_r, xi_steady(t, f_r, 0.0), grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const cplx ref = xi_steady(t, f_r, grid[i]);
    EXPECT_LT(std::abs(x.xi[i] - ref) / std::abs(ref), 1e-3);
  }
}

TEST(FirstSwapMinimum, Region) {
  EXPECT_EQ(first_swap_minimum({1.0, 0.9, 0.4, 0.1, 0.2, 0.6, 0.05}), 3u);
  EXPECT_THROW(first_swap_minimum({1.0, 0.9}), NoData);
}

TEST(Chevron, ValuesInRangeAndFarRowPeriod) {
  SystemParams p;
  p.dims = SubsystemDims{3, 3, 3};
  const double f_far = 6.0;
  const std::vector<double> t_grid = uniform_grid(0.0, 300.0, 601);
  const ChevronResult c = chevron_sweep(p, {f_far, 6.5}, t_grid);
  for (double v : c.p_atom1.values) {
    EXPECT_GE(v, -1e-12);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
  // first minimum of the far row sits at 1 / (4 f_eff)
  std::vector<double> row(t_grid.size());
  for (std::size_t j = 0; j < t_grid.size(); ++j) row[j] = c.p_atom1.at(0, j);
  SystemParams q = p;
  q.f_r = f_far;
  const double tau = swap_time(g_eff(q));
  EXPECT_NEAR(t_grid[first_swap_minimum(row)], tau, 0.02 * tau);
}

TEST(Kappa, Extremes) {
  SystemParams p;
  p.dims = SubsystemDims{3, 3, 3};
  const double window = 10.0 * swap_time(g_eff(p));
  const auto pts = kappa_sweep(p, {0.0, 30.0}, window, 801);
  EXPECT_LT(pts[0].p1_min, 0.02);
  EXPECT_GT(pts[1].p1_min, 0.9);
  EXPECT_LT(pts[1].pres_max, 0.01);
  for (const KappaPoint& k : pts) EXPECT_LE(k.p2_max + k.p1_min, 1.0 + 1e-6);
}

TEST(Sweeps, WorkerCountDoesNotChangeResults) {
  SystemParams p;
  p.dims = SubsystemDims{3, 3, 3};
  const std::vector<double> t_grid = uniform_grid(0.0, 100.0, 21);
  const ChevronResult a = chevron_sweep(p, {5.5, 6.0, 6.5, 7.0}, t_grid, 1);
  const ChevronResult b = chevron_sweep(p, {5.5, 6.0, 6.5, 7.0}, t_grid, 3);
  EXPECT_EQ(a.p_atom1.values, b.p_atom1.values);
}

TEST(Schedule, Validation) {
  Schedule s;
  EXPECT_THROW(s.check(), InvalidArgument);
  s.segments.push_back({"x", 0.0, small_device(), {}});
  EXPECT_THROW(s.check(), InvalidArgument);
  s.segments[0].duration = 2.0;
  s.segments.push_back({"y", 3.0, small_device(), {}});
  EXPECT_NEAR(s.total_duration(), 5.0, 1e-15);
  const ScheduleRun run = integrate_schedule(s, atom1_excited(s.segments[0].params.dims), 5, 0.0);
  EXPECT_EQ(run.trajectory.times.size(), 9u);
  EXPECT_EQ(run.boundaries, (std::vector<double>{2.0, 5.0}));
  EXPECT_EQ(run.segment_of_sample.back(), 1u);
}

TEST(ModelDiscrepancy, ZeroWithoutCoupling) {
  SystemParams p = small_device(0.0);
  p.g_1 = p.g_2 = 0.0;
  const TimeSeries d = model_discrepancy(p, {}, atom1_excited(p.dims), uniform_grid(0.0, 10.0, 5), 0.0);
  for (const auto& [name, v] : d.channels) {
    for (double x : v) EXPECT_LT(x, 1e-10) << name;
  }
}

TEST(ModelDiscrepancy, GrowsOutsideDispersiveRegime) {
  auto worst = [](double delta) {
    SystemParams p = small_device();
    p.f_r = p.f_1 - delta;
    const TimeSeries d = model_discrepancy(p, {}, atom1_excited(p.dims), uniform_grid(0.0, 40.0, 41), 0.0);
    double m = 0.0;
    for (const auto& [name, v] : d.channels) m = std::max(m, *std::max_element(v.begin(), v.end()));
    return m;
  };
  EXPECT_GT(worst(0.3), worst(1.427));
}

TEST(IntegratePropagator, DefaultResolutionUnitary) {
  const SystemParams p = small_device();
  const EffectiveParams eff = effective_params(p);
  const DriveTone tone = tone_at(eff.f_1_shift, 0.1);
  const FockOperator u = integrate_propagator(lab_hamiltonian(p, {tone}, tone.f_d), 0.0, 10.0);
  EXPECT_LT(unitarity_defect(u.matrix()), 1e-8);
}
