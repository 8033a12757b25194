#include <gtest/gtest.h>

#include <random>

#include "cqed/gates.hpp"

using namespace cqed;

namespace {

SystemParams fig4(double g_p) {
  SystemParams p;
  p.f_r = 5.19;
  p.f_1 = p.f_2 = 6.617;
  p.g_p = g_p;
  return p;
}

Matrix4 random_unitary(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Matrix4 a;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) a(i, j) = cplx(nd(rng), nd(rng));
  }
  return Eigen::HouseholderQR<Matrix4>(a).householderQ();
}

Matrix4 random_density(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Vector4 v;
  for (int i = 0; i < 4; ++i) v(i) = cplx(nd(rng), nd(rng));
  v.normalize();
  return v * v.adjoint();
}

double trace_distance(const Matrix4& a, const Matrix4& b) {
  const Matrix4 d = a - b;
  const Eigen::SelfAdjointEigenSolver<Matrix4> es(0.5 * (d + d.adjoint()));
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace

TEST(IswapIdeal, Examples) {
  const Matrix4 u = iswap_dagger_ideal();
  const Vector4 out = u * Vector4::Unit(1);
  EXPECT_LT((out - (-kI) * Vector4::Unit(2)).norm(), 1e-15);
  const Matrix4 sq = u * u;
  const Eigen::Vector4cd want(1.0, -1.0, -1.0, 1.0);
  EXPECT_LT((sq - Matrix4(want.asDiagonal())).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(unitarity_defect(Matrix(u)), 1e-15);
}

TEST(IswapIdeal, PauliWeights) {
  const Matrix4 u = iswap_dagger_ideal();
  const auto& e = pauli_basis();
  for (int m = 0; m < 16; ++m) {
    const double w = std::norm((e[m].adjoint() * u).trace() / 4.0);
    const bool support = m == 0 || m == 5 || m == 10 || m == 15;
    EXPECT_NEAR(w, support ? 0.25 : 0.0, 1e-15) << pauli_label(m);
  }
}

TEST(SwapTime, Examples) {
  EXPECT_NEAR(swap_time(0.004485), 55.74, 0.01);
  EXPECT_NEAR(swap_time(0.008472), 29.51, 0.01);
  EXPECT_NEAR(swap_time(-0.008472), 29.51, 0.01);
  EXPECT_NEAR(swap_time(0.02), 0.5 * swap_time(0.01), 1e-12);
  EXPECT_THROW(swap_time(0.0), NoGate);
}

TEST(PhaseCorrections, IdentityWhenPhasesWrap) {
  EffectiveParams eff{};
  const double tau = 30.0;
  eff.f_1_shift = 7.0 / tau;
  eff.f_2_shift = 3.0 / tau;
  const PhaseCorrections s = phase_corrections(eff, tau);
  EXPECT_LT((s.s1 - Matrix2::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((s.s2 - Matrix2::Identity()).cwiseAbs().maxCoeff(), 1e-12);
}

// two-level atoms: the closed-form effective propagator keeps |11> isolated
TEST(PhaseCorrections, EffectiveModelGivesExactGate) {
  for (double g_p : {0.0, 0.004}) {
    SystemParams p = fig4(g_p);
    p.dims = SubsystemDims{2, 2, 2};
    const EffectiveParams eff = effective_params(p);
    const double tau = swap_time(eff.g_eff);
    ASSERT_GT(eff.g_eff, 0.0);
    const QubitProjection proj = project_to_qubit_subspace(expm_unitary(effective_hamiltonian(p), tau));
    const Matrix4 corrected = fix_phase_at(apply_phase_corrections(proj.u, phase_corrections(eff, tau)), 0, 0);
    EXPECT_LT((corrected - iswap_dagger_ideal()).cwiseAbs().maxCoeff(), 1e-10) << g_p;
    EXPECT_LT(proj.defect, 1e-10);
  }
}

// Full model: the swap block follows the ideal gate to the entrywise bound; the
// |11> phase carries the exact two-excitation conditional shift, checked
// against the dense spectrum below.
TEST(PhaseCorrections, FullModelSwapBlock) {
  for (double g_p : {0.0, 0.004}) {
    const IswapGate gate = build_iswap_gate(fig4(g_p));
    const Matrix4 ideal = iswap_dagger_ideal();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) EXPECT_LT(std::abs(gate.corrected(i, j) - ideal(i, j)), 0.05) << g_p << " " << i << j;
    }
    for (int k = 0; k < 3; ++k) {
      EXPECT_LT(std::abs(gate.corrected(3, k)), 0.05);
      EXPECT_LT(std::abs(gate.corrected(k, 3)), 0.05);
    }
    EXPECT_NEAR(std::abs(gate.corrected(3, 3)), 1.0, 0.05);
  }
}

TEST(PhaseCorrections, ConditionalPhaseMatchesSpectrum) {
  for (double g_p : {0.0, 0.004}) {
    const SystemParams p = fig4(g_p);
    const IswapGate gate = build_iswap_gate(p);
    const Eigen::SelfAdjointEigenSolver<Matrix> es((build_H0(p) + build_Hcpg(p)).matrix());
    auto dressed_energy = [&](std::initializer_list<int> occ) {
      Eigen::Index best = 0;
      es.eigenvectors().row(p.dims.index(occ)).cwiseAbs().maxCoeff(&best);
      return es.eigenvalues()(best) / kTwoPi;
    };
    const double zeta = dressed_energy({1, 1, 0}) - dressed_energy({0, 0, 0}) - gate.eff.f_1_shift - gate.eff.f_2_shift;
    const double predicted = -kTwoPi * zeta * gate.tau;
    const double measured = std::arg(gate.corrected(3, 3) / gate.corrected(0, 0));
    EXPECT_NEAR(std::remainder(measured - predicted, kTwoPi), 0.0, 0.02) << g_p;
  }
}

TEST(Projection, Examples) {
  const SubsystemDims dims{5, 5, 5};
  const QubitProjection id = project_to_qubit_subspace(FockOperator::identity(dims));
  EXPECT_LT((id.u - Matrix4::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(id.defect, 0.0);
  const QubitProjection sw = project_to_qubit_subspace(embed_two_qubit(iswap_dagger_ideal(), dims));
  EXPECT_LT((sw.u - iswap_dagger_ideal()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(sw.defect, 1e-10);
}

TEST(Chi, IdentityChannel) {
  const ChiMatrix c = chi_tomography(unitary_channel(Matrix4::Identity()));
  for (int m = 0; m < 16; ++m) {
    for (int n = 0; n < 16; ++n) EXPECT_NEAR(std::abs(c.chi(m, n) - (m == 0 && n == 0 ? 1.0 : 0.0)), 0.0, 1e-12);
  }
  EXPECT_FALSE(c.nonphysical);
  EXPECT_NEAR(c.trace(), 1.0, 1e-12);
}

TEST(Chi, IswapSupport) {
  const ChiMatrix c = chi_tomography(unitary_channel(iswap_dagger_ideal()));
  const std::array<int, 4> block{0, 5, 10, 15};
  auto in_block = [&](int m) { return std::find(block.begin(), block.end(), m) != block.end(); };
  for (int m = 0; m < 16; ++m) {
    for (int n = 0; n < 16; ++n) {
      if (!(in_block(m) && in_block(n))) {
        EXPECT_LT(std::abs(c.chi(m, n)), 1e-12) << m << "," << n;
      }
    }
  }
  for (int m : block) EXPECT_NEAR(c.chi(m, m).real(), 0.25, 1e-12);
  EXPECT_LT((c.chi - chi_of_unitary(iswap_dagger_ideal())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Chi, RoundTripAndRankOne) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix4 u = random_unitary(rng);
    const ChiMatrix c = chi_tomography(unitary_channel(u));
    EXPECT_LT((c.chi - c.chi.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(c.trace(), 1.0, 1e-10);
    EXPECT_GT(c.min_eigenvalue, -1e-9);
    for (int s = 0; s < 20; ++s) {
      const Matrix4 rho = random_density(rng);
      EXPECT_LT(trace_distance(apply_chi(c.chi, rho), u * rho * u.adjoint()), 1e-8);
    }
    const Eigen::SelfAdjointEigenSolver<Matrix16> es(c.chi);
    EXPECT_LT(std::abs(es.eigenvalues()(14)), 1e-8);
    EXPECT_NEAR(es.eigenvalues()(15), 1.0, 1e-10);
  }
}

TEST(Chi, NonphysicalFlagged) {
  // transpose map is positive but not completely positive
  const ChiMatrix c = chi_tomography([](const Matrix4& rho) -> Matrix4 { return rho.transpose(); });
  EXPECT_TRUE(c.nonphysical);
  EXPECT_LT(c.min_eigenvalue, -1e-6);
}

TEST(Chi, GlobalPhaseInvariance) {
  const IswapGate gate = build_iswap_gate(fig4(0.004));
  const Matrix16 ideal = chi_of_unitary(iswap_dagger_ideal());
  const double f0 = process_fidelity(ideal, chi_tomography(unitary_channel(gate.corrected)).chi);
  const double f1 =
      process_fidelity(ideal, chi_tomography(unitary_channel(std::exp(kI * 1.234) * gate.corrected)).chi);
  EXPECT_NEAR(f0, f1, 1e-12);
}

TEST(Chi, ProcessFidelityAtDeviceParameters) {
  const Matrix16 ideal = chi_of_unitary(iswap_dagger_ideal());
  for (double g_p : {0.0, 0.004}) {
    const IswapGate gate = build_iswap_gate(fig4(g_p));
    const ChiMatrix c = chi_tomography(unitary_channel(gate.corrected));
    EXPECT_GE(process_fidelity(ideal, c.chi), 0.99) << g_p;
    EXPECT_LE(process_fidelity(ideal, c.chi), 1.0 + 1e-9);
  }
}

TEST(StateFidelity, Examples) {
  const SubsystemDims d{2};
  const StateVector zero = StateVector::basis(d, {0});
  const StateVector one = StateVector::basis(d, {1});
  const StateVector plus((zero.amplitudes() + one.amplitudes()) / std::sqrt(2.0), d);
  EXPECT_NEAR(state_fidelity(zero, zero), 1.0, 1e-15);
  EXPECT_NEAR(state_fidelity(zero, one), 0.0, 1e-15);
  EXPECT_NEAR(state_fidelity(plus, zero), 0.5, 1e-15);
  EXPECT_THROW(state_fidelity(zero.amplitudes(), Vector::Zero(3)), InvalidDimension);
}

TEST(LocalGate, Examples) {
  const double phi = 0.4, lambda = 1.1;
  const Matrix2 g0 = local_gate(0.0, phi, lambda);
  EXPECT_LT(std::abs(g0(0, 0) - 1.0), 1e-15);
  EXPECT_LT(std::abs(g0(1, 1) - std::exp(kI * (lambda + phi))), 1e-15);
  EXPECT_LT(std::abs(g0(0, 1)) + std::abs(g0(1, 0)), 1e-15);
  Matrix2 want;
  want << 0, -1, 1, 0;
  EXPECT_LT((local_gate(kPi, 0.0, 0.0) - want).cwiseAbs().maxCoeff(), 1e-15);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int i = 0; i < 20; ++i) {
    const double t = u(rng), f = 0.5 * u(rng), l = 0.5 * u(rng);
    EXPECT_LT(std::abs(local_gate(t, f, l).determinant() - std::exp(kI * (l + f))), 1e-12);
    const LocalPair pair = random_local_gate(rng);
    EXPECT_LT(unitarity_defect(Matrix(pair.kron())), 1e-12);
  }
}

TEST(Leakage, Examples) {
  const SubsystemDims d{4, 4, 3};
  EXPECT_EQ(leakage_population(StateVector::basis(d, {1, 1, 0})), 0.0);
  EXPECT_EQ(leakage_population(StateVector::basis(d, {1, 0, 2})), 0.0);
  EXPECT_EQ(leakage_population(StateVector::basis(d, {0, 2, 0})), 1.0);
  const Vector mix = (StateVector::basis(d, {0, 1, 0}).amplitudes() + StateVector::basis(d, {3, 0, 0}).amplitudes()) /
                     std::sqrt(2.0);
  EXPECT_NEAR(leakage_population(StateVector(mix, d)), 0.5, 1e-15);
  const FockOperator rho(mix * mix.adjoint(), d);
  EXPECT_NEAR(leakage_population(rho), 0.5, 1e-15);
}

TEST(Leakage, GrowsWithGateCountAtWeakAnharmonicity) {
  SystemParams p = fig4(0.004);
  p.alpha_1 = p.alpha_2 = 0.02;
  const IswapGate gate = build_iswap_gate(p);
  RBConfig cfg;
  cfg.n_max = 30;
  cfg.realizations = 20;
  const RBResult r = rb_run(gate.corrected_full, cfg);
  EXPECT_GT(r.mean_leakage[30], r.mean_leakage[1]);
  EXPECT_GT(r.mean_leakage[30], 1e-3);
}

TEST(RB, IdealGateGivesUnitFidelity) {
  const SubsystemDims dims{3, 3, 3};
  RBConfig cfg;
  cfg.n_max = 20;
  cfg.realizations = 10;
  const RBResult r = rb_run(embed_two_qubit(iswap_dagger_ideal(), dims), cfg);
  EXPECT_NEAR(r.f_bar, 1.0, 1e-6);
  for (double f : r.mean_fidelity) EXPECT_NEAR(f, 1.0, 1e-12);
  EXPECT_EQ(r.counts.size(), 21u);
}

TEST(RB, Deterministic) {
  const IswapGate gate = build_iswap_gate(fig4(0.004));
  RBConfig cfg;
  cfg.n_max = 10;
  cfg.realizations = 12;
  cfg.seed = 42;
  const RBResult a = rb_run(gate.corrected_full, cfg);
  const RBResult b = rb_run(gate.corrected_full, cfg);
  EXPECT_EQ(a.mean_fidelity, b.mean_fidelity);
  EXPECT_EQ(a.mean_leakage, b.mean_leakage);
  EXPECT_EQ(a.f_bar, b.f_bar);
  cfg.workers = 3;
  const RBResult c = rb_run(gate.corrected_full, cfg);
  EXPECT_EQ(a.mean_fidelity, c.mean_fidelity);
  for (double f : a.mean_fidelity) {
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0 + 1e-12);
  }
  EXPECT_EQ(a.fit_residuals.size(), 10u);
}

TEST(RB, Preconditions) {
  const SubsystemDims dims{3, 3, 3};
  const FockOperator g = embed_two_qubit(iswap_dagger_ideal(), dims);
  RBConfig cfg;
  cfg.n_max = 1;
  EXPECT_THROW(rb_run(g, cfg), InvalidArgument);
  cfg.n_max = 5;
  cfg.realizations = 9;
  EXPECT_THROW(rb_run(g, cfg), InvalidArgument);
  EXPECT_THROW(fit_rb_decay({1.0, 1.0, 1.0}), InsufficientData);
  EXPECT_NO_THROW(fit_rb_decay({1.0, 1.0, 1.0, 1.0}));
  const RBFit fit = fit_rb_decay({1.0, 0.99, 0.99 * 0.99, 0.99 * 0.99 * 0.99});
  EXPECT_NEAR(fit.f_bar, 0.99, 1e-12);
}
