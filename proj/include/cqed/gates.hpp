#pragma once

// iSWAP^dagger construction from the device propagator, process tomography,
// randomized benchmarking and leakage.
//
// Two-qubit basis order: |00>, |01>, |10>, |11> with the first label atom 1.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cqed/dynamics.hpp"
#include "cqed/errors.hpp"
#include "cqed/fockalg.hpp"
#include "cqed/model.hpp"

namespace cqed {

using Matrix2 = Eigen::Matrix2cd;
using Matrix4 = Eigen::Matrix4cd;
using Vector4 = Eigen::Vector4cd;
using Matrix16 = Eigen::Matrix<cplx, 16, 16>;

inline Matrix4 iswap_dagger_ideal() {
  Matrix4 u = Matrix4::Zero();
  u(0, 0) = 1.0;
  u(1, 2) = -kI;
  u(2, 1) = -kI;
  u(3, 3) = 1.0;
  return u;
}

/// tau = pi / (2 g_eff,angular) = 1 / (4 |f_eff|), ns.
inline double swap_time(double g_eff_ghz) {
  if (!(std::abs(g_eff_ghz) > 1e-15)) throw NoGate("swap_time: effective coupling is zero");
  return 1.0 / (4.0 * std::abs(g_eff_ghz));
}

struct PhaseCorrections {
  Matrix2 s1;
  Matrix2 s2;
};

/// S_k = diag(1, e^{-i w~_k tau}); the corrected gate is (S1 x S2)^dagger U.
inline PhaseCorrections phase_corrections(const EffectiveParams& eff, double tau) {
  PhaseCorrections out;
  out.s1 = Matrix2::Identity();
  out.s2 = Matrix2::Identity();
  out.s1(1, 1) = std::exp(-kI * kTwoPi * eff.f_1_shift * tau);
  out.s2(1, 1) = std::exp(-kI * kTwoPi * eff.f_2_shift * tau);
  return out;
}

inline Matrix4 kron2(const Matrix2& a, const Matrix2& b) {
  Matrix4 out;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  }
  return out;
}

inline Matrix4 apply_phase_corrections(const Matrix4& u, const PhaseCorrections& s) {
  return kron2(s.s1, s.s2).adjoint() * u;
}

// ---------------------------------------------------------------------------
// Global phase conventions

/// Rotate the global phase so element (i, j) is real and non-negative.
inline Matrix4 fix_phase_at(const Matrix4& u, int i, int j) {
  const cplx z = u(i, j);
  if (std::abs(z) == 0.0) return u;
  return u * (std::abs(z) / z);
}

/// Rotate the global phase so the largest-modulus entry is real positive.
inline Matrix4 fix_phase_largest(const Matrix4& u) {
  Eigen::Index r = 0, c = 0;
  u.cwiseAbs().maxCoeff(&r, &c);
  return fix_phase_at(u, static_cast<int>(r), static_cast<int>(c));
}

/// Phase-invariant overlap |tr(A^dagger B)|^2 / 16.
inline double unitary_overlap_fidelity(const Matrix4& a, const Matrix4& b) {
  return std::norm((a.adjoint() * b).trace()) / 16.0;
}

// ---------------------------------------------------------------------------
// Qubit subspace

/// Indices of |n1 n2 0_r> with n_k in {0, 1}, ordered |00>, |01>, |10>, |11>.
inline std::array<Eigen::Index, 4> qubit_indices(const SubsystemDims& dims) {
  if (dims.size() != 3) throw InvalidDimension("qubit_indices: expected (atom1, atom2, resonator) dims");
  return {dims.index({0, 0, 0}), dims.index({0, 1, 0}), dims.index({1, 0, 0}), dims.index({1, 1, 0})};
}

enum class ProjectionFrame { Bare, Dressed };

inline std::string to_string(ProjectionFrame f) { return f == ProjectionFrame::Bare ? "bare" : "dressed"; }

struct QubitProjection {
  Matrix4 u;
  double defect;  // || U4^dagger U4 - 1 ||_inf
};

inline QubitProjection project_to_qubit_subspace(const FockOperator& u_full) {
  const auto idx = qubit_indices(u_full.dims());
  QubitProjection out;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) out.u(i, j) = u_full(idx[i], idx[j]);
  }
  out.defect = max_abs(out.u.adjoint() * out.u - Matrix4::Identity());
  return out;
}

/// R U R^dagger with R = exp(S): the propagator seen by dispersive-frame states.
inline FockOperator to_dressed_frame(const FockOperator& u, const SystemParams& p) {
  const FockOperator r = dressing_unitary(p);
  return r * u * r.adjoint();
}

/// Full-space operator acting as u4 on the qubit subspace, identity elsewhere.
inline FockOperator embed_two_qubit(const Matrix4& u4, const SubsystemDims& dims) {
  const auto idx = qubit_indices(dims);
  Matrix m = Matrix::Identity(dims.total(), dims.total());
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) m(idx[i], idx[j]) = u4(i, j);
  }
  return {std::move(m), dims};
}

struct IswapGate {
  double tau = 0.0;               // ns
  EffectiveParams eff{};
  ProjectionFrame frame = ProjectionFrame::Dressed;
  FockOperator corrected_full = FockOperator::identity(SubsystemDims{2});  // phase-corrected, full space
  Matrix4 corrected = Matrix4::Identity();                                 // qubit block, |00><00| phase fixed
  double defect = 0.0;
};

/// Free evolution for tau under H0 + Hcpg followed by the local phase
/// corrections, expressed in the requested frame.
inline IswapGate build_iswap_gate(const SystemParams& p, ProjectionFrame frame = ProjectionFrame::Dressed,
                                  std::optional<double> tau_override = std::nullopt) {
  IswapGate gate;
  gate.eff = effective_params(p);
  gate.tau = tau_override ? *tau_override : swap_time(gate.eff.g_eff);
  gate.frame = frame;
  FockOperator u = expm_unitary(build_H0(p) + build_Hcpg(p), gate.tau);
  if (frame == ProjectionFrame::Dressed) u = to_dressed_frame(u, p);
  // exp(+i tau (w~1 n1 + w~2 n2 + w~r nr)) removes the free phases; on the
  // qubit block it equals (S1 x S2)^dagger.
  Vector phases(p.dims.total());
  for (Eigen::Index i = 0; i < p.dims.total(); ++i) {
    const double e = gate.eff.f_1_shift * p.dims.occupation(i, kAtom1) +
                     gate.eff.f_2_shift * p.dims.occupation(i, kAtom2) +
                     gate.eff.f_r_shift * p.dims.occupation(i, kResonator);
    phases(i) = std::exp(kI * kTwoPi * e * gate.tau);
  }
  gate.corrected_full = FockOperator(phases.asDiagonal() * u.matrix(), p.dims);
  const QubitProjection proj = project_to_qubit_subspace(gate.corrected_full);
  gate.corrected = fix_phase_at(proj.u, 0, 0);
  gate.defect = proj.defect;
  return gate;
}

// ---------------------------------------------------------------------------
// Process tomography

/// {I,X,Y,Z} x {I,X,Y,Z}, order II, IX, IY, IZ, XI, ...
inline const std::array<Matrix4, 16>& pauli_basis() {
  static const std::array<Matrix4, 16> basis = [] {
    std::array<Matrix2, 4> s;
    s[0] = Matrix2::Identity();
    s[1] << 0, 1, 1, 0;
    s[2] << 0, -kI, kI, 0;
    s[3] << 1, 0, 0, -1;
    std::array<Matrix4, 16> out;
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) out[4 * a + b] = kron2(s[a], s[b]);
    }
    return out;
  }();
  return basis;
}

inline const char* pauli_label(int m) {
  static const char* labels[16] = {"II", "IX", "IY", "IZ", "XI", "XX", "XY", "XZ",
                                   "YI", "YX", "YY", "YZ", "ZI", "ZX", "ZY", "ZZ"};
  return labels[m];
}

struct ChiMatrix {
  Matrix16 chi;
  double min_eigenvalue = 0.0;
  bool nonphysical = false;  // some eigenvalue < -1e-6; reported, never repaired
  double trace() const { return chi.trace().real(); }
};

using Channel = std::function<Matrix4(const Matrix4&)>;

namespace detail {

/// beta((j,k),(m,n)) = (E_m rho_j E_n^dagger)_k with rho_j = |a><b|, j = 4a + b.
inline const Eigen::PartialPivLU<Eigen::MatrixXcd>& chi_inversion() {
  static const Eigen::PartialPivLU<Eigen::MatrixXcd> lu = [] {
    const auto& e = pauli_basis();
    Eigen::MatrixXcd beta(256, 256);
    for (int j = 0; j < 16; ++j) {
      Matrix4 rho = Matrix4::Zero();
      rho(j / 4, j % 4) = 1.0;
      for (int m = 0; m < 16; ++m) {
        for (int n = 0; n < 16; ++n) {
          const Matrix4 out = e[m] * rho * e[n].adjoint();
          for (int k = 0; k < 16; ++k) beta(16 * j + k, 16 * m + n) = out(k / 4, k % 4);
        }
      }
    }
    return Eigen::PartialPivLU<Eigen::MatrixXcd>(beta);
  }();
  return lu;
}

inline Matrix4 projector(const Vector4& v) { return v * v.adjoint(); }

}  // namespace detail

/// Standard linear inversion from the channel's action on 16 operator inputs,
/// each assembled from physical pure states |a>, |b>, |+>, |+i>.
inline ChiMatrix chi_tomography(const Channel& channel) {
  std::array<Matrix4, 16> images;
  std::array<Matrix4, 4> diag_images;
  for (int a = 0; a < 4; ++a) {
    diag_images[a] = channel(detail::projector(Vector4::Unit(a)));
  }
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      if (a == b) {
        images[4 * a + b] = diag_images[a];
        continue;
      }
      const Vector4 plus = (Vector4::Unit(a) + Vector4::Unit(b)) / std::sqrt(2.0);
      const Vector4 plus_i = (Vector4::Unit(a) + kI * Vector4::Unit(b)) / std::sqrt(2.0);
      // |a><b| = P+ + i P+i - (1 + i)/2 (|a><a| + |b><b|)
      images[4 * a + b] = channel(detail::projector(plus)) + kI * channel(detail::projector(plus_i)) -
                          (1.0 + kI) / 2.0 * (diag_images[a] + diag_images[b]);
    }
  }
  Eigen::VectorXcd lambda(256);
  for (int j = 0; j < 16; ++j) {
    for (int k = 0; k < 16; ++k) lambda(16 * j + k) = images[j](k / 4, k % 4);
  }
  const Eigen::VectorXcd x = detail::chi_inversion().solve(lambda);
  ChiMatrix out;
  for (int m = 0; m < 16; ++m) {
    for (int n = 0; n < 16; ++n) out.chi(m, n) = x(16 * m + n);
  }
  out.chi = 0.5 * (out.chi + out.chi.adjoint()).eval();
  const Eigen::SelfAdjointEigenSolver<Matrix16> es(out.chi);
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  out.nonphysical = out.min_eigenvalue < -1e-6;
  return out;
}

inline Channel unitary_channel(const Matrix4& u) {
  return [u](const Matrix4& rho) -> Matrix4 { return u * rho * u.adjoint(); };
}

/// Closed form for a unitary: chi_mn = c_m conj(c_n), c_m = tr(E_m U) / 4.
inline Matrix16 chi_of_unitary(const Matrix4& u) {
  const auto& e = pauli_basis();
  Eigen::Matrix<cplx, 16, 1> c;
  for (int m = 0; m < 16; ++m) c(m) = (e[m] * u).trace() / 4.0;
  return c * c.adjoint();
}

/// E(rho) = sum chi_mn E_m rho E_n^dagger
inline Matrix4 apply_chi(const Matrix16& chi, const Matrix4& rho) {
  const auto& e = pauli_basis();
  Matrix4 out = Matrix4::Zero();
  for (int m = 0; m < 16; ++m) {
    for (int n = 0; n < 16; ++n) {
      if (chi(m, n) != 0.0) out += chi(m, n) * e[m] * rho * e[n].adjoint();
    }
  }
  return out;
}

inline double process_fidelity(const Matrix16& chi_ideal, const Matrix16& chi_sim) {
  return (chi_ideal * chi_sim).trace().real();
}

// ---------------------------------------------------------------------------
// States and local gates

inline double state_fidelity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw InvalidDimension("state_fidelity: size mismatch");
  return std::norm(a.dot(b));
}

inline double state_fidelity(const StateVector& a, const StateVector& b) {
  return state_fidelity(a.amplitudes(), b.amplitudes());
}

/// G(theta, phi, lambda) = [[cos, -e^{i lam} sin], [e^{i phi} sin, e^{i(lam+phi)} cos]] at theta/2.
inline Matrix2 local_gate(double theta, double phi, double lambda) {
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  Matrix2 g;
  g << c, -std::exp(kI * lambda) * s, std::exp(kI * phi) * s, std::exp(kI * (lambda + phi)) * c;
  return g;
}

struct LocalPair {
  Matrix2 g1;
  Matrix2 g2;
  Matrix4 kron() const { return kron2(g1, g2); }
};

inline Matrix2 random_single_gate(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double theta = kTwoPi * u01(rng);
  const double phi = kPi * u01(rng);
  const double lambda = kPi * u01(rng);
  return local_gate(theta, phi, lambda);
}

inline LocalPair random_local_gate(std::mt19937_64& rng) {
  LocalPair out;
  out.g1 = random_single_gate(rng);
  out.g2 = random_single_gate(rng);
  return out;
}

/// Apply g on levels {0, 1} of one atom slot of a full state (identity above).
inline void apply_local_in_place(Vector& psi, const Matrix2& g, std::size_t slot, const SubsystemDims& dims) {
  Eigen::Index stride = 1;
  for (std::size_t s = dims.size(); s-- > slot + 1;) stride *= dims[s];
  const Eigen::Index block = stride * dims[slot];
  for (Eigen::Index base = 0; base < psi.size(); base += block) {
    for (Eigen::Index off = 0; off < stride; ++off) {
      const Eigen::Index i0 = base + off;
      const Eigen::Index i1 = i0 + stride;
      const cplx a = psi(i0);
      const cplx b = psi(i1);
      psi(i0) = g(0, 0) * a + g(0, 1) * b;
      psi(i1) = g(1, 0) * a + g(1, 1) * b;
    }
  }
}

// ---------------------------------------------------------------------------
// Leakage

/// tr[(1 - P_qu) rho] with P_qu on atom occupations {0,1}^2; resonator traced out.
inline double leakage_population(const StateVector& psi) {
  const SubsystemDims& dims = psi.dims();
  if (dims.size() < 2) throw InvalidDimension("leakage_population: need two atom slots");
  double p = 0.0;
  for (Eigen::Index i = 0; i < psi.dim(); ++i) {
    if (dims.occupation(i, kAtom1) > 1 || dims.occupation(i, kAtom2) > 1) p += std::norm(psi.amplitudes()(i));
  }
  return p;
}

inline double leakage_population(const FockOperator& rho) {
  const SubsystemDims& dims = rho.dims();
  if (dims.size() < 2) throw InvalidDimension("leakage_population: need two atom slots");
  double p = 0.0;
  for (Eigen::Index i = 0; i < rho.dim(); ++i) {
    if (dims.occupation(i, kAtom1) > 1 || dims.occupation(i, kAtom2) > 1) p += rho(i, i).real();
  }
  return p;
}

// ---------------------------------------------------------------------------
// Randomized benchmarking

struct RBConfig {
  int n_max = 50;
  int realizations = 100;
  std::uint64_t seed = 20240611;
  int workers = 1;
};

struct RBResult {
  std::vector<int> counts;                // 0 .. n_max
  std::vector<double> mean_fidelity;
  std::vector<double> std_error;
  std::vector<double> mean_leakage;
  double f_bar = 0.0;
  double f_bar_err = 0.0;
  std::vector<double> fit_residuals;      // log F(N) - N log F_bar, N >= 1
  int realizations = 0;
  std::uint64_t seed = 0;
};

/// Independent stream per realization, fixed by (seed, index) alone.
inline std::mt19937_64 realization_rng(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index & 0xffffffffu), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

struct RBFit {
  double f_bar;
  double f_bar_err;
  std::vector<double> residuals;
};

/// OLS through the origin of log F(N) on N for N = 1 .. n_max.
inline RBFit fit_rb_decay(const std::vector<double>& mean_fidelity) {
  const std::size_t n_max = mean_fidelity.size() - 1;
  double sxy = 0.0;
  double sxx = 0.0;
  bool all_one = true;
  for (std::size_t n = 1; n <= n_max; ++n) {
    if (!(mean_fidelity[n] > 0.0)) throw InsufficientData("fit_rb_decay: non-positive mean fidelity");
    if (std::abs(mean_fidelity[n] - 1.0) > 1e-12) all_one = false;
    sxy += static_cast<double>(n) * std::log(mean_fidelity[n]);
    sxx += static_cast<double>(n * n);
  }
  if (all_one && n_max < 3) throw InsufficientData("fit_rb_decay: no decay visible and fewer than 3 points");
  const double slope = sxy / sxx;
  RBFit fit;
  double ss = 0.0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    const double r = std::log(mean_fidelity[n]) - slope * static_cast<double>(n);
    fit.residuals.push_back(r);
    ss += r * r;
  }
  const double dof = static_cast<double>(n_max > 1 ? n_max - 1 : 1);
  fit.f_bar = std::exp(slope);
  fit.f_bar_err = fit.f_bar * std::sqrt(ss / dof / sxx);
  return fit;
}

/// Circuit: random product state G1 x G2 |00>, then N x [gate, random local pair].
/// `gate_full` is the phase-corrected full-space gate; the ideal branch uses
/// `gate_ideal` on the four qubit amplitudes.
inline RBResult rb_run(const FockOperator& gate_full, const RBConfig& cfg, const Matrix4& gate_ideal = iswap_dagger_ideal()) {
  if (cfg.n_max < 2) throw InvalidArgument("rb_run: n_max must be >= 2");
  if (cfg.realizations < 10) throw InvalidArgument("rb_run: need at least 10 realizations");
  const SubsystemDims& dims = gate_full.dims();
  const auto idx = qubit_indices(dims);
  const auto n_counts = static_cast<std::size_t>(cfg.n_max) + 1;
  const auto reps = static_cast<std::size_t>(cfg.realizations);

  std::vector<std::vector<double>> fid(reps, std::vector<double>(n_counts));
  std::vector<std::vector<double>> leak(reps, std::vector<double>(n_counts));
  parallel_for(reps, cfg.workers, [&](std::size_t r) {
    std::mt19937_64 rng = realization_rng(cfg.seed, r);
    auto record = [&](std::size_t n, const Vector4& ideal, const Vector& full) {
      Vector4 sim;
      for (int k = 0; k < 4; ++k) sim(k) = full(idx[k]);
      fid[r][n] = std::norm(ideal.dot(sim));
      leak[r][n] = leakage_population(StateVector(full, dims));
    };
    LocalPair g = random_local_gate(rng);
    Vector4 ideal = g.kron().col(0);
    Vector full = Vector::Zero(dims.total());
    for (int k = 0; k < 4; ++k) full(idx[k]) = ideal(k);
    record(0, ideal, full);
    for (std::size_t n = 1; n < n_counts; ++n) {
      ideal = gate_ideal * ideal;
      full = gate_full.matrix() * full;
      g = random_local_gate(rng);
      ideal = g.kron() * ideal;
      apply_local_in_place(full, g.g1, kAtom1, dims);
      apply_local_in_place(full, g.g2, kAtom2, dims);
      record(n, ideal, full);
    }
  });

  RBResult out;
  out.realizations = cfg.realizations;
  out.seed = cfg.seed;
  for (std::size_t n = 0; n < n_counts; ++n) {
    double s = 0.0, s2 = 0.0, l = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      s += fid[r][n];
      s2 += fid[r][n] * fid[r][n];
      l += leak[r][n];
    }
    const double mean = s / static_cast<double>(reps);
    const double var = std::max(0.0, s2 / static_cast<double>(reps) - mean * mean) * static_cast<double>(reps) /
                       static_cast<double>(reps - 1);
    out.counts.push_back(static_cast<int>(n));
    out.mean_fidelity.push_back(mean);
    out.std_error.push_back(std::sqrt(var / static_cast<double>(reps)));
    out.mean_leakage.push_back(l / static_cast<double>(reps));
  }
  const RBFit fit = fit_rb_decay(out.mean_fidelity);
  out.f_bar = fit.f_bar;
  out.f_bar_err = fit.f_bar_err;
  out.fit_residuals = fit.residuals;
  return out;
}

}  // namespace cqed
