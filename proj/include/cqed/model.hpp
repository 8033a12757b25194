#pragma once

// Device parameters, Hamiltonian builders and closed-form effective theory
// for two anharmonic atoms sharing one resonator.
//
// Units: parameters are ordinary frequencies in GHz and times in ns.  The
// closed-form calculators (eta, g_eff, g_res, idle points, Rabi rates) stay in
// GHz; every operator builder returns rad/ns, i.e. carries the factor 2*pi.

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cqed/errors.hpp"
#include "cqed/fockalg.hpp"

namespace cqed {

inline constexpr double kDenominatorGuard = 1e-9;

struct SystemParams {
  double f_r = 6.0;
  double f_1 = 3.0;
  double f_2 = 3.0;
  double alpha_1 = 0.3;
  double alpha_2 = 0.3;
  double g_1 = 0.08;
  double g_2 = 0.08;
  double g_p = 0.004;
  SubsystemDims dims = SubsystemDims{5, 5, 5};

  double delta_1() const { return f_r - f_1; }
  double delta_2() const { return f_r - f_2; }

  void validate() const {
    if (dims.size() != 3) throw InvalidDimension("SystemParams: dims must list (atom1, atom2, resonator)");
    if (!(f_r > 0.0) || !(f_1 > 0.0) || !(f_2 > 0.0)) throw InvalidArgument("SystemParams: frequencies must be positive");
    if (g_1 < 0.0 || g_2 < 0.0) throw InvalidArgument("SystemParams: atom-resonator couplings must be >= 0");
    for (double v : {f_r, f_1, f_2, alpha_1, alpha_2, g_1, g_2, g_p}) {
      if (!std::isfinite(v)) throw InvalidArgument("SystemParams: non-finite parameter");
    }
  }

  /// Non-fatal: dispersive treatment is doubtful when |f_r - f_k| < 5 g_k.
  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    if (std::abs(delta_1()) < 5.0 * g_1) out.push_back("atom 1 outside dispersive regime: |f_r - f_1| < 5 g_1");
    if (std::abs(delta_2()) < 5.0 * g_2) out.push_back("atom 2 outside dispersive regime: |f_r - f_2| < 5 g_2");
    return out;
  }
};

// ---------------------------------------------------------------------------
// Drives

/// Drive amplitude profile: constant inside [t_start, t_stop], or flat top
/// with raised-cosine edges.  Zero outside the window.
class Envelope {
 public:
  static Envelope constant(double amplitude, double t_start = 0.0,
                           double t_stop = std::numeric_limits<double>::infinity()) {
    return Envelope(amplitude, 0.0, t_stop - t_start, t_start);
  }

  static Envelope flat_top(double amplitude, double ramp_ns, double hold_ns, double t_start = 0.0) {
    return Envelope(amplitude, ramp_ns, hold_ns, t_start);
  }

  static Envelope off() { return Envelope(0.0, 0.0, 0.0, 0.0); }

  double operator()(double t) const {
    if (t < t_start_ || t > t_stop()) return 0.0;
    const double s = t - t_start_;
    if (ramp_ > 0.0) {
      if (s < ramp_) return amplitude_ * 0.5 * (1.0 - std::cos(kPi * s / ramp_));
      const double tail = t_stop() - t;
      if (tail < ramp_) return amplitude_ * 0.5 * (1.0 - std::cos(kPi * tail / ramp_));
    }
    return amplitude_;
  }

  double amplitude() const { return amplitude_; }
  double ramp() const { return ramp_; }
  double hold() const { return hold_; }
  double t_start() const { return t_start_; }
  double t_stop() const { return t_start_ + 2.0 * ramp_ + hold_; }

  /// Integral of the envelope over its window (GHz * ns).
  double area() const { return amplitude_ * (hold_ + ramp_); }

  /// Integral from t_start to t.
  double area_until(double t) const {
    if (t <= t_start_) return 0.0;
    t = std::min(t, t_stop());
    const double s = t - t_start_;
    auto ramp_area = [this](double x) {  // rising edge area over [0, x]
      return amplitude_ * 0.5 * (x - ramp_ / kPi * std::sin(kPi * x / ramp_));
    };
    if (ramp_ <= 0.0) return amplitude_ * s;
    if (s <= ramp_) return ramp_area(s);
    if (s <= ramp_ + hold_) return ramp_area(ramp_) + amplitude_ * (s - ramp_);
    const double tail = t_stop() - t;
    return area() - ramp_area(tail);
  }

 private:
  Envelope(double amplitude, double ramp, double hold, double t_start)
      : amplitude_(amplitude), ramp_(ramp), hold_(hold), t_start_(t_start) {
    if (amplitude_ < 0.0) throw InvalidArgument("Envelope: amplitude must be >= 0");
    if (ramp_ < 0.0 || hold_ < 0.0) throw InvalidArgument("Envelope: ramp and hold must be >= 0");
  }

  double amplitude_;
  double ramp_;
  double hold_;
  double t_start_;
};

struct DriveTone {
  Envelope envelope = Envelope::off();
  double f_d = 0.0;    // GHz
  double phi_d = 0.0;  // rad

  /// e^{-i w_d t + i phi_d}
  cplx carrier(double t) const { return std::exp(kI * (phi_d - kTwoPi * f_d * t)); }
};

using DriveSet = std::vector<DriveTone>;

// ---------------------------------------------------------------------------
// Operator pieces (rad/ns)

namespace detail {

inline void require_device(const SystemParams& p) {
  p.validate();
}

inline FockOperator kerr(std::size_t slot, const SubsystemDims& dims) {
  const FockOperator a = embed_annihilation(slot, dims);
  const FockOperator ad = a.adjoint();
  return ad * ad * a * a;
}

inline FockOperator hop(std::size_t from, std::size_t to, const SubsystemDims& dims) {
  // a_to^dagger a_from + h.c.
  const FockOperator x = embed_annihilation(to, dims).adjoint() * embed_annihilation(from, dims);
  return x + x.adjoint();
}

}  // namespace detail

/// w_r r^dagger r
inline FockOperator build_H_resonator(const SystemParams& p) {
  detail::require_device(p);
  return (kTwoPi * p.f_r) * embed_number(kResonator, p.dims);
}

/// (alpha_n / 2) a^dagger a^dagger a a summed over atoms.
inline FockOperator build_H_alpha(const SystemParams& p) {
  detail::require_device(p);
  return (kTwoPi * p.alpha_1 / 2.0) * detail::kerr(kAtom1, p.dims) +
         (kTwoPi * p.alpha_2 / 2.0) * detail::kerr(kAtom2, p.dims);
}

/// Bare atom energies plus the direct (parasitic) atom-atom hop.
inline FockOperator build_H_atoms(const SystemParams& p) {
  detail::require_device(p);
  return (kTwoPi * p.f_1) * embed_number(kAtom1, p.dims) + (kTwoPi * p.f_2) * embed_number(kAtom2, p.dims) +
         (kTwoPi * p.g_p) * detail::hop(kAtom1, kAtom2, p.dims);
}

/// Atom-resonator exchange g_k (a_k^dagger r + h.c.).
inline FockOperator build_H_int(const SystemParams& p) {
  detail::require_device(p);
  return (kTwoPi * p.g_1) * detail::hop(kResonator, kAtom1, p.dims) +
         (kTwoPi * p.g_2) * detail::hop(kResonator, kAtom2, p.dims);
}

inline FockOperator build_H0(const SystemParams& p) {
  detail::require_device(p);
  return build_H_resonator(p) + (kTwoPi * p.f_1) * embed_number(kAtom1, p.dims) +
         (kTwoPi * p.f_2) * embed_number(kAtom2, p.dims) + build_H_alpha(p);
}

inline FockOperator build_Hcpg(const SystemParams& p) {
  detail::require_device(p);
  return build_H_int(p) + (kTwoPi * p.g_p) * detail::hop(kAtom1, kAtom2, p.dims);
}

inline FockOperator build_Hdrive(const SystemParams& p, const DriveSet& tones, double t) {
  detail::require_device(p);
  const FockOperator rd = embed_annihilation(kResonator, p.dims).adjoint();
  Matrix h = Matrix::Zero(p.dims.total(), p.dims.total());
  for (const DriveTone& tone : tones) {
    const double eps = tone.envelope(t);
    if (eps == 0.0) continue;
    const Matrix term = (kTwoPi * eps * tone.carrier(t)) * rd.matrix();
    h += term + term.adjoint();
  }
  return {std::move(h), p.dims};
}

/// Omega_{k,n}(t) = -g_k eps_n(t) / (f_r - f_{d,n}), GHz.
inline double rabi_rate(const SystemParams& p, std::size_t atom_slot, const DriveTone& tone, double t) {
  const double delta_r = p.f_r - tone.f_d;
  if (std::abs(delta_r) < kDenominatorGuard) throw SingularDetuning("drive resonant with the resonator: f_d = f_r");
  const double g = atom_slot == kAtom1 ? p.g_1 : p.g_2;
  return -g * tone.envelope(t) / delta_r;
}

inline FockOperator build_semiclassical_drive(const SystemParams& p, const DriveSet& tones, double t) {
  detail::require_device(p);
  Matrix h = Matrix::Zero(p.dims.total(), p.dims.total());
  for (std::size_t slot : {kAtom1, kAtom2}) {
    const Matrix ad = embed_annihilation(slot, p.dims).adjoint().matrix();
    for (const DriveTone& tone : tones) {
      const double omega = rabi_rate(p, slot, tone, t);
      if (omega == 0.0) continue;
      const Matrix term = (kTwoPi * omega * tone.carrier(t)) * ad;
      h += term + term.adjoint();
    }
  }
  return {std::move(h), p.dims};
}

// ---------------------------------------------------------------------------
// Effective theory (GHz)

struct Eta {
  double eta_1;
  double eta_2;
};

inline Eta eta_coefficients(const SystemParams& p) {
  const double d1 = p.delta_1();
  const double d2 = p.delta_2();
  const double den = p.g_p * p.g_p - d1 * d2;
  if (std::abs(den) < kDenominatorGuard) {
    throw DegenerateTransformation("eta_coefficients: g_p^2 - Delta1*Delta2 vanishes");
  }
  return {(p.g_p * p.g_2 + d2 * p.g_1) / den, (p.g_p * p.g_1 + d1 * p.g_2) / den};
}

inline double g_eff(const SystemParams& p) {
  const double d1 = p.delta_1();
  const double d2 = p.delta_2();
  const double den = p.g_p * p.g_p - d1 * d2;
  if (std::abs(den) < kDenominatorGuard) throw DegenerateTransformation("g_eff: g_p^2 - Delta1*Delta2 vanishes");
  return p.g_p + (p.g_p * (p.g_1 * p.g_1 + p.g_2 * p.g_2) + p.g_1 * p.g_2 * (d1 + d2)) / (2.0 * den);
}

struct ResidualCoupling {
  double g_res;                    // GHz
  std::optional<double> dt_leak;  // ns; absent when g_res == 0
};

inline ResidualCoupling g_res(const SystemParams& p) {
  const double d1 = p.delta_1();
  const double d2 = p.delta_2();
  if (std::abs(d1) < kDenominatorGuard || std::abs(d2) < kDenominatorGuard) {
    throw SingularDetuning("g_res: an atom is resonant with the resonator");
  }
  const double g = -p.g_1 * p.g_2 * (d1 + d2) / (2.0 * d1 * d2);
  ResidualCoupling out{g, std::nullopt};
  if (g != 0.0) out.dt_leak = 1.0 / (4.0 * std::abs(g));
  return out;
}

/// Resonator frequency cancelling g_eff for degenerate atoms at f_qubit.
inline double idle_frequency_degenerate(double f_qubit, const SystemParams& p) {
  if (std::abs(p.g_p) < 1e-12) throw NoIdlePoint("idle_frequency_degenerate: requires g_p != 0");
  const double gp2 = 2.0 * p.g_p * p.g_p;
  return f_qubit + (std::sqrt((gp2 + p.g_1 * p.g_1) * (gp2 + p.g_2 * p.g_2)) + p.g_1 * p.g_2) / (2.0 * p.g_p);
}

/// Root of g_eff(f_r) by bisection for arbitrary f_1, f_2.
inline double idle_frequency_general(const SystemParams& p) {
  if (!(p.g_p > 0.0)) throw NoIdlePoint("idle_frequency_general: requires g_p > 0");
  const double f_top = std::max(p.f_1, p.f_2);
  const double g_top = std::max(p.g_1, p.g_2);
  SystemParams q = p;
  auto geff_at = [&q](double f_r) {
    q.f_r = f_r;
    return g_eff(q);
  };
  double lo = f_top + 5.0 * g_top;
  double hi = f_top + 100.0 * g_top;
  double g_lo = geff_at(lo);
  const double g_hi = geff_at(hi);
  if (g_lo == 0.0) return lo;
  if (g_hi == 0.0) return hi;
  if ((g_lo > 0.0) == (g_hi > 0.0)) {
    throw NoIdlePoint("idle_frequency_general: g_eff has no sign change in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "] GHz");
  }
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    const double g_mid = geff_at(mid);
    if (g_mid == 0.0) return mid;
    if ((g_mid > 0.0) == (g_lo > 0.0)) {
      lo = mid;
      g_lo = g_mid;
    } else {
      hi = mid;
    }
  }
  const double root = 0.5 * (lo + hi);
  if (std::abs(geff_at(root)) > 1e-6) throw NoIdlePoint("idle_frequency_general: bracket straddles a pole, not a root");
  return root;
}

struct EffectiveParams {
  double eta_1;
  double eta_2;
  double f_r_shift;
  double f_1_shift;
  double f_2_shift;
  double g_eff;
  double g_res;
  std::optional<double> dt_leak;
};

inline EffectiveParams effective_params(const SystemParams& p) {
  const Eta eta = eta_coefficients(p);
  const ResidualCoupling res = g_res(p);
  return {eta.eta_1,
          eta.eta_2,
          p.f_r - p.g_1 * eta.eta_1 - p.g_2 * eta.eta_2,
          p.f_1 + p.g_1 * eta.eta_1,
          p.f_2 + p.g_2 * eta.eta_2,
          g_eff(p),
          res.g_res,
          res.dt_leak};
}

/// Dispersive model with shifted frequencies and direct coupling g_eff;
/// the anharmonic BCH correction is left out.
inline FockOperator effective_hamiltonian(const SystemParams& p) {
  detail::require_device(p);
  const Eta eta = eta_coefficients(p);
  const double fr = p.f_r - p.g_1 * eta.eta_1 - p.g_2 * eta.eta_2;
  const double f1 = p.f_1 + p.g_1 * eta.eta_1;
  const double f2 = p.f_2 + p.g_2 * eta.eta_2;
  // g_p plus half the hop generated by [S, H_int]
  const double ge = g_eff(p);
  return (kTwoPi * fr) * embed_number(kResonator, p.dims) + (kTwoPi * f1) * embed_number(kAtom1, p.dims) +
         (kTwoPi * f2) * embed_number(kAtom2, p.dims) + build_H_alpha(p) +
         (kTwoPi * ge) * detail::hop(kAtom1, kAtom2, p.dims);
}

/// S = eta_1 (a1^dagger r - a1 r^dagger) + eta_2 (a2^dagger r - a2 r^dagger); anti-Hermitian.
inline FockOperator bch_generator(const SystemParams& p) {
  detail::require_device(p);
  const Eta eta = eta_coefficients(p);
  const FockOperator r = embed_annihilation(kResonator, p.dims);
  auto piece = [&](std::size_t slot) {
    const FockOperator a = embed_annihilation(slot, p.dims);
    const FockOperator x = a.adjoint() * r;
    return x - x.adjoint();
  };
  return eta.eta_1 * piece(kAtom1) + eta.eta_2 * piece(kAtom2);
}

/// R = exp(S), the unitary mapping bare states to the dispersive frame.
inline FockOperator dressing_unitary(const SystemParams& p) {
  const FockOperator s = bch_generator(p);
  return expm_unitary(kI * s, 1.0);  // exp(-i (iS)) = exp(S)
}

/// || [S, H_alpha] psi || in rad/ns: size of the term dropped from the effective model.
inline double anharmonic_correction_norm(const SystemParams& p, const StateVector& psi) {
  const FockOperator c = commutator(bch_generator(p), build_H_alpha(p));
  return (c.matrix() * psi.amplitudes()).norm();
}

// ---------------------------------------------------------------------------
// Resultant phasor seen by each atom

struct AtomPhasor {
  double omega;  // GHz, signed for a single tone
  double f;      // GHz
  double phi;    // rad
};

struct ResultantPhasor {
  AtomPhasor atom1;
  AtomPhasor atom2;
};

inline AtomPhasor resultant_phasor_atom(const SystemParams& p, std::size_t slot, const DriveSet& tones, double t) {
  if (tones.empty()) return {0.0, 0.0, 0.0};
  if (tones.size() == 1) return {rabi_rate(p, slot, tones[0], t), tones[0].f_d, tones[0].phi_d};
  cplx z = 0.0;
  cplx dz = 0.0;  // carrier derivative at frozen envelopes
  for (const DriveTone& tone : tones) {
    const cplx term = rabi_rate(p, slot, tone, t) * tone.carrier(t);
    z += term;
    dz += -kI * kTwoPi * tone.f_d * term;
  }
  const double amp = std::abs(z);
  if (amp < 1e-15) return {0.0, tones[0].f_d, 0.0};
  // z = amp e^{-i w t + i phi}
  const double w = -std::imag(dz / z);
  const double phi = std::remainder(std::arg(z) + w * t, kTwoPi);
  return {amp, w / kTwoPi, phi};
}

inline ResultantPhasor resultant_phasor(const SystemParams& p, const DriveSet& tones, double t) {
  return {resultant_phasor_atom(p, kAtom1, tones, t), resultant_phasor_atom(p, kAtom2, tones, t)};
}

// ---------------------------------------------------------------------------
// Two-level reductions on dims {2, 2}, basis |00>, |01>, |10>, |11>

using QubitHamiltonian = std::function<FockOperator(double)>;

namespace detail {

struct QubitOps {
  SubsystemDims dims{2, 2};
  FockOperator sm1 = embed_annihilation(0, dims);
  FockOperator sm2 = embed_annihilation(1, dims);
  FockOperator n1 = embed_number(0, dims);
  FockOperator n2 = embed_number(1, dims);
  FockOperator hop = sm1.adjoint() * sm2 + sm2.adjoint() * sm1;
};

}  // namespace detail

/// Single-tone rotating frame at w_d: detunings w~_k - w_d, static drive phase.
inline QubitHamiltonian qubit_rotating_frame(const SystemParams& p, const DriveSet& tones) {
  if (tones.size() != 1) throw UnsupportedFrame("qubit_rotating_frame: defined for exactly one drive tone");
  const EffectiveParams eff = effective_params(p);
  const DriveTone tone = tones[0];
  const detail::QubitOps ops;
  const FockOperator stat = (kTwoPi * (eff.f_1_shift - tone.f_d)) * ops.n1 +
                            (kTwoPi * (eff.f_2_shift - tone.f_d)) * ops.n2 + (kTwoPi * eff.g_eff) * ops.hop;
  const SystemParams pc = p;
  return [stat, ops, tone, pc](double t) {
    FockOperator h = stat;
    const cplx ph = std::exp(kI * tone.phi_d);
    for (std::size_t k : {kAtom1, kAtom2}) {
      const double om = rabi_rate(pc, k, tone, t);
      const FockOperator& sm = k == kAtom1 ? ops.sm1 : ops.sm2;
      const FockOperator x = (kTwoPi * om * ph) * sm.adjoint();
      h = h + x + x.adjoint();
    }
    return h;
  };
}

/// Lab-frame two-level model driven by the resultant phasors of all tones.
inline QubitHamiltonian qubit_lab_hamiltonian(const SystemParams& p, const DriveSet& tones) {
  const EffectiveParams eff = effective_params(p);
  const detail::QubitOps ops;
  const FockOperator stat = (kTwoPi * eff.f_1_shift) * ops.n1 + (kTwoPi * eff.f_2_shift) * ops.n2 +
                            (kTwoPi * eff.g_eff) * ops.hop;
  const SystemParams pc = p;
  const DriveSet tc = tones;
  return [stat, ops, tc, pc](double t) {
    FockOperator h = stat;
    for (std::size_t k : {kAtom1, kAtom2}) {
      cplx z = 0.0;
      for (const DriveTone& tone : tc) z += rabi_rate(pc, k, tone, t) * tone.carrier(t);
      const FockOperator& sm = k == kAtom1 ? ops.sm1 : ops.sm2;
      const FockOperator x = (kTwoPi * z) * sm.adjoint();
      h = h + x + x.adjoint();
    }
    return h;
  };
}

// ---------------------------------------------------------------------------
// Integrator-facing representation
//
// H(t) = H_static + sum_c [ c(t) X_c + conj(c(t)) X_c^dagger ] expressed in a
// frame rotating at f_frame on every mode (U = exp(i 2 pi f_frame N t)).  N
// commutes with H0 + Hcpg and with H_eff, so the frame only removes
// f_frame * N from the static part and shifts drive carriers; Fock-basis
// populations are frame independent.

using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

struct DriveChannel {
  SparseMatrix raising;                        // X_c
  std::function<cplx(double)> coefficient;     // c(t), rad/ns
  double peak = 0.0;                           // bound on |c(t)|, rad/ns
};

struct DrivenHamiltonian {
  SubsystemDims dims = SubsystemDims{2};
  SparseMatrix static_part;
  std::vector<DriveChannel> channels;
  double frame_frequency = 0.0;  // GHz

  Eigen::Index dim() const { return static_part.rows(); }

  /// out = H(t) psi; psi may be a vector or a block of columns.
  template <class In, class Out>
  void apply(double t, const In& psi, Out& out) const {
    out.noalias() = static_part * psi;
    for (const DriveChannel& ch : channels) {
      const cplx c = ch.coefficient(t);
      if (c == 0.0) continue;
      out.noalias() += c * (ch.raising * psi);
      out.noalias() += std::conj(c) * (ch.raising.adjoint() * psi);
    }
  }

  FockOperator at(double t) const {
    Matrix h = Matrix(static_part);
    for (const DriveChannel& ch : channels) {
      const Matrix x = ch.coefficient(t) * Matrix(ch.raising);
      h += x + x.adjoint();
    }
    return {std::move(h), dims};
  }

  /// Gershgorin bound on the spectral radius, GHz.
  double frequency_scale() const {
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(dim());
    for (Eigen::Index i = 0; i < static_part.outerSize(); ++i) {
      for (SparseMatrix::InnerIterator it(static_part, i); it; ++it) rows(i) += std::abs(it.value());
    }
    for (const DriveChannel& ch : channels) {
      const SparseMatrix both = SparseMatrix(ch.raising) + SparseMatrix(ch.raising.adjoint());
      for (Eigen::Index i = 0; i < both.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(both, i); it; ++it) rows(i) += ch.peak * std::abs(it.value());
      }
    }
    return rows.size() == 0 ? 0.0 : rows.maxCoeff() / kTwoPi;
  }
};

namespace detail {

inline FockOperator total_number(const SubsystemDims& dims) {
  FockOperator n = FockOperator::zero(dims);
  for (std::size_t s = 0; s < dims.size(); ++s) n = n + embed_number(s, dims);
  return n;
}

inline DriveChannel tone_channel(const Matrix& raising, const DriveTone& tone, double scale, double frame_f) {
  DriveChannel ch;
  ch.raising = raising.sparseView();
  const double df = tone.f_d - frame_f;
  ch.coefficient = [tone, scale, df](double t) {
    const double eps = tone.envelope(t);
    if (eps == 0.0) return cplx(0.0);
    return kTwoPi * scale * eps * std::exp(kI * (tone.phi_d - kTwoPi * df * t));
  };
  ch.peak = kTwoPi * std::abs(scale) * tone.envelope.amplitude();
  return ch;
}

}  // namespace detail

/// Full device Hamiltonian (resonator-driven) in a frame rotating at frame_f.
inline DrivenHamiltonian lab_hamiltonian(const SystemParams& p, const DriveSet& tones, double frame_f = 0.0) {
  DrivenHamiltonian h;
  h.dims = p.dims;
  h.frame_frequency = frame_f;
  const FockOperator stat = build_H0(p) + build_Hcpg(p) - (kTwoPi * frame_f) * detail::total_number(p.dims);
  h.static_part = stat.matrix().sparseView();
  const Matrix rd = embed_annihilation(kResonator, p.dims).adjoint().matrix();
  for (const DriveTone& tone : tones) h.channels.push_back(detail::tone_channel(rd, tone, 1.0, frame_f));
  return h;
}

/// Effective model with the semiclassical atom drive, same frame convention.
inline DrivenHamiltonian effective_driven_hamiltonian(const SystemParams& p, const DriveSet& tones,
                                                      double frame_f = 0.0) {
  DrivenHamiltonian h;
  h.dims = p.dims;
  h.frame_frequency = frame_f;
  const FockOperator stat = effective_hamiltonian(p) - (kTwoPi * frame_f) * detail::total_number(p.dims);
  h.static_part = stat.matrix().sparseView();
  for (std::size_t slot : {kAtom1, kAtom2}) {
    const Matrix ad = embed_annihilation(slot, p.dims).adjoint().matrix();
    const double g = slot == kAtom1 ? p.g_1 : p.g_2;
    for (const DriveTone& tone : tones) {
      const double delta_r = p.f_r - tone.f_d;
      if (std::abs(delta_r) < kDenominatorGuard) throw SingularDetuning("drive resonant with the resonator: f_d = f_r");
      h.channels.push_back(detail::tone_channel(ad, tone, -g / delta_r, frame_f));
    }
  }
  return h;
}

/// Wrap a constant operator (no drive) for the integrator.
inline DrivenHamiltonian static_hamiltonian(const FockOperator& op) {
  DrivenHamiltonian h;
  h.dims = op.dims();
  h.static_part = op.matrix().sparseView();
  return h;
}

}  // namespace cqed
