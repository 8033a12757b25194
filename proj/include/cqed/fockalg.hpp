#pragma once

// Truncated bosonic operator algebra on a tensor product of Fock spaces.
//
// Tensor-factor order for the device is fixed everywhere as
// (atom 1, atom 2, resonator); basis index = (n1 * D2 + n2) * Dr + nr,
// i.e. the last slot varies fastest (Kronecker order).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cqed/errors.hpp"

namespace cqed {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr cplx kI{0.0, 1.0};
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline constexpr std::size_t kAtom1 = 0;
inline constexpr std::size_t kAtom2 = 1;
inline constexpr std::size_t kResonator = 2;

/// Largest entry modulus (the entrywise infinity norm used for all tolerances).
template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

class SubsystemDims {
 public:
  SubsystemDims(std::initializer_list<int> dims) : SubsystemDims(std::vector<int>(dims)) {}

  explicit SubsystemDims(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw InvalidDimension("SubsystemDims: at least one subsystem required");
    for (int d : dims_) {
      if (d < 2) throw InvalidDimension("SubsystemDims: every dimension must be >= 2, got " + std::to_string(d));
    }
  }

  /// Device layout (atom 1, atom 2, resonator).
  static SubsystemDims device(int atom_dim, int resonator_dim) {
    return SubsystemDims{atom_dim, atom_dim, resonator_dim};
  }

  std::size_t size() const { return dims_.size(); }
  int operator[](std::size_t slot) const { return dims_.at(slot); }
  const std::vector<int>& values() const { return dims_; }

  Eigen::Index total() const {
    Eigen::Index n = 1;
    for (int d : dims_) n *= d;
    return n;
  }

  Eigen::Index index(std::span<const int> occupation) const {
    if (occupation.size() != dims_.size()) throw InvalidArgument("SubsystemDims::index: wrong number of occupations");
    Eigen::Index idx = 0;
    for (std::size_t s = 0; s < dims_.size(); ++s) {
      if (occupation[s] < 0 || occupation[s] >= dims_[s]) throw InvalidArgument("SubsystemDims::index: occupation out of range");
      idx = idx * dims_[s] + occupation[s];
    }
    return idx;
  }

  Eigen::Index index(std::initializer_list<int> occupation) const {
    return index(std::span<const int>(occupation.begin(), occupation.size()));
  }

  int occupation(Eigen::Index index, std::size_t slot) const {
    if (slot >= dims_.size()) throw InvalidArgument("SubsystemDims::occupation: slot out of range");
    for (std::size_t s = dims_.size(); s-- > slot + 1;) index /= dims_[s];
    return static_cast<int>(index % dims_[slot]);
  }

  std::vector<int> occupations(Eigen::Index index) const {
    std::vector<int> occ(dims_.size());
    for (std::size_t s = dims_.size(); s-- > 0;) {
      occ[s] = static_cast<int>(index % dims_[s]);
      index /= dims_[s];
    }
    return occ;
  }

  bool operator==(const SubsystemDims&) const = default;

 private:
  std::vector<int> dims_;
};

/// Dense operator tagged with its tensor structure. Immutable.
class FockOperator {
 public:
  FockOperator(Matrix matrix, SubsystemDims dims) : matrix_(std::move(matrix)), dims_(std::move(dims)) {
    if (matrix_.rows() != matrix_.cols() || matrix_.rows() != dims_.total()) {
      throw InvalidDimension("FockOperator: matrix side " + std::to_string(matrix_.rows()) + "x" +
                             std::to_string(matrix_.cols()) + " does not match total dimension " +
                             std::to_string(dims_.total()));
    }
  }

  static FockOperator identity(const SubsystemDims& dims) {
    return {Matrix::Identity(dims.total(), dims.total()), dims};
  }
  static FockOperator zero(const SubsystemDims& dims) {
    return {Matrix::Zero(dims.total(), dims.total()), dims};
  }

  const Matrix& matrix() const { return matrix_; }
  const SubsystemDims& dims() const { return dims_; }
  Eigen::Index dim() const { return matrix_.rows(); }
  cplx operator()(Eigen::Index row, Eigen::Index col) const { return matrix_(row, col); }

  FockOperator adjoint() const { return {matrix_.adjoint(), dims_}; }

  double hermiticity_defect() const { return max_abs(matrix_ - matrix_.adjoint()); }

  /// Tolerance scales with the operator magnitude; 1e-12 absolute for O(1) entries.
  bool is_hermitian(double tol = 1e-12) const {
    return hermiticity_defect() < tol * std::max(1.0, max_abs(matrix_));
  }

  friend FockOperator operator+(const FockOperator& a, const FockOperator& b) {
    check_same(a, b);
    return {a.matrix_ + b.matrix_, a.dims_};
  }
  friend FockOperator operator-(const FockOperator& a, const FockOperator& b) {
    check_same(a, b);
    return {a.matrix_ - b.matrix_, a.dims_};
  }
  friend FockOperator operator*(const FockOperator& a, const FockOperator& b) {
    check_same(a, b);
    return {a.matrix_ * b.matrix_, a.dims_};
  }
  friend FockOperator operator*(cplx s, const FockOperator& a) { return {s * a.matrix_, a.dims_}; }
  friend FockOperator operator*(double s, const FockOperator& a) { return {s * a.matrix_, a.dims_}; }
  friend FockOperator operator-(const FockOperator& a) { return {-a.matrix_, a.dims_}; }

 private:
  static void check_same(const FockOperator& a, const FockOperator& b) {
    if (!(a.dims_ == b.dims_)) throw InvalidDimension("FockOperator: mismatched subsystem dimensions");
  }

  Matrix matrix_;
  SubsystemDims dims_;
};

inline FockOperator commutator(const FockOperator& a, const FockOperator& b) { return a * b - b * a; }

/// Pure state on a tensor product space.
class StateVector {
 public:
  StateVector(Vector amplitudes, SubsystemDims dims) : amplitudes_(std::move(amplitudes)), dims_(std::move(dims)) {
    if (amplitudes_.size() != dims_.total()) throw InvalidDimension("StateVector: length does not match total dimension");
  }

  static StateVector basis(const SubsystemDims& dims, std::initializer_list<int> occupation) {
    Vector v = Vector::Zero(dims.total());
    v(dims.index(occupation)) = 1.0;
    return {std::move(v), dims};
  }

  const Vector& amplitudes() const { return amplitudes_; }
  const SubsystemDims& dims() const { return dims_; }
  Eigen::Index dim() const { return amplitudes_.size(); }
  double norm() const { return amplitudes_.norm(); }

  StateVector normalized() const {
    const double n = norm();
    if (n == 0.0) throw InvalidArgument("StateVector::normalized: zero vector");
    return {amplitudes_ / n, dims_};
  }

 private:
  Vector amplitudes_;
  SubsystemDims dims_;
};

// ---------------------------------------------------------------------------
// Single-subsystem ladder operators

inline FockOperator annihilation(int dim) {
  if (dim < 2) throw InvalidDimension("annihilation: dimension must be >= 2, got " + std::to_string(dim));
  Matrix a = Matrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return {std::move(a), SubsystemDims{dim}};
}

inline FockOperator creation(int dim) { return annihilation(dim).adjoint(); }

inline FockOperator number(int dim) {
  const FockOperator a = annihilation(dim);
  return a.adjoint() * a;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Lift a single-subsystem operator into `dims`, identity on every other slot.
inline FockOperator embed(const FockOperator& op, std::size_t slot, const SubsystemDims& dims) {
  if (slot >= dims.size()) throw InvalidArgument("embed: slot " + std::to_string(slot) + " out of range");
  if (op.dim() != dims[slot]) {
    throw InvalidDimension("embed: operator dimension " + std::to_string(op.dim()) + " does not match dims[" +
                           std::to_string(slot) + "] = " + std::to_string(dims[slot]));
  }
  Matrix out = Matrix::Identity(1, 1);
  for (std::size_t s = 0; s < dims.size(); ++s) {
    out = kron(out, s == slot ? op.matrix() : Matrix::Identity(dims[s], dims[s]));
  }
  return {std::move(out), dims};
}

inline FockOperator embed_annihilation(std::size_t slot, const SubsystemDims& dims) {
  if (slot >= dims.size()) throw InvalidArgument("embed_annihilation: slot out of range");
  return embed(annihilation(dims[slot]), slot, dims);
}

inline FockOperator embed_number(std::size_t slot, const SubsystemDims& dims) {
  if (slot >= dims.size()) throw InvalidArgument("embed_number: slot out of range");
  return embed(number(dims[slot]), slot, dims);
}

// ---------------------------------------------------------------------------
// Hermitian propagation

/// Caches the eigendecomposition of a Hermitian operator so that
/// exp(-i H t) can be evaluated for many t.
class HermitianPropagator {
 public:
  explicit HermitianPropagator(const FockOperator& hamiltonian) : dims_(hamiltonian.dims()) {
    if (!hamiltonian.is_hermitian()) {
      throw ContractViolation("expm_unitary: operator is not Hermitian (defect " +
                              std::to_string(hamiltonian.hermiticity_defect()) + ")");
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> solver(hamiltonian.matrix());
    if (solver.info() != Eigen::Success) throw ContractViolation("expm_unitary: eigendecomposition failed");
    eigenvalues_ = solver.eigenvalues();
    eigenvectors_ = solver.eigenvectors();
  }

  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Matrix& eigenvectors() const { return eigenvectors_; }
  const SubsystemDims& dims() const { return dims_; }

  FockOperator unitary(double t) const {
    const Vector phases = (-kI * t * eigenvalues_.cast<cplx>()).array().exp();
    return {eigenvectors_ * phases.asDiagonal() * eigenvectors_.adjoint(), dims_};
  }

  Vector apply(double t, const Vector& psi) const {
    Vector c = eigenvectors_.adjoint() * psi;
    c.array() *= (-kI * t * eigenvalues_.cast<cplx>()).array().exp();
    return eigenvectors_ * c;
  }

  StateVector apply(double t, const StateVector& psi) const { return {apply(t, psi.amplitudes()), dims_}; }

 private:
  SubsystemDims dims_;
  Eigen::VectorXd eigenvalues_;
  Matrix eigenvectors_;
};

/// exp(-i H t) with hbar = 1; H in rad/ns, t in ns.
inline FockOperator expm_unitary(const FockOperator& hamiltonian, double t) {
  return HermitianPropagator(hamiltonian).unitary(t);
}

inline double unitarity_defect(const Matrix& u) {
  return max_abs(u.adjoint() * u - Matrix::Identity(u.cols(), u.cols()));
}

// ---------------------------------------------------------------------------
// State utilities

/// Probability that subsystem `slot` holds at least one excitation.
inline double excited_population(const StateVector& psi, std::size_t slot) {
  const SubsystemDims& dims = psi.dims();
  if (slot >= dims.size()) throw InvalidArgument("excited_population: slot out of range");
  double p = 0.0;
  for (Eigen::Index i = 0; i < psi.dim(); ++i) {
    if (dims.occupation(i, slot) >= 1) p += std::norm(psi.amplitudes()(i));
  }
  return p;
}

/// Sum of |amplitude|^2 over basis states whose occupations satisfy `pred`.
inline double population_where(const StateVector& psi, const std::function<bool(const std::vector<int>&)>& pred) {
  double p = 0.0;
  for (Eigen::Index i = 0; i < psi.dim(); ++i) {
    if (pred(psi.dims().occupations(i))) p += std::norm(psi.amplitudes()(i));
  }
  return p;
}

/// Basis indices whose occupations are all <= max_occupation(slot).
inline std::vector<Eigen::Index> subspace_indices(const SubsystemDims& dims,
                                                  const std::function<bool(const std::vector<int>&)>& keep) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < dims.total(); ++i) {
    if (keep(dims.occupations(i))) out.push_back(i);
  }
  return out;
}

/// Every occupation at most D - 2: products of one ladder operator pair never
/// reach the truncation edge from inside this subspace.
inline std::vector<Eigen::Index> truncation_safe_indices(const SubsystemDims& dims) {
  return subspace_indices(dims, [&dims](const std::vector<int>& occ) {
    for (std::size_t s = 0; s < occ.size(); ++s) {
      if (occ[s] > dims[s] - 2) return false;
    }
    return true;
  });
}

inline Matrix restrict_to(const Matrix& m, const std::vector<Eigen::Index>& indices) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = m(indices[i], indices[j]);
  }
  return out;
}

}  // namespace cqed
