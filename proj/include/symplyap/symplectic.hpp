#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "symplyap/errors.hpp"

namespace symplyap {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kTolSymp = 1e-10;

/// J = [[0, -I], [I, 0]] of order 2N.
template <typename Scalar = double>
MatrixX<Scalar> standard_J(int n_channels) {
  const int n = n_channels;
  MatrixX<Scalar> J = MatrixX<Scalar>::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    J(i, n + i) = Scalar(-1);
    J(n + i, i) = Scalar(1);
  }
  return J;
}

/// Largest singular value.
template <typename Derived>
double spectral_norm(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixX<double>> svd(m.template cast<double>());
  return svd.singularValues()(0);
}

/// ‖ᵗM J M − J‖ in the spectral norm.
template <typename Derived>
double symplectic_residual(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols() || m.rows() % 2 != 0 || m.rows() == 0) {
    throw DimensionError("symplectic_residual: expected a square matrix of even size, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  using Scalar = typename Derived::Scalar;
  const MatrixX<Scalar> J = standard_J<Scalar>(static_cast<int>(m.rows() / 2));
  return spectral_norm(m.transpose() * J * m - J);
}

/// T⁻¹ = −J ᵗT J for T symplectic.
template <typename Derived>
MatrixX<typename Derived::Scalar> symplectic_inverse(const Eigen::MatrixBase<Derived>& t) {
  using Scalar = typename Derived::Scalar;
  const MatrixX<Scalar> J = standard_J<Scalar>(static_cast<int>(t.rows() / 2));
  return -(J * t.transpose() * J);
}

/// Element of sp_N(ℝ) of the form [[0, I], [M, 0]] with M symmetric.
class HamiltonianMatrix {
 public:
  static HamiltonianMatrix from_potential(MatrixX<double> potential, double tol = kTolSymp);
  static HamiltonianMatrix from_entries(const MatrixX<double>& entries, double tol = kTolSymp);

  int n_channels() const { return static_cast<int>(potential_.rows()); }
  const MatrixX<double>& potential() const { return potential_; }
  MatrixX<double> entries() const;

 private:
  explicit HamiltonianMatrix(MatrixX<double> potential) : potential_(std::move(potential)) {}
  MatrixX<double> potential_;
};

/// Dense 2N×2N real matrix with ᵗMJM = J up to tolerance.
///
/// The check is relative, ‖ᵗMJM − J‖ ≤ tol·max(1, ‖M‖²), since the residual of a
/// correctly rounded symplectic matrix scales with ‖M‖².
class SymplecticMatrix {
 public:
  static SymplecticMatrix from_entries(MatrixX<double> entries, double tol = kTolSymp);

  int n_channels() const { return static_cast<int>(entries_.rows() / 2); }
  const MatrixX<double>& entries() const { return entries_; }
  double residual() const { return symplectic_residual(entries_); }

  SymplecticMatrix operator*(const SymplecticMatrix& other) const {
    return SymplecticMatrix(entries_ * other.entries_);
  }
  SymplecticMatrix inverse() const { return SymplecticMatrix(symplectic_inverse(entries_)); }

 private:
  explicit SymplecticMatrix(MatrixX<double> entries) : entries_(std::move(entries)) {}
  MatrixX<double> entries_;
  friend SymplecticMatrix matrix_exponential(const HamiltonianMatrix&, double);
};

/// cosh(√z) continued to z < 0 as cos(√−z).
inline double cosh_sqrt(double z) {
  return z >= 0.0 ? std::cosh(std::sqrt(z)) : std::cos(std::sqrt(-z));
}

/// sinh(√z)/√z continued to z < 0 as sin(√−z)/√−z, equal to 1 at z = 0.
inline double sinhc_sqrt(double z) {
  if (z == 0.0) return 1.0;
  if (z > 0.0) {
    const double s = std::sqrt(z);
    return std::sinh(s) / s;
  }
  const double s = std::sqrt(-z);
  return std::sin(s) / s;
}

/// exp(ℓ·[[0, I], [M, 0]]) from the eigendecomposition of M, without the SymplecticMatrix check.
MatrixX<double> exp_hamiltonian_block(const MatrixX<double>& potential, double length);

/// exp(ℓX) computed blockwise: with M = QΛᵗQ,
/// exp(ℓX) = [[C(ℓ²M), ℓS(ℓ²M)], [ℓMS(ℓ²M), C(ℓ²M)]], C(z)=cosh√z, S(z)=sinh√z/√z.
SymplecticMatrix matrix_exponential(const HamiltonianMatrix& x, double length);

/// Lexicographically ordered p-subsets of {0, …, n−1}.
std::vector<std::vector<int>> combinations(int n, int p);

inline long long binomial(int n, int p) {
  if (p < 0 || p > n) return 0;
  long long r = 1;
  for (int i = 1; i <= p; ++i) r = r * (n - p + i) / i;
  return r;
}

template <typename Scalar>
struct WedgeMatrix {
  MatrixX<Scalar> entries;
  int p = 1;
};

/// p-th exterior power: entry (I, J) is the minor det M[I, J] for sorted index
/// tuples I, J in lexicographic order.
template <typename Derived>
WedgeMatrix<typename Derived::Scalar> wedge_power(const Eigen::MatrixBase<Derived>& m, int p) {
  using Scalar = typename Derived::Scalar;
  const int n = static_cast<int>(m.rows());
  if (m.rows() != m.cols()) throw DimensionError("wedge_power: matrix must be square");
  if (p < 1 || p > n) {
    throw ArgumentError("wedge_power: order p=" + std::to_string(p) + " outside [1, " +
                        std::to_string(n) + "]");
  }
  const auto subsets = combinations(n, p);
  const auto k = static_cast<Eigen::Index>(subsets.size());
  WedgeMatrix<Scalar> out{MatrixX<Scalar>(k, k), p};
  MatrixX<Scalar> minor(p, p);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c) minor(r, c) = m(subsets[a][r], subsets[b][c]);
      out.entries(a, b) = p == 1 ? minor(0, 0) : Scalar(minor.determinant());
    }
  }
  return out;
}

}  // namespace symplyap
