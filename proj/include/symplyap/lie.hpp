#pragma once

#include <Eigen/Dense>
#include <type_traits>
#include <vector>

#include "symplyap/errors.hpp"
#include "symplyap/symplectic.hpp"

namespace symplyap {

inline constexpr double kTolRank = 1e-9;
inline constexpr double kTolLie = 1e-9;

template <typename Scalar>
MatrixX<Scalar> bracket(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
  return a * b - b * a;
}

/// Linearly independent matrices spanning a subalgebra (or, before closure, any subspace).
template <typename Scalar>
struct LieBasis {
  std::vector<MatrixX<Scalar>> elements;
  int dim() const { return static_cast<int>(elements.size()); }
};

namespace detail {

template <typename Scalar>
inline constexpr bool is_exact_v = !std::is_floating_point_v<Scalar>;

template <typename Scalar>
VectorX<Scalar> vectorize(const MatrixX<Scalar>& m) {
  return Eigen::Map<const VectorX<Scalar>>(m.data(), m.size());
}

/// Incremental span used by the closure loop.
///
/// Floating point: rows are unit-normalized vectorizations and a candidate is
/// independent when the smallest singular value of the extended stack exceeds
/// tol_rank times the largest. Exact scalars: a reduced row-echelon form.
template <typename Scalar>
class SpanTracker {
 public:
  SpanTracker(Eigen::Index ambient, double tol_rank)
      : ambient_(ambient), tol_rank_(tol_rank), rows_(0, ambient) {}

  bool try_add(const MatrixX<Scalar>& m) {
    VectorX<Scalar> v = vectorize(m);
    if constexpr (is_exact_v<Scalar>) {
      for (std::size_t r = 0; r < echelon_.size(); ++r) {
        const Scalar f = v(pivots_[r]);
        if (f != Scalar(0)) v -= f * echelon_[r];
      }
      Eigen::Index pivot = -1;
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v(i) != Scalar(0)) {
          pivot = i;
          break;
        }
      }
      if (pivot < 0) return false;
      v /= Scalar(v(pivot));
      for (std::size_t r = 0; r < echelon_.size(); ++r) {
        const Scalar f = echelon_[r](pivot);
        if (f != Scalar(0)) echelon_[r] -= f * v;
      }
      echelon_.push_back(v);
      pivots_.push_back(pivot);
      return true;
    } else {
      const double norm = v.norm();
      if (norm == 0.0) return false;
      MatrixX<double> stack(rows_.rows() + 1, ambient_);
      stack.topRows(rows_.rows()) = rows_;
      stack.bottomRows(1) = (v / norm).transpose();
      Eigen::JacobiSVD<MatrixX<double>> svd(stack);
      const auto& sv = svd.singularValues();
      if (sv(sv.size() - 1) <= tol_rank_ * sv(0)) return false;
      rows_ = std::move(stack);
      return true;
    }
  }

 private:
  Eigen::Index ambient_;
  double tol_rank_;
  MatrixX<double> rows_;
  std::vector<VectorX<Scalar>> echelon_;
  std::vector<Eigen::Index> pivots_;
};

}  // namespace detail

/// Elementary matrix E_ij of order n.
template <typename Scalar = double>
MatrixX<Scalar> elementary(int n, int i, int j) {
  MatrixX<Scalar> e = MatrixX<Scalar>::Zero(n, n);
  e(i, j) = Scalar(1);
  return e;
}

/// X_ij = ½ [[0, E_ij + E_ji], [0, 0]] (0-based indices).
template <typename Scalar = double>
MatrixX<Scalar> basis_x(int n_channels, int i, int j) {
  const int n = n_channels;
  MatrixX<Scalar> x = MatrixX<Scalar>::Zero(2 * n, 2 * n);
  x.topRightCorner(n, n) =
      (elementary<Scalar>(n, i, j) + elementary<Scalar>(n, j, i)) / Scalar(2);
  return x;
}

/// Y_ij = ᵗX_ij.
template <typename Scalar = double>
MatrixX<Scalar> basis_y(int n_channels, int i, int j) {
  return basis_x<Scalar>(n_channels, i, j).transpose();
}

/// Z_ij = [[E_ij, 0], [0, −E_ji]].
template <typename Scalar = double>
MatrixX<Scalar> basis_z(int n_channels, int i, int j) {
  const int n = n_channels;
  MatrixX<Scalar> z = MatrixX<Scalar>::Zero(2 * n, 2 * n);
  z.topLeftCorner(n, n) = elementary<Scalar>(n, i, j);
  z.bottomRightCorner(n, n) = -elementary<Scalar>(n, j, i);
  return z;
}

/// {X_ij, Y_ij (i ≤ j), Z_ij (all i, j)}: a basis of sp_N(ℝ) with N(2N+1) elements.
template <typename Scalar = double>
LieBasis<Scalar> canonical_basis(int n_channels) {
  if (n_channels < 1) throw ArgumentError("canonical_basis: N must be >= 1");
  const int n = n_channels;
  LieBasis<Scalar> basis;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) basis.elements.push_back(basis_x<Scalar>(n, i, j));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) basis.elements.push_back(basis_y<Scalar>(n, i, j));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) basis.elements.push_back(basis_z<Scalar>(n, i, j));
  return basis;
}

/// Basis of the Lie algebra generated by `generators`: brackets are added until
/// the span stops growing. Empty input gives the zero algebra.
template <typename Scalar>
LieBasis<Scalar> lie_closure(const std::vector<MatrixX<Scalar>>& generators,
                             double tol_rank = kTolRank) {
  LieBasis<Scalar> basis;
  if (generators.empty()) return basis;
  const Eigen::Index rows = generators.front().rows();
  const Eigen::Index cols = generators.front().cols();
  for (const auto& g : generators) {
    if (g.rows() != rows || g.cols() != cols || rows != cols) {
      throw DimensionError("lie_closure: generators must be square and of equal size");
    }
  }
  detail::SpanTracker<Scalar> span(rows * cols, tol_rank);
  for (const auto& g : generators) {
    if (span.try_add(g)) basis.elements.push_back(g);
  }
  // Every new element is bracketed against all earlier ones exactly once.
  for (std::size_t k = 1; k < basis.elements.size(); ++k) {
    for (std::size_t j = 0; j < k; ++j) {
      MatrixX<Scalar> c = bracket<Scalar>(basis.elements[k], basis.elements[j]);
      if constexpr (!detail::is_exact_v<Scalar>) {
        const double norm = c.norm();
        if (norm > 0.0) c /= norm;
      }
      if (span.try_add(c)) basis.elements.push_back(std::move(c));
    }
  }
  return basis;
}

/// Least-squares distance of `m` from span(basis), relative to ‖m‖.
inline double span_residual(const LieBasis<double>& basis, const MatrixX<double>& m) {
  const double norm = m.norm();
  if (norm == 0.0) return 0.0;
  if (basis.elements.empty()) return 1.0;
  MatrixX<double> a(m.size(), basis.dim());
  for (int k = 0; k < basis.dim(); ++k) a.col(k) = detail::vectorize(basis.elements[k]);
  const VectorX<double> v = detail::vectorize(m);
  const VectorX<double> coef = a.colPivHouseholderQr().solve(v);
  return (a * coef - v).norm() / norm;
}

/// Closure check: every bracket of basis elements lies in the span within tol_lie.
inline bool is_closed(const LieBasis<double>& basis, double tol_lie = kTolLie) {
  for (int i = 0; i < basis.dim(); ++i)
    for (int j = 0; j < i; ++j)
      if (span_residual(basis, bracket<double>(basis.elements[i], basis.elements[j])) > tol_lie)
        return false;
  return true;
}

/// Rank of the vectorized stack (linear independence check).
inline int stack_rank(const LieBasis<double>& basis, double tol_rank = kTolRank) {
  if (basis.elements.empty()) return 0;
  MatrixX<double> a(basis.dim(), basis.elements.front().size());
  for (int k = 0; k < basis.dim(); ++k) {
    const VectorX<double> v = detail::vectorize(basis.elements[k]);
    a.row(k) = (v / v.norm()).transpose();
  }
  Eigen::JacobiSVD<MatrixX<double>> svd(a);
  const auto& sv = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol_rank * sv(0)) ++r;
  return r;
}

}  // namespace symplyap
