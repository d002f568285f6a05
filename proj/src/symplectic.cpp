#include "symplyap/symplectic.hpp"

#include <Eigen/Eigenvalues>

namespace symplyap {

HamiltonianMatrix HamiltonianMatrix::from_potential(MatrixX<double> potential, double tol) {
  if (potential.rows() != potential.cols() || potential.rows() == 0) {
    throw DimensionError("HamiltonianMatrix: potential block must be square and nonempty");
  }
  const double asym = spectral_norm(potential - potential.transpose());
  if (asym > tol * std::max(1.0, potential.cwiseAbs().maxCoeff())) {
    throw StructureError("HamiltonianMatrix: potential block is not symmetric (‖M − ᵗM‖ = " +
                         std::to_string(asym) + ")");
  }
  MatrixX<double> sym = 0.5 * (potential + potential.transpose());
  return HamiltonianMatrix(std::move(sym));
}

HamiltonianMatrix HamiltonianMatrix::from_entries(const MatrixX<double>& entries, double tol) {
  if (entries.rows() != entries.cols() || entries.rows() % 2 != 0 || entries.rows() == 0) {
    throw DimensionError("HamiltonianMatrix: expected a square matrix of even size");
  }
  const Eigen::Index n = entries.rows() / 2;
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  const bool zero_diag = entries.topLeftCorner(n, n).cwiseAbs().maxCoeff() <= tol * scale &&
                         entries.bottomRightCorner(n, n).cwiseAbs().maxCoeff() <= tol * scale;
  const bool identity_block =
      (entries.topRightCorner(n, n) - MatrixX<double>::Identity(n, n)).cwiseAbs().maxCoeff() <=
      tol * scale;
  if (!zero_diag || !identity_block) {
    throw StructureError("HamiltonianMatrix: entries are not of the form [[0, I], [M, 0]]");
  }
  return from_potential(entries.bottomLeftCorner(n, n), tol);
}

MatrixX<double> HamiltonianMatrix::entries() const {
  const Eigen::Index n = potential_.rows();
  MatrixX<double> x = MatrixX<double>::Zero(2 * n, 2 * n);
  x.topRightCorner(n, n).setIdentity();
  x.bottomLeftCorner(n, n) = potential_;
  return x;
}

MatrixX<double> exp_hamiltonian_block(const MatrixX<double>& potential, double length) {
  const Eigen::Index n = potential.rows();
  Eigen::SelfAdjointEigenSolver<MatrixX<double>> eig(potential);
  const VectorX<double>& lambda = eig.eigenvalues();
  const MatrixX<double>& q = eig.eigenvectors();

  VectorX<double> c(n), s(n), ms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = length * length * lambda(i);
    c(i) = cosh_sqrt(z);
    s(i) = length * sinhc_sqrt(z);
    ms(i) = lambda(i) * s(i);
  }
  MatrixX<double> t(2 * n, 2 * n);
  t.topLeftCorner(n, n) = q * c.asDiagonal() * q.transpose();
  t.topRightCorner(n, n) = q * s.asDiagonal() * q.transpose();
  t.bottomLeftCorner(n, n) = q * ms.asDiagonal() * q.transpose();
  t.bottomRightCorner(n, n) = t.topLeftCorner(n, n);
  return t;
}

SymplecticMatrix matrix_exponential(const HamiltonianMatrix& x, double length) {
  if (!(length >= 0.0) || !std::isfinite(length)) {
    throw ArgumentError("matrix_exponential: length must be finite and nonnegative");
  }
  MatrixX<double> t = exp_hamiltonian_block(x.potential(), length);
  const double norm = t.cwiseAbs().rowwise().sum().maxCoeff();
  const double residual = symplectic_residual(t);
  if (residual > kTolSymp * std::max(1.0, norm * norm)) {
    throw StructureError("matrix_exponential: result lost symplectic structure (residual " +
                         std::to_string(residual) + ")");
  }
  return SymplecticMatrix(std::move(t));
}

SymplecticMatrix SymplecticMatrix::from_entries(MatrixX<double> entries, double tol) {
  const double residual = symplectic_residual(entries);
  const double norm = spectral_norm(entries);
  if (residual > tol * std::max(1.0, norm * norm)) {
    throw StructureError("SymplecticMatrix: symplectic residual " + std::to_string(residual) +
                         " exceeds tolerance");
  }
  return SymplecticMatrix(std::move(entries));
}

std::vector<std::vector<int>> combinations(int n, int p) {
  std::vector<std::vector<int>> out;
  if (p < 0 || p > n) return out;
  std::vector<int> idx(p);
  for (int i = 0; i < p; ++i) idx[i] = i;
  while (true) {
    out.push_back(idx);
    int i = p - 1;
    while (i >= 0 && idx[i] == n - p + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < p; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

}  // namespace symplyap
