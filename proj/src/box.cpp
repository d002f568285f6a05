#include "symplyap/box.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "symplyap/errors.hpp"
#include "symplyap/rng.hpp"

namespace symplyap {

BoxOperator::BoxOperator(ModelConfig cfg, DisorderRealization realization, int half_cells,
                         int mesh_per_cell)
    : cfg_(std::move(cfg)),
      realization_(std::move(realization)),
      half_cells_(half_cells),
      mesh_per_cell_(mesh_per_cell) {
  cfg_.validate();
  if (half_cells < 1) throw ArgumentError("BoxOperator: half_cells must be >= 1");
  if (mesh_per_cell < 2 || mesh_per_cell % 2 != 0) {
    throw ArgumentError("BoxOperator: mesh_per_cell must be an even integer >= 2");
  }
  if (realization_.cells.rows() != cfg_.n_channels || realization_.first_cell > -half_cells ||
      realization_.end_cell() < half_cells) {
    throw ArgumentError("BoxOperator: realization must cover cells -L .. L-1 with N rows");
  }
  const MatrixX<double> v0 = coupling_matrix(cfg_.n_channels);
  for (std::int64_t n = -half_cells; n < half_cells; ++n) {
    MatrixX<double> v = v0;
    const VectorX<double> omega = realization_.omega(n);
    for (int i = 0; i < cfg_.n_channels; ++i) v(i, i) += cfg_.couplings[i] * omega(i);
    cell_potentials_.push_back(std::move(v));
  }
}

BoxOperator BoxOperator::sample(const ModelConfig& cfg, std::uint64_t seed, int half_cells,
                                int mesh_per_cell) {
  if (half_cells < 1) throw ArgumentError("BoxOperator: half_cells must be >= 1");
  return BoxOperator(cfg, sample_realization(cfg, seed, -half_cells, half_cells), half_cells,
                     mesh_per_cell);
}

const MatrixX<double>& BoxOperator::cell_potential(std::int64_t cell) const {
  if (cell < -half_cells_ || cell >= half_cells_) {
    throw ArgumentError("cell_potential: cell " + std::to_string(cell) + " outside the box");
  }
  return cell_potentials_[cell + half_cells_];
}

MatrixX<double> BoxOperator::node_potential(int j) const {
  const int q = j / mesh_per_cell_;
  const int last = 2 * half_cells_ - 1;
  if (j % mesh_per_cell_ != 0) return cell_potentials_[q];
  if (q == 0) return cell_potentials_[0];
  if (q > last) return cell_potentials_[last];
  return 0.5 * (cell_potentials_[q - 1] + cell_potentials_[q]);
}

double BoxOperator::potential_sup_norm(double energy) const {
  double worst = 0.0;
  for (const auto& v : cell_potentials_) {
    const MatrixX<double> shifted = v - energy * MatrixX<double>::Identity(v.rows(), v.cols());
    worst = std::max(worst, spectral_norm(shifted));
  }
  return worst;
}

double BoxOperator::potential_floor() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& v : cell_potentials_) {
    Eigen::SelfAdjointEigenSolver<MatrixX<double>> eig(v, Eigen::EigenvaluesOnly);
    lo = std::min(lo, eig.eigenvalues()(0));
  }
  return lo;
}

namespace {

/// Block LDLᵀ of A − σ for the block-tridiagonal FD matrix with off-diagonal −I/h²:
/// S₁ = D₁ − σ, S_j = D_j − σ − S_{j−1}⁻¹/h⁴.
class BlockFactorization {
 public:
  BlockFactorization(const BoxOperator& box, double shift) : n_(box.n_channels()) {
    const double h = box.mesh();
    c_ = -1.0 / (h * h);
    const int nodes = box.interior_nodes();
    factors_.reserve(nodes);
    const MatrixX<double> eye = MatrixX<double>::Identity(n_, n_);
    MatrixX<double> prev_inv;
    scale_ = 2.0 / (h * h) + std::abs(shift) + box.potential_sup_norm();
    for (int j = 1; j <= nodes; ++j) {
      MatrixX<double> s = box.node_potential(j) + (2.0 / (h * h) - shift) * eye;
      if (j > 1) s -= (c_ * c_) * prev_inv;
      factors_.emplace_back(s);
      const auto& f = factors_.back();
      const auto d = f.vectorD();
      for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d(i) < 0.0) ++negatives_;
        if (!(std::abs(d(i)) > 1e-14 * scale_)) singular_ = true;
      }
      if (singular_) return;
      prev_inv = f.solve(eye);
    }
  }

  bool singular() const { return singular_; }
  long negatives() const { return negatives_; }

  /// Solves (A − σ)X = B for B of size (N·nodes) × k.
  MatrixX<double> solve(const MatrixX<double>& rhs) const {
    const Eigen::Index nodes = static_cast<Eigen::Index>(factors_.size());
    const Eigen::Index k = rhs.cols();
    std::vector<MatrixX<double>> g(nodes);
    g[0] = rhs.topRows(n_);
    for (Eigen::Index j = 1; j < nodes; ++j) {
      g[j] = rhs.middleRows(j * n_, n_) - c_ * factors_[j - 1].solve(g[j - 1]);
    }
    MatrixX<double> x(n_ * nodes, k);
    MatrixX<double> next = factors_[nodes - 1].solve(g[nodes - 1]);
    x.middleRows((nodes - 1) * n_, n_) = next;
    for (Eigen::Index j = nodes - 2; j >= 0; --j) {
      next = factors_[j].solve(g[j] - c_ * next);
      x.middleRows(j * n_, n_) = next;
    }
    return x;
  }

 private:
  int n_;
  double c_ = 0.0;
  double scale_ = 1.0;
  long negatives_ = 0;
  bool singular_ = false;
  std::vector<Eigen::LDLT<MatrixX<double>>> factors_;
};

double shift_step(double energy, double tol_eig) { return tol_eig * std::max(1.0, std::abs(energy)); }

BlockFactorization factorize_nonsingular(const BoxOperator& box, double& energy, double tol_eig) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    BlockFactorization f(box, energy);
    if (!f.singular()) return f;
    energy += shift_step(energy, tol_eig);
  }
  throw ResolutionError("block factorization stays singular after shift perturbation");
}

}  // namespace

long BoxOperator::count_below(double energy, double tol_eig) const {
  if (!std::isfinite(energy)) throw ArgumentError("count_below: energy must be finite");
  return factorize_nonsingular(*this, energy, tol_eig).negatives();
}

MatrixX<double> BoxOperator::fd_matrix() const {
  const int n = n_channels();
  const int nodes = interior_nodes();
  const double h = mesh();
  MatrixX<double> a = MatrixX<double>::Zero(n * nodes, n * nodes);
  for (int j = 1; j <= nodes; ++j) {
    const int r = (j - 1) * n;
    a.block(r, r, n, n) = node_potential(j);
    a.block(r, r, n, n).diagonal().array() += 2.0 / (h * h);
    if (j < nodes) {
      a.block(r, r + n, n, n).diagonal().setConstant(-1.0 / (h * h));
      a.block(r + n, r, n, n).diagonal().setConstant(-1.0 / (h * h));
    }
  }
  return a;
}

std::vector<double> box_eigenvalues_fd(const BoxOperator& box, EnergyInterval window,
                                       double tol_eig) {
  if (!(window.lower < window.upper)) throw ArgumentError("box_eigenvalues_fd: empty window");
  const long first = box.count_below(window.lower, tol_eig);
  const long last = box.count_below(window.upper, tol_eig);
  std::vector<double> values;
  values.reserve(last - first);
  double lo_bound = window.lower;
  for (long k = first; k < last; ++k) {
    // λ_k = inf{E : count_below(E) > k}
    double lo = lo_bound;
    double hi = window.upper;
    while (hi - lo > tol_eig * std::max(1.0, std::abs(hi))) {
      const double mid = 0.5 * (lo + hi);
      if (box.count_below(mid, tol_eig) > k) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    values.push_back(0.5 * (lo + hi));
    lo_bound = lo;
  }
  return values;
}

namespace {

/// exp(sX) for one cell at fixed E from a single eigendecomposition of M = V_n − E.
class CellPropagator {
 public:
  CellPropagator(const MatrixX<double>& potential, double energy) {
    MatrixX<double> m = potential;
    m.diagonal().array() -= energy;
    Eigen::SelfAdjointEigenSolver<MatrixX<double>> eig(m);
    lambda_ = eig.eigenvalues();
    q_ = eig.eigenvectors();
  }

  MatrixX<double> operator()(double s) const {
    const Eigen::Index n = lambda_.size();
    VectorX<double> c(n), sh(n), ms(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = s * s * lambda_(i);
      c(i) = cosh_sqrt(z);
      sh(i) = s * sinhc_sqrt(z);
      ms(i) = lambda_(i) * sh(i);
    }
    MatrixX<double> t(2 * n, 2 * n);
    t.topLeftCorner(n, n) = q_ * c.asDiagonal() * q_.transpose();
    t.topRightCorner(n, n) = q_ * sh.asDiagonal() * q_.transpose();
    t.bottomLeftCorner(n, n) = q_ * ms.asDiagonal() * q_.transpose();
    t.bottomRightCorner(n, n) = t.topLeftCorner(n, n);
    return t;
  }

 private:
  VectorX<double> lambda_;
  MatrixX<double> q_;
};

}  // namespace

MatrixX<double> dirichlet_block(const BoxOperator& box, double energy) {
  const int n = box.n_channels();
  MatrixX<double> y = MatrixX<double>::Zero(2 * n, n);
  y.bottomRows(n).setIdentity();
  for (std::int64_t cell = -box.half_cells(); cell < box.half_cells(); ++cell) {
    y = CellPropagator(box.cell_potential(cell), energy)(box.cell_length()) * y;
    y /= y.norm();
  }
  return y.topRows(n);
}

namespace {

double dirichlet_det(const BoxOperator& box, double energy) {
  return dirichlet_block(box, energy).determinant();
}

double bisect_sign_change(const BoxOperator& box, double lo, double hi, double f_lo,
                          double tol_eig) {
  while (hi - lo > tol_eig * std::max(1.0, std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = dirichlet_det(box, mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Minimizes sign·det over [lo, hi] by golden-section search.
double golden_minimum(const BoxOperator& box, double lo, double hi, double sign, double tol_eig,
                      double& f_min) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = sign * dirichlet_det(box, c), fd = sign * dirichlet_det(box, d);
  while (b - a > tol_eig * std::max(1.0, std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = sign * dirichlet_det(box, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = sign * dirichlet_det(box, d);
    }
  }
  const double x = 0.5 * (a + b);
  f_min = sign * dirichlet_det(box, x);
  return x;
}

}  // namespace

std::vector<double> box_eigenvalues_shooting(const BoxOperator& box, EnergyInterval window,
                                             double tol_eig) {
  if (!(window.lower < window.upper)) throw ArgumentError("box_eigenvalues_shooting: empty window");
  // Nothing lies at or below the potential floor. Above it, levels are roughly evenly spaced
  // in s = √(E − floor), so the scan is uniform in s with a Weyl-law density.
  const double floor = box.potential_floor();
  if (window.upper <= floor) return {};
  const double s_lo = std::sqrt(std::max(0.0, window.lower - floor));
  const double s_hi = std::sqrt(window.upper - floor);
  const double expected = box.n_channels() * (box.length() / M_PI * s_hi + 1.0);
  const long points = std::max<long>(400, static_cast<long>(40.0 * expected));
  const double step = (s_hi - s_lo) / static_cast<double>(points);

  std::vector<double> grid(points + 1), f(points + 1);
  for (long k = 0; k <= points; ++k) {
    const double sk = s_lo + step * static_cast<double>(k);
    grid[k] = k == points ? window.upper : floor + sk * sk;
    f[k] = dirichlet_det(box, grid[k]);
  }
  // A dip that reaches this level without a sign change is a double root.
  constexpr double kTouch = 1e-10;
  std::vector<double> roots;
  for (long k = 0; k < points; ++k) {
    if (f[k] == 0.0) {
      roots.push_back(grid[k]);
      continue;
    }
    if ((f[k] > 0.0) != (f[k + 1] > 0.0) && f[k + 1] != 0.0) {
      roots.push_back(bisect_sign_change(box, grid[k], grid[k + 1], f[k], tol_eig));
      continue;
    }
    if (k >= 1 && std::abs(f[k]) < std::abs(f[k - 1]) && std::abs(f[k]) <= std::abs(f[k + 1]) &&
        (f[k - 1] > 0.0) == (f[k] > 0.0) && (f[k + 1] > 0.0) == (f[k] > 0.0)) {
      const double sign = f[k] > 0.0 ? 1.0 : -1.0;
      double f_min = 0.0;
      const double x = golden_minimum(box, grid[k - 1], grid[k + 1], sign, tol_eig, f_min);
      if (f_min < 0.0) {
        roots.push_back(bisect_sign_change(box, grid[k - 1], x, sign, tol_eig));
        roots.push_back(bisect_sign_change(box, x, grid[k + 1], -sign, tol_eig));
      } else if (f_min <= kTouch) {
        roots.push_back(x);
        roots.push_back(x);
      }
    }
  }
  std::sort(roots.begin(), roots.end());
  std::erase_if(roots, [&](double r) { return r < window.lower || r >= window.upper; });
  // Roots closer than tol_eig form a two-fold cluster.
  for (std::size_t i = 0; i + 1 < roots.size(); ++i) {
    if (roots[i + 1] - roots[i] < tol_eig * std::max(1.0, std::abs(roots[i]))) {
      roots[i] = roots[i + 1] = 0.5 * (roots[i] + roots[i + 1]);
      ++i;
    }
  }
  return roots;
}

Eigenpair fd_eigenpair(const BoxOperator& box, double target, double window_radius) {
  if (!(window_radius > 0.0)) throw ArgumentError("fd_eigenpair: window_radius must be > 0");
  const auto values =
      box_eigenvalues_fd(box, {target - window_radius, target + window_radius});
  if (values.empty()) {
    throw NotFoundError("no eigenvalue within " + std::to_string(window_radius) + " of " +
                        std::to_string(target));
  }
  const double lambda = *std::min_element(values.begin(), values.end(), [&](double a, double b) {
    return std::abs(a - target) < std::abs(b - target);
  });
  double shift = lambda;
  const BlockFactorization f = factorize_nonsingular(box, shift, kTolEig * 1e-3);
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  VectorX<double> v(static_cast<Eigen::Index>(box.n_channels()) * box.interior_nodes());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  for (int it = 0; it < 4; ++it) {
    v = f.solve(v);
    v /= v.norm();
  }
  Eigenpair pair;
  pair.value = lambda;
  pair.vector = v / std::sqrt(box.mesh());
  return pair;
}

MatrixX<double> fd_resolvent_columns(const BoxOperator& box, double energy,
                                     const std::vector<int>& nodes) {
  const int n = box.n_channels();
  const Eigen::Index rows = static_cast<Eigen::Index>(n) * box.interior_nodes();
  MatrixX<double> rhs = MatrixX<double>::Zero(rows, static_cast<Eigen::Index>(n * nodes.size()));
  for (std::size_t c = 0; c < nodes.size(); ++c) {
    if (nodes[c] < 1 || nodes[c] > box.interior_nodes()) {
      throw ArgumentError("fd_resolvent_columns: node index outside the interior");
    }
    for (int i = 0; i < n; ++i) rhs((nodes[c] - 1) * n + i, static_cast<Eigen::Index>(c) * n + i) = 1.0;
  }
  const BlockFactorization f(box, energy);
  if (f.singular()) throw ResolutionError("fd_resolvent_columns: E is on the spectrum");
  return f.solve(rhs);
}

MatrixSolution integrate_matrix_solution(const BoxOperator& box, double energy, Side side) {
  const int n = box.n_channels();
  const int m = box.mesh_per_cell();
  const int cells = 2 * box.half_cells();
  const double h = box.mesh();
  MatrixSolution sol;
  sol.side = side;
  sol.energy = energy;
  const int points = box.grid_points();
  sol.x.resize(points);
  sol.u.resize(points);
  sol.du.resize(points);
  for (int k = 0; k < points; ++k) sol.x[k] = box.grid_x(k);

  MatrixX<double> y = MatrixX<double>::Zero(2 * n, n);
  y.bottomRows(n).setIdentity();
  auto store = [&](int k, const MatrixX<double>& state) {
    sol.u[k] = state.topRows(n);
    sol.du[k] = state.bottomRows(n);
  };
  if (side == Side::minus) {
    store(0, y);
    for (int q = 0; q < cells; ++q) {
      const CellPropagator prop(box.cell_potential(q - box.half_cells()), energy);
      for (int r = 1; r <= m; ++r) store(q * m + r, prop(r * h) * y);
      y = prop(box.cell_length()) * y;
      store((q + 1) * m, y);
    }
  } else {
    store(points - 1, y);
    for (int q = cells - 1; q >= 0; --q) {
      const CellPropagator prop(box.cell_potential(q - box.half_cells()), energy);
      for (int r = m - 1; r >= 0; --r) store(q * m + r, prop(-(m - r) * h) * y);
      y = prop(-box.cell_length()) * y;
      store(q * m, y);
    }
  }
  return sol;
}

std::vector<MatrixX<double>> wronskian(const MatrixSolution& a, const MatrixSolution& b) {
  if (a.u.size() != b.u.size()) throw ArgumentError("wronskian: solutions on different grids");
  std::vector<MatrixX<double>> w(a.u.size());
  for (std::size_t k = 0; k < a.u.size(); ++k) {
    w[k] = b.du[k].transpose() * a.u[k] - b.u[k].transpose() * a.du[k];
  }
  return w;
}

double wronskian_drift(const std::vector<MatrixX<double>>& w) {
  if (w.empty()) return 0.0;
  const double base = spectral_norm(w.front());
  double worst = 0.0;
  for (const auto& wk : w) worst = std::max(worst, spectral_norm(wk - w.front()));
  return base > 0.0 ? worst / base : worst;
}

GreenKernel::GreenKernel(const BoxOperator& box, double energy)
    : plus_(integrate_matrix_solution(box, energy, Side::plus)),
      minus_(integrate_matrix_solution(box, energy, Side::minus)) {
  const MatrixX<double> w_pm = wronskian(plus_, minus_).front();
  const MatrixX<double> w_mp = wronskian(minus_, plus_).front();
  Eigen::FullPivLU<MatrixX<double>> lu_pm(w_pm), lu_mp(w_mp);
  if (!lu_pm.isInvertible() || !lu_mp.isInvertible()) {
    throw ResolutionError("GreenKernel: Wronskian is singular (E is a Dirichlet eigenvalue)");
  }
  w_pm_inv_ = lu_pm.inverse();
  w_mp_inv_ = lu_mp.inverse();
}

MatrixX<double> GreenKernel::operator()(int i, int j) const {
  if (i >= j) return plus_.u[i] * w_pm_inv_ * minus_.u[j].transpose();
  return -minus_.u[i] * w_mp_inv_ * plus_.u[j].transpose();
}

double local_l2_constant(const BoxOperator& box, double energy) {
  const double l = box.cell_length();
  const double v_lu = l * box.potential_sup_norm(energy);
  const double c1 = std::exp(-2.0 * std::max(l, 1.0) - 2.0 * v_lu);
  const double c2 = 1.0 / c1;
  const double c3 = std::sqrt(c1 / 2.0);
  const double c4 = std::sqrt(2.0 * c2);
  return c3 * c3 / 16.0 * std::min(2.0 * l, c3 / (2.0 * c4));
}

namespace {

/// Forward and backward exact propagators for every grid step of every cell.
struct GridPropagators {
  std::vector<std::vector<MatrixX<double>>> forward;   // [cell][r] = exp(r h X), r = 0..m
  std::vector<std::vector<MatrixX<double>>> backward;  // [cell][r] = exp(−r h X)
};

GridPropagators build_propagators(const BoxOperator& box, double energy) {
  const int m = box.mesh_per_cell();
  GridPropagators g;
  for (int q = 0; q < 2 * box.half_cells(); ++q) {
    const CellPropagator prop(box.cell_potential(q - box.half_cells()), energy);
    std::vector<MatrixX<double>> fw(m + 1), bw(m + 1);
    for (int r = 0; r <= m; ++r) {
      fw[r] = prop(r * box.mesh());
      bw[r] = prop(-r * box.mesh());
    }
    g.forward.push_back(std::move(fw));
    g.backward.push_back(std::move(bw));
  }
  return g;
}

/// Solution with data xi at grid point k0, evaluated on the whole grid.
std::vector<VectorX<double>> propagate_vector(const BoxOperator& box, const GridPropagators& g,
                                              int k0, const VectorX<double>& xi) {
  const int m = box.mesh_per_cell();
  const int points = box.grid_points();
  std::vector<VectorX<double>> y(points);
  y[k0] = xi;
  // Forward: from k0 to the end of its cell, then cell by cell.
  {
    int q = std::min(k0 / m, 2 * box.half_cells() - 1);
    int base = k0;
    int offset = k0 - q * m;
    while (q < 2 * box.half_cells()) {
      for (int r = offset + 1; r <= m; ++r) y[q * m + r] = g.forward[q][r - offset] * y[base];
      base = (q + 1) * m;
      offset = 0;
      ++q;
    }
  }
  // Backward.
  {
    int q = k0 % m == 0 ? k0 / m - 1 : k0 / m;
    int base = k0;
    int end_offset = k0 - q * m;
    while (q >= 0) {
      for (int r = end_offset - 1; r >= 0; --r) y[q * m + r] = g.backward[q][end_offset - r] * y[base];
      base = q * m;
      end_offset = m;
      --q;
    }
  }
  return y;
}

}  // namespace

SolutionBoundReport solution_bound_check(const BoxOperator& box, double energy, long trials,
                                         std::uint64_t seed, int pairs_per_trial) {
  if (trials < 1 || pairs_per_trial < 1) {
    throw ArgumentError("solution_bound_check: trials and pairs_per_trial must be >= 1");
  }
  const double sup = box.potential_sup_norm(energy);
  if (box.mesh() * std::sqrt(1.0 + sup) > 0.5) {
    throw ResolutionError("solution_bound_check: mesh h = " + std::to_string(box.mesh()) +
                          " cannot resolve the solution growth for max|V - E| = " +
                          std::to_string(sup));
  }
  const int n = box.n_channels();
  const int m = box.mesh_per_cell();
  const int points = box.grid_points();
  const double h = box.mesh();
  const GridPropagators g = build_propagators(box, energy);

  // ∫(‖V − E‖ + 1) over grid intervals, as a prefix sum.
  std::vector<double> weight_prefix(points, 0.0);
  for (int k = 1; k < points; ++k) {
    const int q = (k - 1) / m;
    const MatrixX<double> shifted =
        box.cell_potential(q - box.half_cells()) -
        energy * MatrixX<double>::Identity(n, n);
    weight_prefix[k] = weight_prefix[k - 1] + h * (spectral_norm(shifted) + 1.0);
  }

  SolutionBoundReport report;
  report.trials = trials;
  report.constant = local_l2_constant(box, energy);
  constexpr double kRounding = 1e-10;
  for (long t = 0; t < trials; ++t) {
    auto rng = make_stream(seed, {stream_tag::kTrial, static_cast<std::uint64_t>(t)});
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<int> any_point(0, points - 1);
    VectorX<double> xi(2 * n);
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
    xi /= xi.norm();
    const auto y = propagate_vector(box, g, any_point(rng), xi);
    auto energy_at = [&](int k) { return y[k].squaredNorm(); };

    for (int p = 0; p < pairs_per_trial; ++p) {
      const int a = any_point(rng);
      const int b = any_point(rng);
      const double exponent = std::abs(weight_prefix[a] - weight_prefix[b]);
      const double ratio = energy_at(a) / (energy_at(b) * std::exp(exponent));
      ++report.gronwall_checks;
      report.worst_gronwall_ratio = std::max(report.worst_gronwall_ratio, ratio);
      if (ratio > 1.0 + kRounding) ++report.gronwall_violations;

      if (points - 1 >= 2 * m) {
        std::uniform_int_distribution<int> inner(m, points - 1 - m);
        const int x = inner(rng);
        // Composite Simpson over the 2m intervals of [x − ℓ, x + ℓ].
        double integral = 0.0;
        for (int r = 0; r <= 2 * m; ++r) {
          const double w = (r == 0 || r == 2 * m) ? 1.0 : (r % 2 == 1 ? 4.0 : 2.0);
          integral += w * y[x - m + r].head(n).squaredNorm();
        }
        integral *= h / 3.0;
        const double l2_ratio = report.constant * energy_at(x) / integral;
        ++report.l2_checks;
        report.worst_l2_ratio = std::max(report.worst_l2_ratio, l2_ratio);
        if (l2_ratio > 1.0 + kRounding) ++report.l2_violations;
      }
    }
  }
  return report;
}

}  // namespace symplyap
