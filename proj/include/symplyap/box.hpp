#pragma once

#include <cstdint>
#include <vector>

#include "symplyap/model.hpp"
#include "symplyap/stats.hpp"

namespace symplyap {

inline constexpr double kTolEig = 1e-8;
inline constexpr int kDefaultMeshPerCell = 16;

/// Frozen C in |λ_FD − λ| ≤ C·h² for spectra spanning at most 11 energy units above the
/// potential floor. Fitted once on the free Dirichlet box, where the FD error is
/// λ − (4/h²)sin²(h√λ/2) ≈ λ²h²/12, at λ = 11.
inline constexpr double kFdMeshErrorConstant = 10.1;
inline constexpr double kFdCalibrationSpan = 11.0;

/// Dirichlet restriction H^(L)(ω) to [−ℓL, ℓL] ⊗ ℂ^N.
///
/// The finite-difference backend uses the grid x_j = −ℓL + j·h, h = ℓ/m, with interior
/// nodes j = 1 … 2Lm−1. A node on a cell boundary takes the mean of the two adjacent
/// cell potentials.
class BoxOperator {
 public:
  /// `realization` must cover cells −L … L−1. Throws ArgumentError otherwise.
  BoxOperator(ModelConfig cfg, DisorderRealization realization, int half_cells,
              int mesh_per_cell = kDefaultMeshPerCell);

  static BoxOperator sample(const ModelConfig& cfg, std::uint64_t seed, int half_cells,
                            int mesh_per_cell = kDefaultMeshPerCell);

  const ModelConfig& config() const { return cfg_; }
  const DisorderRealization& realization() const { return realization_; }
  int n_channels() const { return cfg_.n_channels; }
  int half_cells() const { return half_cells_; }
  int mesh_per_cell() const { return mesh_per_cell_; }
  double cell_length() const { return cfg_.cell_length; }
  double mesh() const { return cfg_.cell_length / mesh_per_cell_; }
  double left() const { return -cfg_.cell_length * half_cells_; }
  double length() const { return 2.0 * cfg_.cell_length * half_cells_; }
  /// Grid points including both Dirichlet ends: 2Lm + 1.
  int grid_points() const { return 2 * half_cells_ * mesh_per_cell_ + 1; }
  int interior_nodes() const { return grid_points() - 2; }
  double grid_x(int j) const { return left() + j * mesh(); }

  /// V₀ + diag(c_i ω_i⁽ⁿ⁾) for a cell of the box.
  const MatrixX<double>& cell_potential(std::int64_t cell) const;
  /// Potential used at grid point j (averaged on cell boundaries).
  MatrixX<double> node_potential(int j) const;
  /// max_n ‖V_n − E‖ over the box cells.
  double potential_sup_norm(double energy = 0.0) const;
  /// Lower bound of the spectrum: min over cells of the smallest eigenvalue of V_n.
  double potential_floor() const;

  /// Number of eigenvalues of the FD matrix strictly below E (Sylvester inertia of the
  /// block LDLᵀ factorization). An exact zero pivot moves the shift up by tol_eig·max(1,|E|).
  long count_below(double energy, double tol_eig = kTolEig) const;
  /// The FD matrix itself (dense; intended for small boxes and tests).
  MatrixX<double> fd_matrix() const;

 private:
  ModelConfig cfg_;
  DisorderRealization realization_;
  int half_cells_;
  int mesh_per_cell_;
  std::vector<MatrixX<double>> cell_potentials_;  // index n + L
};

struct EnergyInterval {
  double lower;
  double upper;
};

/// FD eigenvalues in [lower, upper) by inertia counts and bisection to tol_eig (relative).
std::vector<double> box_eigenvalues_fd(const BoxOperator& box, EnergyInterval window,
                                       double tol_eig = kTolEig);

/// D(E) = top-right N×N block of the box transfer product, i.e. U₋(ℓL) for the solution
/// with U₋(−ℓL) = 0, U₋′(−ℓL) = I. Positively rescaled to unit norm (sign of det kept).
MatrixX<double> dirichlet_block(const BoxOperator& box, double energy);

/// Zeros of det D(E) in [lower, upper): sign scan with a Weyl-law grid plus bisection.
/// A dip of |det| that touches zero without a sign change is reported as two equal roots.
std::vector<double> box_eigenvalues_shooting(const BoxOperator& box, EnergyInterval window,
                                             double tol_eig = kTolEig);

struct Eigenpair {
  double value = 0.0;
  /// Node-major values ψ_i(x_j) at j = 1 … 2Lm−1, normalized so h·Σ|ψ|² = 1.
  VectorX<double> vector;
};

/// Eigenpair of the FD matrix nearest E_target. Throws NotFoundError if no eigenvalue
/// lies within window_radius.
Eigenpair fd_eigenpair(const BoxOperator& box, double target, double window_radius);

/// Columns of (A_FD − E)⁻¹ for the channels of the given interior nodes (1-based grid
/// index j). Result is (N·interior) × (N·|nodes|).
MatrixX<double> fd_resolvent_columns(const BoxOperator& box, double energy,
                                     const std::vector<int>& nodes);

enum class IdsBackend { fd, shooting };

struct IDSCurve {
  std::vector<double> energies;
  std::vector<double> values;  // N(E), per unit length
  std::vector<double> ci_low;
  std::vector<double> ci_high;
  int half_cells = 0;
  long samples = 0;
  double mesh = 0.0;
  double cell_length = 0.0;
  int n_channels = 0;
  std::uint64_t seed = 0;

  bool nondecreasing() const;
};

/// Average over realizations of #{λ ≤ E}/(2ℓL); realization r uses seed derive_key(seed, r).
IDSCurve ids_estimate(const ModelConfig& cfg, const std::vector<double>& energies, int half_cells,
                      long samples, std::uint64_t seed, IdsBackend backend = IdsBackend::fd,
                      int mesh_per_cell = kDefaultMeshPerCell, int threads = 1);

struct HolderFit {
  double alpha = 0.0;       // fitted exponent
  double constant = 0.0;    // C in |ΔN| ≈ C|ΔE|^α
  double r_squared = 0.0;
  long points = 0;
  bool degenerate = false;  // no nonzero increments
};

/// Log-log fit of the modulus of continuity ω(δ_k) = max_i |N(E_{i+k}) − N(E_i)| against
/// the separations δ_k over the grid points inside [lower, upper] (at least 10 required).
HolderFit holder_fit(const IDSCurve& curve, double lower, double upper);

struct ProbeSettings {
  long trials = 400;
  int mesh_per_cell = kDefaultMeshPerCell;
  int threads = 1;
};

/// Frequency of d(E, σ(H^(L))) ≤ exp(−κ(ℓL)^β). Requires β ∈ (0,1), κ > 0.
ProbeReport wegner_probe(const ModelConfig& cfg, double energy, int half_cells, double kappa,
                         double beta, std::uint64_t seed, const ProbeSettings& settings = {});

/// ‖1_out R(E) 1_in‖ (spectral norm) with out = outer two cells on each side and in = the
/// middle third |x| ≤ ℓL/3. Returns +∞ if E is within tol_eig of the FD spectrum.
double good_box_norm(const BoxOperator& box, double energy, double tol_eig = kTolEig);

/// Frequency of ‖1_out R 1_in‖ ≤ exp(−γℓL/3). Requires γ > 0 and L divisible by 3.
/// Realizations with E within tol_eig of the spectrum count as not good and are flagged.
ProbeReport good_box_probe(const ModelConfig& cfg, double energy, double gamma, int half_cells,
                           std::uint64_t seed, const ProbeSettings& settings = {});

struct DecayFit {
  double eigenvalue = 0.0;
  double rate = 0.0;  // m̂ = −slope of log window norm vs |x − x*|
  double rate_stderr = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double center = 0.0;        // x*
  double core_radius = 0.0;   // radius around x* holding 20% of the mass
  std::vector<double> window_x;     // window centers (cell boundaries)
  std::vector<double> window_norm;  // ‖1_{[x−ℓ, x+ℓ]} ψ‖
  LinearFit fit;
  Eigenpair pair;
};

/// Decay rate of the FD eigenfunction nearest E_target from 2ℓ-window norms, fitted on
/// windows with |x − x*| beyond the central 20% of mass and beyond min_distance.
DecayFit eigenfunction_decay(const BoxOperator& box, double target, double window_radius,
                             double min_distance = 0.0);

enum class Side { plus, minus };

/// N×N solution of −U″ + (V − E)U = 0 sampled on the box grid.
/// minus: U(−ℓL) = 0, U′(−ℓL) = I. plus: U(ℓL) = 0, U′(ℓL) = I.
struct MatrixSolution {
  Side side = Side::minus;
  double energy = 0.0;
  std::vector<double> x;
  std::vector<MatrixX<double>> u;
  std::vector<MatrixX<double>> du;
};

/// Cell-by-cell propagation with the exact cell exponentials; grid values inside a cell
/// come from exp(sX) applied to the data at the cell's start.
MatrixSolution integrate_matrix_solution(const BoxOperator& box, double energy, Side side);

/// W(A, B) = ᵗB′A − ᵗBA′ at every grid point.
std::vector<MatrixX<double>> wronskian(const MatrixSolution& a, const MatrixSolution& b);

/// max_k ‖W_k − W_0‖ / ‖W_0‖.
double wronskian_drift(const std::vector<MatrixX<double>>& w);

/// Green kernel on grid points:
///   G(x, y) = U₊(x) W(U₊,U₋)⁻¹ ᵗU₋(y)    for x ≥ y,
///   G(x, y) = −U₋(x) W(U₋,U₊)⁻¹ ᵗU₊(y)   for x < y.
class GreenKernel {
 public:
  GreenKernel(const BoxOperator& box, double energy);
  MatrixX<double> operator()(int i, int j) const;
  const MatrixSolution& plus() const { return plus_; }
  const MatrixSolution& minus() const { return minus_; }

 private:
  MatrixSolution plus_;
  MatrixSolution minus_;
  MatrixX<double> w_pm_inv_;
  MatrixX<double> w_mp_inv_;
};

struct SolutionBoundReport {
  long trials = 0;
  long gronwall_checks = 0;
  long gronwall_violations = 0;
  long l2_checks = 0;
  long l2_violations = 0;
  double worst_gronwall_ratio = 0.0;  // max lhs/rhs
  double worst_l2_ratio = 0.0;        // max C·(‖u‖²+‖u′‖²) / ∫‖u‖²
  double constant = 0.0;              // C of the local L² bound

  bool passed() const { return gronwall_violations == 0 && l2_violations == 0; }
};

/// Constant C = C₃²/16 · min(2ℓ, C₃/(2C₄)) with C₁ = exp(−2max(ℓ,1) − 2‖V−E‖_{ℓ,u}),
/// C₂ = 1/C₁, C₃ = √(C₁/2), C₄ = √(2C₂) and ‖V−E‖_{ℓ,u} = ℓ·max_n‖V_n − E‖.
double local_l2_constant(const BoxOperator& box, double energy);

/// Both solution estimates on random solutions (random unit initial data at a random grid
/// point) at `pairs_per_trial` random points each. Throws ResolutionError if
/// h·√(1 + max‖V − E‖) > 0.5.
SolutionBoundReport solution_bound_check(const BoxOperator& box, double energy, long trials,
                                         std::uint64_t seed, int pairs_per_trial = 16);

}  // namespace symplyap
