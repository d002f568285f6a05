#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "symplyap/symplectic.hpp"

namespace symplyap {

/// Full specification of the random operator
///   H_ℓ(ω) = −d²/dx² ⊗ I_N + V₀ + Σ_n diag(c_i ω_i⁽ⁿ⁾) 1_[0,ℓ](x − ℓn),
/// with V₀ the tridiagonal matrix with zero diagonal and unit off-diagonals, and
/// ω_i⁽ⁿ⁾ i.i.d. with a finite law on `disorder_support`.
struct ModelConfig {
  int n_channels = 1;
  double cell_length = 1.0;
  std::vector<double> couplings{1.0};
  std::vector<double> disorder_support{0.0, 1.0};
  std::vector<double> disorder_weights{0.5, 0.5};
  double log_chart_radius = 1.0;

  /// Throws ConfigError naming the offending key.
  void validate() const;

  /// Bernoulli(1/2) law on {0, 1}.
  static ModelConfig bernoulli(int n_channels, double cell_length, std::vector<double> couplings,
                               double log_chart_radius = 1.0);
  /// Degenerate law δ_v for v ∈ {0, 1} (support stays {0, 1}, one weight is zero).
  static ModelConfig deterministic(int n_channels, double cell_length,
                                   std::vector<double> couplings, int value,
                                   double log_chart_radius = 1.0);

  std::size_t support_size() const { return disorder_support.size(); }
  /// Number of distinct site vectors, |supp ν|^N (saturates at SIZE_MAX).
  std::size_t site_count() const;
};

/// V₀: N×N, zero diagonal, ones on the first off-diagonals.
MatrixX<double> coupling_matrix(int n_channels);

/// M_ω(E) = V₀ + diag(c_i ω_i) − E·I.
MatrixX<double> build_site_matrix(const ModelConfig& cfg, const VectorX<double>& omega, double energy);

/// X_ω(E) = [[0, I], [M_ω(E), 0]].
HamiltonianMatrix hamiltonian_generator(const ModelConfig& cfg, const VectorX<double>& omega,
                                        double energy);

/// T_ω(E) = exp(ℓ X_ω(E)); maps (u, u′)(ℓn) to (u, u′)(ℓ(n+1)).
SymplecticMatrix transfer_matrix(const ModelConfig& cfg, const VectorX<double>& omega,
                                 double energy);

/// Site vectors are encoded as mixed-radix integers over support indices:
/// code = Σ_i idx_i · K^i with K = |supp ν|.
VectorX<double> decode_site(const ModelConfig& cfg, std::uint64_t code);

/// Counter-based sample of the support index of ω_i⁽ⁿ⁾: a pure function of (seed, n, i).
int sample_support_index(const ModelConfig& cfg, std::uint64_t seed, std::int64_t cell, int channel);
std::uint64_t sample_site_code(const ModelConfig& cfg, std::uint64_t seed, std::int64_t cell);

/// ω⁽ⁿ⁾ for n in [first_cell, first_cell + cell_count()).
struct DisorderRealization {
  std::uint64_t seed = 0;
  std::int64_t first_cell = 0;
  MatrixX<double> cells;  // N × count, column k is ω^(first_cell + k)

  std::int64_t cell_count() const { return cells.cols(); }
  std::int64_t end_cell() const { return first_cell + cells.cols(); }
  VectorX<double> omega(std::int64_t cell) const { return cells.col(cell - first_cell); }

  /// Explicit realization (not drawn from ν); seed is left at 0.
  static DisorderRealization from_cells(std::int64_t first_cell, MatrixX<double> cells);
};

/// Cells [first_cell, last_cell). Overlapping ranges with the same seed agree cellwise.
DisorderRealization sample_realization(const ModelConfig& cfg, std::uint64_t seed,
                                       std::int64_t first_cell, std::int64_t last_cell);

struct EigenvalueExtremes {
  double lambda_min;
  double lambda_max;
  double delta0;  // (λ_max − λ_min)/2
};

inline constexpr int kMaxEnumerationChannels = 20;

/// Extremes of σ(M_ω(0)) over ω ∈ {0,1}^N. Throws CapacityError for N > 20.
EigenvalueExtremes eigenvalue_extremes(const ModelConfig& cfg);

/// Admissible window I(ℓ,N) = [λ_max − d/ℓ, λ_min + d/ℓ] and ℓ_C = min(1, d/δ₀).
struct EnergyWindow {
  double lower;
  double upper;
  double lambda_min;
  double lambda_max;
  double delta0;
  double critical_length;  // ℓ_C
  double cell_length;

  /// ℓ < ℓ_C; otherwise the window is reported but flagged empty.
  bool admissible() const { return cell_length < critical_length; }
  bool empty() const { return !admissible(); }
  double center() const { return 0.5 * (lower + upper); }
  double width() const { return upper - lower; }
};

EnergyWindow energy_window(const ModelConfig& cfg);

struct NormBound {
  bool admissible;   // max_ω ℓ‖X_ω(E)‖ ≤ d
  double max_norm;   // max_ω ℓ‖X_ω(E)‖
};

/// Uses ‖X_ω(E)‖ = max(1, max_i |λ_i^ω − E|) over ω ∈ {0,1}^N.
NormBound norm_bound_check(const ModelConfig& cfg, double energy);

/// Precomputed T_ω(E) for every site code. Built only when site_count() is small.
class TransferTable {
 public:
  static constexpr std::size_t kMaxEntries = 4096;

  TransferTable(const ModelConfig& cfg, double energy);

  bool cached() const { return !table_.empty(); }
  /// T for a site code; computed on the fly when not cached.
  MatrixX<double> matrix(std::uint64_t code) const;
  const MatrixX<double>& cached_matrix(std::uint64_t code) const { return table_[code]; }
  std::size_t size() const { return table_.size(); }
  double energy() const { return energy_; }

 private:
  ModelConfig cfg_;
  double energy_;
  std::vector<MatrixX<double>> table_;
};

}  // namespace symplyap
