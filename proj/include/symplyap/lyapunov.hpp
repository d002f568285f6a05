#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "symplyap/model.hpp"
#include "symplyap/stats.hpp"

namespace symplyap {

/// Orthonormal frame carried along U⁽ⁿ⁾ = T_{n−1}⋯T_0 with running log|R_ii| sums.
class CocycleState {
 public:
  explicit CocycleState(int dim);

  /// frame ← T·frame (no re-orthonormalization).
  void apply(const MatrixX<double>& t);
  /// QR of the frame; adds log|R_ii| to the accumulators and keeps Q.
  void reorthonormalize();

  const MatrixX<double>& frame() const { return q_; }
  const VectorX<double>& log_accumulators() const { return acc_; }
  long steps() const { return steps_; }
  /// ‖ᵗQQ − I‖ (meaningful right after reorthonormalize()).
  double orthonormality_defect() const;

 private:
  MatrixX<double> q_;
  VectorX<double> acc_;
  long steps_ = 0;
};

/// Column norm above which the frame is re-orthonormalized early.
inline constexpr double kOverflowGuard = 1e150;

struct LyapunovOptions {
  int reorth_every = 1;
  int batches = 32;  // contiguous batches for the batch-means error bars
  long burn_in = 0;  // cells propagated before accumulation starts
};

/// γ₁ ≥ … ≥ γ_{2N} per unit length with batch-means standard errors.
struct LyapunovSpectrum {
  VectorX<double> gamma;
  VectorX<double> stderr_;
  long steps = 0;
  bool per_length = true;
  double energy = 0.0;
  double cell_length = 1.0;
  std::uint64_t seed = 0;
  int reorth_every = 1;
  /// batch_gamma(i, b): exponent i (sorted order) estimated on batch b alone.
  MatrixX<double> batch_gamma;
  /// Resolution limit of the accumulated logs, 2N·ε/ℓ per exponent; added in quadrature
  /// to the batch-means error so that exactly neutral cocycles are not over-resolved.
  double rounding_floor = 0.0;

  int dim() const { return static_cast<int>(gamma.size()); }
  /// γ per cell (the unnormalized definition): ℓ·γ.
  VectorX<double> gamma_per_step() const { return cell_length * gamma; }
  /// Standard error of Σ_i w_i γ_i from the same batches (correlations included).
  double combination_stderr(const VectorX<double>& weights) const;
  /// max_i |γ_i + γ_{2N+1−i}| − 3(σ_i + σ_{2N+1−i}) ≤ 0.
  bool symmetric_within(double sigmas = 3.0) const;
};

/// QR-reorthonormalized cocycle over cells 0..n_steps−1 of the realization keyed by seed.
/// Throws ArgumentError for n_steps < 1000, non-finite E or reorth_every < 1.
LyapunovSpectrum lyapunov_spectrum(const ModelConfig& cfg, double energy, long n_steps,
                                   std::uint64_t seed, const LyapunovOptions& options);
inline LyapunovSpectrum lyapunov_spectrum(const ModelConfig& cfg, double energy, long n_steps,
                                          std::uint64_t seed, int reorth_every = 1) {
  LyapunovOptions o;
  o.reorth_every = reorth_every;
  return lyapunov_spectrum(cfg, energy, n_steps, seed, o);
}

struct WedgeEstimate {
  double estimate = 0.0;  // γ₁ + … + γ_p per unit length
  double stderr_ = 0.0;
  long steps = 0;
  int p = 1;
};

/// Top exponent of the ∧^p cocycle from e₁∧…∧e_p (norm tracking on one vector).
/// Throws ArgumentError unless 1 ≤ p ≤ N.
WedgeEstimate wedge_lyapunov_sum(const ModelConfig& cfg, double energy, int p, long n_steps,
                                 std::uint64_t seed, int batches = 32);

struct FurstenbergEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  long steps = 0;
  long burn_in = 0;
  int p = 1;
  std::vector<VectorX<double>> directions;  // unit p-vectors after burn-in
  /// Fraction of samples within projective distance 0.1 of the densest sample.
  double concentration = 0.0;
};

/// sin of the angle between the lines through x and y.
double projective_distance(const VectorX<double>& x, const VectorX<double>& y);

/// Ergodic average of log(‖∧^pT x‖/‖x‖)/ℓ along a projective trajectory after a burn-in
/// (fraction of n_steps, default 10%). Keeps up to max_samples evenly spaced directions.
FurstenbergEstimate furstenberg_integral_probe(const ModelConfig& cfg, double energy, int p,
                                               long n_steps, std::uint64_t seed,
                                               double burn_in_fraction = 0.1,
                                               int max_samples = 1000);

/// Wedge of the columns of a 2N×p matrix as a C(2N,p) vector (lexicographic minors).
VectorX<double> wedge_vector(const MatrixX<double>& columns);

struct LargeDeviationParams {
  int p = 1;
  long n = 100;
  double epsilon = 0.1;
  long trials = 400;
  /// γ₁+…+γ_p per unit length; NaN → estimated with lyapunov_spectrum.
  double gamma_sum = std::numeric_limits<double>::quiet_NaN();
  long gamma_steps = 100000;
  int threads = 1;
};

/// Frequency of |((∧^pU⁽ⁿ⁾)x, y)| ≥ exp((γ₁+…+γ_p − ε)ℓn) over independent realizations.
/// x, y are 2N×p matrices whose column wedges are normalized internally (decomposable by
/// construction). Throws ArgumentError on shape mismatch or zero wedge.
ProbeReport large_deviation_probe(const ModelConfig& cfg, double energy,
                                  const LargeDeviationParams& params, std::uint64_t seed,
                                  const MatrixX<double>& x, const MatrixX<double>& y);

struct NegativeMomentReport {
  MeanEstimate moment;            // 𝔼‖∧^pU⁽ⁿ⁾x‖^{−δ} at n
  std::vector<long> checkpoints;  // cell counts
  std::vector<double> log_moments;
  LinearFit fit;                  // log-moment vs n
  double xi = 0.0;                // −slope
  long trials = 0;
  bool low_trials_warning = false;
};

/// Sample mean of ‖∧^pU⁽ⁿ⁾x‖^{−δ} with a slope fit over `checkpoints` evenly spaced n.
NegativeMomentReport negative_moment_probe(const ModelConfig& cfg, double energy, int p,
                                           double delta, long n, long trials, std::uint64_t seed,
                                           const MatrixX<double>& x, int checkpoints = 8,
                                           int threads = 1);

}  // namespace symplyap
