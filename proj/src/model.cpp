#include "symplyap/model.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "symplyap/errors.hpp"
#include "symplyap/rng.hpp"

namespace symplyap {

void ModelConfig::validate() const {
  if (n_channels < 1) throw ConfigError("n_channels", "n_channels must be a positive integer");
  if (!(cell_length > 0.0) || !std::isfinite(cell_length)) {
    throw ConfigError("cell_length", "cell_length must be a finite positive number");
  }
  if (static_cast<int>(couplings.size()) != n_channels) {
    throw ConfigError("couplings", "couplings must list exactly n_channels values");
  }
  for (double c : couplings) {
    if (c == 0.0 || !std::isfinite(c)) throw ConfigError("couplings", "couplings must be nonzero");
  }
  if (disorder_support.empty()) throw ConfigError("disorder_support", "disorder_support is empty");
  const bool has0 = std::find(disorder_support.begin(), disorder_support.end(), 0.0) !=
                    disorder_support.end();
  const bool has1 = std::find(disorder_support.begin(), disorder_support.end(), 1.0) !=
                    disorder_support.end();
  if (!has0 || !has1) {
    throw ConfigError("disorder_support", "disorder_support must contain both 0 and 1");
  }
  for (double s : disorder_support) {
    if (!std::isfinite(s)) throw ConfigError("disorder_support", "support points must be finite");
  }
  if (disorder_weights.size() != disorder_support.size()) {
    throw ConfigError("disorder_weights", "disorder_weights must match disorder_support in length");
  }
  double total = 0.0;
  for (double w : disorder_weights) {
    if (!(w >= 0.0)) throw ConfigError("disorder_weights", "weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ConfigError("disorder_weights", "weights must sum to 1 within 1e-12");
  }
  if (!(log_chart_radius > 0.0) || !std::isfinite(log_chart_radius)) {
    throw ConfigError("log_chart_radius", "log_chart_radius must be a finite positive number");
  }
}

ModelConfig ModelConfig::bernoulli(int n_channels, double cell_length,
                                   std::vector<double> couplings, double log_chart_radius) {
  ModelConfig cfg;
  cfg.n_channels = n_channels;
  cfg.cell_length = cell_length;
  cfg.couplings = std::move(couplings);
  cfg.log_chart_radius = log_chart_radius;
  cfg.validate();
  return cfg;
}

ModelConfig ModelConfig::deterministic(int n_channels, double cell_length,
                                       std::vector<double> couplings, int value,
                                       double log_chart_radius) {
  ModelConfig cfg = bernoulli(n_channels, cell_length, std::move(couplings), log_chart_radius);
  if (value != 0 && value != 1) throw ArgumentError("deterministic: value must be 0 or 1");
  cfg.disorder_weights = value == 0 ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0};
  return cfg;
}

std::size_t ModelConfig::site_count() const {
  std::size_t count = 1;
  for (int i = 0; i < n_channels; ++i) {
    if (count > std::numeric_limits<std::size_t>::max() / support_size()) {
      return std::numeric_limits<std::size_t>::max();
    }
    count *= support_size();
  }
  return count;
}

MatrixX<double> coupling_matrix(int n_channels) {
  MatrixX<double> v0 = MatrixX<double>::Zero(n_channels, n_channels);
  for (int i = 0; i + 1 < n_channels; ++i) {
    v0(i, i + 1) = 1.0;
    v0(i + 1, i) = 1.0;
  }
  return v0;
}

MatrixX<double> build_site_matrix(const ModelConfig& cfg, const VectorX<double>& omega,
                                  double energy) {
  if (omega.size() != cfg.n_channels) {
    throw ArgumentError("build_site_matrix: site vector has " + std::to_string(omega.size()) +
                        " components, expected " + std::to_string(cfg.n_channels));
  }
  MatrixX<double> m = coupling_matrix(cfg.n_channels);
  for (int i = 0; i < cfg.n_channels; ++i) m(i, i) += cfg.couplings[i] * omega(i) - energy;
  return m;
}

HamiltonianMatrix hamiltonian_generator(const ModelConfig& cfg, const VectorX<double>& omega,
                                        double energy) {
  return HamiltonianMatrix::from_potential(build_site_matrix(cfg, omega, energy));
}

SymplecticMatrix transfer_matrix(const ModelConfig& cfg, const VectorX<double>& omega,
                                 double energy) {
  return matrix_exponential(hamiltonian_generator(cfg, omega, energy), cfg.cell_length);
}

VectorX<double> decode_site(const ModelConfig& cfg, std::uint64_t code) {
  VectorX<double> omega(cfg.n_channels);
  const std::uint64_t k = cfg.support_size();
  for (int i = 0; i < cfg.n_channels; ++i) {
    omega(i) = cfg.disorder_support[code % k];
    code /= k;
  }
  return omega;
}

int sample_support_index(const ModelConfig& cfg, std::uint64_t seed, std::int64_t cell,
                         int channel) {
  const double u = key_to_unit(derive_key(
      seed, {stream_tag::kCell, static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(channel)}));
  double acc = 0.0;
  const int k = static_cast<int>(cfg.support_size());
  int last_positive = 0;
  for (int j = 0; j < k; ++j) {
    if (cfg.disorder_weights[j] > 0.0) last_positive = j;
    acc += cfg.disorder_weights[j];
    if (u < acc && cfg.disorder_weights[j] > 0.0) return j;
  }
  return last_positive;
}

std::uint64_t sample_site_code(const ModelConfig& cfg, std::uint64_t seed, std::int64_t cell) {
  std::uint64_t code = 0;
  std::uint64_t radix = 1;
  for (int i = 0; i < cfg.n_channels; ++i) {
    code += radix * static_cast<std::uint64_t>(sample_support_index(cfg, seed, cell, i));
    radix *= cfg.support_size();
  }
  return code;
}

DisorderRealization DisorderRealization::from_cells(std::int64_t first_cell, MatrixX<double> cells) {
  DisorderRealization r;
  r.first_cell = first_cell;
  r.cells = std::move(cells);
  return r;
}

DisorderRealization sample_realization(const ModelConfig& cfg, std::uint64_t seed,
                                       std::int64_t first_cell, std::int64_t last_cell) {
  if (last_cell <= first_cell) throw ArgumentError("sample_realization: empty cell range");
  DisorderRealization r;
  r.seed = seed;
  r.first_cell = first_cell;
  r.cells.resize(cfg.n_channels, last_cell - first_cell);
  for (std::int64_t n = first_cell; n < last_cell; ++n) {
    for (int i = 0; i < cfg.n_channels; ++i) {
      r.cells(i, n - first_cell) = cfg.disorder_support[sample_support_index(cfg, seed, n, i)];
    }
  }
  return r;
}

namespace {

template <typename Visit>
void for_each_binary_site(int n_channels, Visit&& visit) {
  const std::uint64_t count = std::uint64_t{1} << n_channels;
  VectorX<double> omega(n_channels);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (int i = 0; i < n_channels; ++i) omega(i) = static_cast<double>((mask >> i) & 1U);
    visit(omega);
  }
}

VectorX<double> site_eigenvalues(const ModelConfig& cfg, const VectorX<double>& omega) {
  Eigen::SelfAdjointEigenSolver<MatrixX<double>> eig(build_site_matrix(cfg, omega, 0.0),
                                                     Eigen::EigenvaluesOnly);
  return eig.eigenvalues();
}

}  // namespace

EigenvalueExtremes eigenvalue_extremes(const ModelConfig& cfg) {
  if (cfg.n_channels > kMaxEnumerationChannels) {
    throw CapacityError("eigenvalue_extremes: 2^N enumeration refused for N = " +
                        std::to_string(cfg.n_channels) + " > 20");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for_each_binary_site(cfg.n_channels, [&](const VectorX<double>& omega) {
    const VectorX<double> ev = site_eigenvalues(cfg, omega);
    lo = std::min(lo, ev.minCoeff());
    hi = std::max(hi, ev.maxCoeff());
  });
  return {lo, hi, 0.5 * (hi - lo)};
}

EnergyWindow energy_window(const ModelConfig& cfg) {
  const auto ex = eigenvalue_extremes(cfg);
  const double d = cfg.log_chart_radius;
  const double r = d / cfg.cell_length;
  const double critical =
      ex.delta0 > 0.0 ? std::min(1.0, d / ex.delta0) : 1.0;
  return {ex.lambda_max - r, ex.lambda_min + r, ex.lambda_min, ex.lambda_max,
          ex.delta0,         critical,           cfg.cell_length};
}

NormBound norm_bound_check(const ModelConfig& cfg, double energy) {
  if (cfg.n_channels > kMaxEnumerationChannels) {
    throw CapacityError("norm_bound_check: 2^N enumeration refused for N > 20");
  }
  double worst = 1.0;
  for_each_binary_site(cfg.n_channels, [&](const VectorX<double>& omega) {
    const VectorX<double> ev = site_eigenvalues(cfg, omega);
    worst = std::max(worst, (ev.array() - energy).abs().maxCoeff());
  });
  const double max_norm = cfg.cell_length * worst;
  return {max_norm <= cfg.log_chart_radius, max_norm};
}

TransferTable::TransferTable(const ModelConfig& cfg, double energy) : cfg_(cfg), energy_(energy) {
  const std::size_t count = cfg.site_count();
  if (count > kMaxEntries) return;
  table_.reserve(count);
  for (std::uint64_t code = 0; code < count; ++code) {
    table_.push_back(transfer_matrix(cfg, decode_site(cfg, code), energy).entries());
  }
}

MatrixX<double> TransferTable::matrix(std::uint64_t code) const {
  if (cached()) return table_[code];
  return transfer_matrix(cfg_, decode_site(cfg_, code), energy_).entries();
}

}  // namespace symplyap
