#include "symplyap/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "symplyap/errors.hpp"
#include "symplyap/parallel.hpp"
#include "symplyap/rng.hpp"

namespace symplyap {

CocycleState::CocycleState(int dim)
    : q_(MatrixX<double>::Identity(dim, dim)), acc_(VectorX<double>::Zero(dim)) {}

void CocycleState::apply(const MatrixX<double>& t) {
  q_ = t * q_;
  ++steps_;
}

void CocycleState::reorthonormalize() {
  Eigen::HouseholderQR<MatrixX<double>> qr(q_);
  acc_.array() += qr.matrixQR().diagonal().array().abs().log();
  q_ = qr.householderQ();
}

double CocycleState::orthonormality_defect() const {
  return spectral_norm(q_.transpose() * q_ - MatrixX<double>::Identity(q_.cols(), q_.cols()));
}

double LyapunovSpectrum::combination_stderr(const VectorX<double>& weights) const {
  const VectorX<double> series = batch_gamma.transpose() * weights;
  std::vector<double> values(series.data(), series.data() + series.size());
  const double batch = mean_estimate(values).stderr_;
  const double floor = weights.cwiseAbs().sum() * rounding_floor;
  return std::sqrt(batch * batch + floor * floor);
}

bool LyapunovSpectrum::symmetric_within(double sigmas) const {
  const int d = dim();
  for (int i = 0; i < d / 2; ++i) {
    const int j = d - 1 - i;
    if (std::abs(gamma(i) + gamma(j)) > sigmas * (stderr_(i) + stderr_(j))) return false;
  }
  return true;
}

namespace {

/// ω⁽ⁿ⁾ drawn from the counter-based stream, for laws too large to tabulate.
VectorX<double> sample_omega(const ModelConfig& cfg, std::uint64_t seed, std::int64_t cell) {
  VectorX<double> omega(cfg.n_channels);
  for (int i = 0; i < cfg.n_channels; ++i) {
    omega(i) = cfg.disorder_support[sample_support_index(cfg, seed, cell, i)];
  }
  return omega;
}

MatrixX<double> cell_transfer(const ModelConfig& cfg, const TransferTable& table,
                              std::uint64_t seed, std::int64_t cell) {
  if (table.cached()) return table.cached_matrix(sample_site_code(cfg, seed, cell));
  return transfer_matrix(cfg, sample_omega(cfg, seed, cell), table.energy()).entries();
}

void check_energy(double energy) {
  if (!std::isfinite(energy)) throw ArgumentError("energy must be finite");
}

template <int D>
LyapunovSpectrum run_qr(const ModelConfig& cfg, double energy, long n_steps, std::uint64_t seed,
                        const LyapunovOptions& opt, const TransferTable& table) {
  using Mat = Eigen::Matrix<double, D, D>;
  const int dim = 2 * cfg.n_channels;

  std::vector<Mat> cache;
  if (table.cached()) {
    cache.reserve(table.size());
    for (std::size_t c = 0; c < table.size(); ++c) cache.emplace_back(table.cached_matrix(c));
  }
  auto transfer = [&](std::int64_t cell) -> Mat {
    if (!cache.empty()) return cache[sample_site_code(cfg, seed, cell)];
    return Mat(cell_transfer(cfg, table, seed, cell));
  };

  Mat q = Mat::Identity(dim, dim);
  Eigen::Matrix<double, D, 1> acc = Eigen::Matrix<double, D, 1>::Zero(dim);
  auto reorth = [&](bool accumulate) {
    Eigen::HouseholderQR<Mat> qr(q);
    if (accumulate) acc.array() += qr.matrixQR().diagonal().array().abs().log();
    q = qr.householderQ();
  };
  auto overflowing = [&] { return q.cwiseAbs().maxCoeff() > kOverflowGuard; };

  for (long k = 0; k < opt.burn_in; ++k) {
    q = transfer(k) * q;
    if ((k + 1) % opt.reorth_every == 0 || overflowing()) reorth(false);
  }
  if (opt.burn_in > 0) reorth(false);

  const int batches = opt.batches;
  MatrixX<double> batch_sum = MatrixX<double>::Zero(dim, batches);
  std::vector<long> batch_len(batches);
  long k = 0;
  for (int b = 0; b < batches; ++b) {
    const long end = (b + 1) * n_steps / batches;
    batch_len[b] = end - k;
    acc.setZero();
    long since = 0;
    for (; k < end; ++k) {
      q = transfer(opt.burn_in + k) * q;
      if (++since == opt.reorth_every || overflowing()) {
        reorth(true);
        since = 0;
      }
    }
    if (since > 0) reorth(true);
    batch_sum.col(b) = acc;
  }

  LyapunovSpectrum s;
  s.steps = n_steps;
  s.energy = energy;
  s.cell_length = cfg.cell_length;
  s.seed = seed;
  s.reorth_every = opt.reorth_every;
  s.rounding_floor = dim * std::numeric_limits<double>::epsilon() / cfg.cell_length;

  VectorX<double> gamma(dim);
  for (int i = 0; i < dim; ++i) {
    std::vector<double> row(batches);
    for (int b = 0; b < batches; ++b) row[b] = batch_sum(i, b);
    gamma(i) = pairwise_sum(row) / (static_cast<double>(n_steps) * cfg.cell_length);
  }
  std::vector<int> order(dim);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return gamma(a) > gamma(b); });

  s.gamma.resize(dim);
  s.stderr_.resize(dim);
  s.batch_gamma.resize(dim, batches);
  for (int r = 0; r < dim; ++r) {
    const int i = order[r];
    s.gamma(r) = gamma(i);
    for (int b = 0; b < batches; ++b) {
      s.batch_gamma(r, b) = batch_sum(i, b) / (static_cast<double>(batch_len[b]) * cfg.cell_length);
    }
  }
  for (int r = 0; r < dim; ++r) {
    s.stderr_(r) = s.combination_stderr(VectorX<double>::Unit(dim, r));
  }
  return s;
}

}  // namespace

LyapunovSpectrum lyapunov_spectrum(const ModelConfig& cfg, double energy, long n_steps,
                                   std::uint64_t seed, const LyapunovOptions& options) {
  cfg.validate();
  check_energy(energy);
  if (n_steps < 1000) throw ArgumentError("lyapunov_spectrum: n_steps must be >= 1000");
  if (options.reorth_every < 1) throw ArgumentError("lyapunov_spectrum: reorth_every must be >= 1");
  if (options.batches < 30) throw ArgumentError("lyapunov_spectrum: need at least 30 batches");
  if (options.burn_in < 0) throw ArgumentError("lyapunov_spectrum: burn_in must be >= 0");
  const TransferTable table(cfg, energy);
  switch (cfg.n_channels) {
    case 1: return run_qr<2>(cfg, energy, n_steps, seed, options, table);
    case 2: return run_qr<4>(cfg, energy, n_steps, seed, options, table);
    case 3: return run_qr<6>(cfg, energy, n_steps, seed, options, table);
    case 4: return run_qr<8>(cfg, energy, n_steps, seed, options, table);
    default: return run_qr<Eigen::Dynamic>(cfg, energy, n_steps, seed, options, table);
  }
}

namespace {

/// ∧^pT per cell, tabulated when the site law is small.
class WedgeSource {
 public:
  WedgeSource(const ModelConfig& cfg, double energy, int p)
      : cfg_(cfg), table_(cfg, energy), p_(p) {
    if (p < 1 || p > cfg.n_channels) {
      throw ArgumentError("wedge order p=" + std::to_string(p) + " outside [1, N]");
    }
    if (table_.cached()) {
      wedges_.reserve(table_.size());
      for (std::size_t c = 0; c < table_.size(); ++c) {
        wedges_.push_back(wedge_power(table_.cached_matrix(c), p).entries);
      }
    }
  }

  MatrixX<double> at(std::uint64_t seed, std::int64_t cell) const {
    if (!wedges_.empty()) return wedges_[sample_site_code(cfg_, seed, cell)];
    return wedge_power(cell_transfer(cfg_, table_, seed, cell), p_).entries;
  }
  const MatrixX<double>& cached(std::uint64_t seed, std::int64_t cell) const {
    return wedges_[sample_site_code(cfg_, seed, cell)];
  }
  bool is_cached() const { return !wedges_.empty(); }
  Eigen::Index size() const { return binomial(2 * cfg_.n_channels, p_); }

 private:
  const ModelConfig& cfg_;
  TransferTable table_;
  int p_;
  std::vector<MatrixX<double>> wedges_;
};

/// v ← (∧^pT_cell) v, renormalized; returns log of the growth factor.
double advance(const WedgeSource& src, std::uint64_t seed, std::int64_t cell, VectorX<double>& v,
               VectorX<double>& scratch) {
  if (src.is_cached()) {
    scratch.noalias() = src.cached(seed, cell) * v;
  } else {
    scratch.noalias() = src.at(seed, cell) * v;
  }
  const double norm = scratch.norm();
  v = scratch / norm;
  return std::log(norm);
}

VectorX<double> unit_wedge(const MatrixX<double>& columns, int n_channels, int p,
                           const char* name) {
  if (columns.rows() != 2 * n_channels || columns.cols() != p) {
    throw ArgumentError(std::string(name) + " must be a 2N x p matrix");
  }
  VectorX<double> w = wedge_vector(columns);
  const double norm = w.norm();
  if (!(norm > 0.0)) throw ArgumentError(std::string(name) + " has linearly dependent columns");
  return w / norm;
}

}  // namespace

WedgeEstimate wedge_lyapunov_sum(const ModelConfig& cfg, double energy, int p, long n_steps,
                                 std::uint64_t seed, int batches) {
  cfg.validate();
  check_energy(energy);
  if (n_steps < 1000) throw ArgumentError("wedge_lyapunov_sum: n_steps must be >= 1000");
  if (batches < 30) throw ArgumentError("wedge_lyapunov_sum: need at least 30 batches");
  const WedgeSource src(cfg, energy, p);
  VectorX<double> v = VectorX<double>::Unit(src.size(), 0);  // e₁∧…∧e_p
  VectorX<double> scratch(src.size());
  std::vector<double> batch_rate(batches);
  std::vector<double> total(batches);
  long k = 0;
  for (int b = 0; b < batches; ++b) {
    const long end = (b + 1) * n_steps / batches;
    const long len = end - k;
    std::vector<double> logs;
    logs.reserve(len);
    for (; k < end; ++k) logs.push_back(advance(src, seed, k, v, scratch));
    total[b] = pairwise_sum(logs);
    batch_rate[b] = total[b] / (static_cast<double>(len) * cfg.cell_length);
  }
  WedgeEstimate w;
  w.estimate = pairwise_sum(total) / (static_cast<double>(n_steps) * cfg.cell_length);
  w.stderr_ = mean_estimate(batch_rate).stderr_;
  w.steps = n_steps;
  w.p = p;
  return w;
}

double projective_distance(const VectorX<double>& x, const VectorX<double>& y) {
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) throw ArgumentError("projective_distance: zero vector");
  const double c = x.dot(y) / (nx * ny);
  return std::sqrt(std::max(0.0, 1.0 - c * c));
}

FurstenbergEstimate furstenberg_integral_probe(const ModelConfig& cfg, double energy, int p,
                                               long n_steps, std::uint64_t seed,
                                               double burn_in_fraction, int max_samples) {
  cfg.validate();
  check_energy(energy);
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
    throw ArgumentError("furstenberg_integral_probe: burn-in fraction must be in [0, 1)");
  }
  const long burn = static_cast<long>(std::floor(burn_in_fraction * static_cast<double>(n_steps)));
  const long kept = n_steps - burn;
  constexpr int kBatches = 32;
  if (kept < 1000) throw ArgumentError("furstenberg_integral_probe: need >= 1000 retained steps");
  if (max_samples < 1) throw ArgumentError("furstenberg_integral_probe: max_samples must be >= 1");

  const WedgeSource src(cfg, energy, p);
  VectorX<double> v = VectorX<double>::Unit(src.size(), 0);
  VectorX<double> scratch(src.size());
  for (long k = 0; k < burn; ++k) advance(src, seed, k, v, scratch);

  FurstenbergEstimate f;
  f.steps = n_steps;
  f.burn_in = burn;
  f.p = p;
  const long stride = std::max<long>(1, kept / max_samples);
  std::vector<double> batch_rate(kBatches), total(kBatches);
  long k = 0;
  for (int b = 0; b < kBatches; ++b) {
    const long end = (b + 1) * kept / kBatches;
    const long len = end - k;
    std::vector<double> logs;
    logs.reserve(len);
    for (; k < end; ++k) {
      logs.push_back(advance(src, seed, burn + k, v, scratch));
      if ((k + 1) % stride == 0 && static_cast<int>(f.directions.size()) < max_samples) {
        f.directions.push_back(v);
      }
    }
    total[b] = pairwise_sum(logs);
    batch_rate[b] = total[b] / (static_cast<double>(len) * cfg.cell_length);
  }
  f.estimate = pairwise_sum(total) / (static_cast<double>(kept) * cfg.cell_length);
  f.stderr_ = mean_estimate(batch_rate).stderr_;

  const std::size_t m = f.directions.size();
  std::size_t best = 0;
  for (std::size_t a = 0; a < m; ++a) {
    std::size_t near = 0;
    for (std::size_t c = 0; c < m; ++c) {
      if (projective_distance(f.directions[a], f.directions[c]) <= 0.1) ++near;
    }
    best = std::max(best, near);
  }
  f.concentration = m > 0 ? static_cast<double>(best) / static_cast<double>(m) : 0.0;
  return f;
}

VectorX<double> wedge_vector(const MatrixX<double>& columns) {
  const int n = static_cast<int>(columns.rows());
  const int p = static_cast<int>(columns.cols());
  if (p < 1 || p > n) throw ArgumentError("wedge_vector: need 1 <= columns <= rows");
  const auto subsets = combinations(n, p);
  VectorX<double> w(static_cast<Eigen::Index>(subsets.size()));
  MatrixX<double> minor(p, p);
  for (std::size_t a = 0; a < subsets.size(); ++a) {
    for (int r = 0; r < p; ++r) minor.row(r) = columns.row(subsets[a][r]);
    w(static_cast<Eigen::Index>(a)) = p == 1 ? minor(0, 0) : minor.determinant();
  }
  return w;
}

ProbeReport large_deviation_probe(const ModelConfig& cfg, double energy,
                                  const LargeDeviationParams& params, std::uint64_t seed,
                                  const MatrixX<double>& x, const MatrixX<double>& y) {
  cfg.validate();
  check_energy(energy);
  if (params.n < 1) throw ArgumentError("large_deviation_probe: n must be >= 1");
  if (params.trials < 1) throw ArgumentError("large_deviation_probe: trials must be >= 1");
  if (!(params.epsilon >= 0.0)) throw ArgumentError("large_deviation_probe: epsilon must be >= 0");
  const WedgeSource src(cfg, energy, params.p);
  const VectorX<double> wx = unit_wedge(x, cfg.n_channels, params.p, "x");
  const VectorX<double> wy = unit_wedge(y, cfg.n_channels, params.p, "y");

  double gamma_sum = params.gamma_sum;
  if (std::isnan(gamma_sum)) {
    const auto spec = lyapunov_spectrum(cfg, energy, std::max(params.gamma_steps, 1000L),
                                        derive_key(seed, {stream_tag::kAux}));
    gamma_sum = spec.gamma.head(params.p).sum();
  }
  const double threshold = (gamma_sum - params.epsilon) * cfg.cell_length * params.n;

  const auto hits = parallel_map<char>(params.trials, params.threads, [&](std::size_t t) -> char {
    const std::uint64_t s = derive_key(seed, {stream_tag::kTrial, t});
    VectorX<double> v = wx;
    VectorX<double> scratch(v.size());
    double log_scale = 0.0;
    for (long k = 0; k < params.n; ++k) log_scale += advance(src, s, k, v, scratch);
    const double overlap = std::abs(v.dot(wy));
    return overlap > 0.0 && std::log(overlap) + log_scale >= threshold ? 1 : 0;
  });
  const long successes = std::count(hits.begin(), hits.end(), 1);
  return make_probe_report(
      "|((wedge^p U^(n)) x, y)| >= exp((gamma_1+...+gamma_p - eps) l n)", params.trials,
      successes,
      {{"E", energy}, {"p", params.p}, {"n", static_cast<double>(params.n)},
       {"epsilon", params.epsilon}, {"gamma_sum", gamma_sum}});
}

NegativeMomentReport negative_moment_probe(const ModelConfig& cfg, double energy, int p,
                                           double delta, long n, long trials, std::uint64_t seed,
                                           const MatrixX<double>& x, int checkpoints,
                                           int threads) {
  cfg.validate();
  check_energy(energy);
  if (!(delta > 0.0)) throw ArgumentError("negative_moment_probe: delta must be > 0");
  if (trials < 1) throw ArgumentError("negative_moment_probe: trials must be >= 1");
  if (checkpoints < 2 || n < checkpoints) {
    throw ArgumentError("negative_moment_probe: need 2 <= checkpoints <= n");
  }
  const WedgeSource src(cfg, energy, p);
  const VectorX<double> wx = unit_wedge(x, cfg.n_channels, p, "x");

  NegativeMomentReport r;
  for (int c = 1; c <= checkpoints; ++c) r.checkpoints.push_back(c * n / checkpoints);

  // log‖∧^pU⁽ⁿ⁾x‖ per trial at each checkpoint.
  const auto logs = parallel_map<std::vector<double>>(
      trials, threads, [&](std::size_t t) {
        const std::uint64_t s = derive_key(seed, {stream_tag::kTrial, t});
        VectorX<double> v = wx;
        VectorX<double> scratch(v.size());
        std::vector<double> out;
        double log_norm = 0.0;
        long k = 0;
        for (long stop : r.checkpoints) {
          for (; k < stop; ++k) log_norm += advance(src, s, k, v, scratch);
          out.push_back(log_norm);
        }
        return out;
      });

  for (int c = 0; c < checkpoints; ++c) {
    double peak = -std::numeric_limits<double>::infinity();
    for (const auto& l : logs) peak = std::max(peak, -delta * l[c]);
    std::vector<double> scaled(logs.size());
    for (std::size_t t = 0; t < logs.size(); ++t) scaled[t] = std::exp(-delta * logs[t][c] - peak);
    r.log_moments.push_back(peak + std::log(pairwise_sum(scaled) / static_cast<double>(trials)));
  }
  std::vector<double> samples(logs.size());
  for (std::size_t t = 0; t < logs.size(); ++t) samples[t] = std::exp(-delta * logs[t].back());
  r.moment = mean_estimate(samples);
  std::vector<double> xs(r.checkpoints.begin(), r.checkpoints.end());
  r.fit = linear_fit(xs, r.log_moments);
  r.xi = -r.fit.slope;
  r.trials = trials;
  r.low_trials_warning = trials < kMinProbeTrials;
  return r;
}

}  // namespace symplyap
