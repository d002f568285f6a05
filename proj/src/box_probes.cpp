#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "symplyap/box.hpp"
#include "symplyap/errors.hpp"
#include "symplyap/parallel.hpp"
#include "symplyap/rng.hpp"

namespace symplyap {

namespace {

std::uint64_t realization_seed(std::uint64_t seed, std::size_t index) {
  return derive_key(seed, {stream_tag::kTrial, static_cast<std::uint64_t>(index)});
}

}  // namespace

bool IDSCurve::nondecreasing() const {
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (energies[i] >= energies[i - 1] && values[i] < values[i - 1]) return false;
  }
  return true;
}

IDSCurve ids_estimate(const ModelConfig& cfg, const std::vector<double>& energies, int half_cells,
                      long samples, std::uint64_t seed, IdsBackend backend, int mesh_per_cell,
                      int threads) {
  if (samples < 1) throw ArgumentError("ids_estimate: samples must be >= 1");
  if (energies.empty()) throw ArgumentError("ids_estimate: empty energy grid");
  cfg.validate();
  const double length = 2.0 * cfg.cell_length * half_cells;
  const double top = *std::max_element(energies.begin(), energies.end());

  const auto counts = parallel_map<std::vector<double>>(samples, threads, [&](std::size_t r) {
    const BoxOperator box =
        BoxOperator::sample(cfg, realization_seed(seed, r), half_cells, mesh_per_cell);
    std::vector<double> out(energies.size());
    if (backend == IdsBackend::fd) {
      for (std::size_t e = 0; e < energies.size(); ++e) {
        out[e] = static_cast<double>(box.count_below(energies[e])) / length;
      }
    } else {
      const double floor = box.potential_floor() - 1.0;
      const auto roots =
          top > floor ? box_eigenvalues_shooting(box, {floor, std::nextafter(top, INFINITY)})
                      : std::vector<double>{};
      for (std::size_t e = 0; e < energies.size(); ++e) {
        const auto below = std::upper_bound(roots.begin(), roots.end(), energies[e]) - roots.begin();
        out[e] = static_cast<double>(below) / length;
      }
    }
    return out;
  });

  IDSCurve curve;
  curve.energies = energies;
  curve.half_cells = half_cells;
  curve.samples = samples;
  curve.mesh = cfg.cell_length / mesh_per_cell;
  curve.cell_length = cfg.cell_length;
  curve.n_channels = cfg.n_channels;
  curve.seed = seed;
  for (std::size_t e = 0; e < energies.size(); ++e) {
    std::vector<double> column(samples);
    for (long r = 0; r < samples; ++r) column[r] = counts[r][e];
    const MeanEstimate m = mean_estimate(column);
    curve.values.push_back(m.mean);
    curve.ci_low.push_back(std::max(0.0, m.ci_low));
    curve.ci_high.push_back(m.ci_high);
  }
  return curve;
}

HolderFit holder_fit(const IDSCurve& curve, double lower, double upper) {
  std::vector<double> e, v;
  for (std::size_t i = 0; i < curve.energies.size(); ++i) {
    if (curve.energies[i] >= lower && curve.energies[i] <= upper) {
      e.push_back(curve.energies[i]);
      v.push_back(curve.values[i]);
    }
  }
  if (e.size() < 10) throw ArgumentError("holder_fit: need at least 10 grid points in the interval");
  const std::size_t m = e.size();
  std::vector<double> log_delta, log_modulus;
  for (std::size_t k = 1; k <= (m - 1) / 2; ++k) {
    double modulus = 0.0;
    double delta = 0.0;
    for (std::size_t i = 0; i + k < m; ++i) {
      modulus = std::max(modulus, std::abs(v[i + k] - v[i]));
      delta += e[i + k] - e[i];
    }
    delta /= static_cast<double>(m - k);
    if (modulus > 0.0 && delta > 0.0) {
      log_delta.push_back(std::log(delta));
      log_modulus.push_back(std::log(modulus));
    }
  }
  HolderFit fit;
  fit.points = static_cast<long>(log_delta.size());
  if (log_delta.size() < 2) {
    fit.degenerate = true;
    return fit;
  }
  const LinearFit lf = linear_fit(log_delta, log_modulus);
  fit.alpha = lf.slope;
  fit.constant = std::exp(lf.intercept);
  fit.r_squared = lf.r_squared;
  return fit;
}

ProbeReport wegner_probe(const ModelConfig& cfg, double energy, int half_cells, double kappa,
                         double beta, std::uint64_t seed, const ProbeSettings& settings) {
  if (!(beta > 0.0 && beta < 1.0)) throw ArgumentError("wegner_probe: beta must lie in (0, 1)");
  if (!(kappa > 0.0)) throw ArgumentError("wegner_probe: kappa must be > 0");
  if (settings.trials < 1) throw ArgumentError("wegner_probe: trials must be >= 1");
  cfg.validate();
  const double scale = cfg.cell_length * half_cells;
  const double radius = std::exp(-kappa * std::pow(scale, beta));
  const auto hits = parallel_map<char>(settings.trials, settings.threads, [&](std::size_t t) -> char {
    const BoxOperator box =
        BoxOperator::sample(cfg, realization_seed(seed, t), half_cells, settings.mesh_per_cell);
    return box.count_below(energy + radius) > box.count_below(energy - radius) ? 1 : 0;
  });
  return make_probe_report("d(E, sigma(H^(L))) <= exp(-kappa (l L)^beta)", settings.trials,
                           std::count(hits.begin(), hits.end(), 1),
                           {{"E", energy},
                            {"L", half_cells},
                            {"kappa", kappa},
                            {"beta", beta},
                            {"radius", radius},
                            {"h", cfg.cell_length / settings.mesh_per_cell}});
}

double good_box_norm(const BoxOperator& box, double energy, double tol_eig) {
  const double t = tol_eig * std::max(1.0, std::abs(energy));
  if (box.count_below(energy + t) > box.count_below(energy - t)) {
    return std::numeric_limits<double>::infinity();
  }
  const int m = box.mesh_per_cell();
  const int nodes = box.interior_nodes();
  const double third = box.cell_length() * box.half_cells() / 3.0;
  std::vector<int> out, in;
  for (int j = 1; j <= nodes; ++j) {
    if (j <= 2 * m || j >= nodes + 1 - 2 * m) out.push_back(j);
    if (std::abs(box.grid_x(j)) <= third * (1.0 + 1e-12)) in.push_back(j);
  }
  const int n = box.n_channels();
  MatrixX<double> cols;
  try {
    cols = fd_resolvent_columns(box, energy, out);
  } catch (const ResolutionError&) {
    return std::numeric_limits<double>::infinity();
  }
  MatrixX<double> block(static_cast<Eigen::Index>(in.size()) * n, cols.cols());
  for (std::size_t r = 0; r < in.size(); ++r) {
    block.middleRows(static_cast<Eigen::Index>(r) * n, n) = cols.middleRows((in[r] - 1) * n, n);
  }
  // R is symmetric, so ‖1_out R 1_in‖ = ‖1_in R 1_out‖ = √λ_max(ᵗBB).
  Eigen::SelfAdjointEigenSolver<MatrixX<double>> eig(block.transpose() * block,
                                                     Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

ProbeReport good_box_probe(const ModelConfig& cfg, double energy, double gamma, int half_cells,
                           std::uint64_t seed, const ProbeSettings& settings) {
  if (!(gamma > 0.0)) throw ArgumentError("good_box_probe: gamma must be > 0");
  if (half_cells < 3 || half_cells % 3 != 0) {
    throw ArgumentError("good_box_probe: L must be a positive multiple of 3");
  }
  if (settings.trials < 1) throw ArgumentError("good_box_probe: trials must be >= 1");
  cfg.validate();
  const double bound = std::exp(-gamma * cfg.cell_length * half_cells / 3.0);
  // 0 = not good, 1 = good, 2 = not good because E is (numerically) on the spectrum.
  const auto outcome = parallel_map<char>(settings.trials, settings.threads, [&](std::size_t t) -> char {
    const BoxOperator box =
        BoxOperator::sample(cfg, realization_seed(seed, t), half_cells, settings.mesh_per_cell);
    const double norm = good_box_norm(box, energy);
    if (!std::isfinite(norm)) return 2;
    return norm <= bound ? 1 : 0;
  });
  ProbeReport r = make_probe_report(
      "||1_out R(E) 1_in|| <= exp(-gamma l L/3)", settings.trials,
      std::count(outcome.begin(), outcome.end(), 1),
      {{"E", energy}, {"gamma", gamma}, {"L", half_cells}, {"bound", bound},
       {"h", cfg.cell_length / settings.mesh_per_cell}});
  r.flagged = std::count(outcome.begin(), outcome.end(), 2);
  return r;
}

DecayFit eigenfunction_decay(const BoxOperator& box, double target, double window_radius,
                             double min_distance) {
  DecayFit d;
  d.pair = fd_eigenpair(box, target, window_radius);
  d.eigenvalue = d.pair.value;
  const int n = box.n_channels();
  const int m = box.mesh_per_cell();
  const int points = box.grid_points();
  const double h = box.mesh();

  // |ψ(x_k)|² on the full grid (zero at the Dirichlet ends).
  std::vector<double> density(points, 0.0);
  for (int k = 1; k + 1 < points; ++k) density[k] = d.pair.vector.segment((k - 1) * n, n).squaredNorm();

  // 2ℓ windows centred on interior cell boundaries, trapezoidal quadrature.
  for (int b = 1; b < 2 * box.half_cells(); ++b) {
    const int lo = (b - 1) * m;
    const int hi = (b + 1) * m;
    double mass = 0.0;
    for (int k = lo; k <= hi; ++k) mass += (k == lo || k == hi ? 0.5 : 1.0) * density[k];
    d.window_x.push_back(box.grid_x(b * m));
    d.window_norm.push_back(std::sqrt(h * mass));
  }
  const auto peak = std::max_element(d.window_norm.begin(), d.window_norm.end());
  d.center = d.window_x[peak - d.window_norm.begin()];

  // Smallest radius around x* holding 20% of the total mass.
  std::vector<std::pair<double, double>> by_distance;
  double total = 0.0;
  for (int k = 0; k < points; ++k) {
    by_distance.emplace_back(std::abs(box.grid_x(k) - d.center), density[k]);
    total += density[k];
  }
  std::sort(by_distance.begin(), by_distance.end());
  double acc = 0.0;
  for (const auto& [dist, mass] : by_distance) {
    acc += mass;
    d.core_radius = dist;
    if (acc >= 0.2 * total) break;
  }

  const double cutoff = std::max(d.core_radius, min_distance);
  const double noise = 1e-12 * *peak;
  std::vector<double> xs, ys;
  for (std::size_t w = 0; w < d.window_x.size(); ++w) {
    const double dist = std::abs(d.window_x[w] - d.center);
    if (dist > cutoff && d.window_norm[w] > noise) {
      xs.push_back(dist);
      ys.push_back(std::log(d.window_norm[w]));
    }
  }
  if (xs.size() < 3) throw ArgumentError("eigenfunction_decay: fewer than 3 tail windows to fit");
  d.fit = linear_fit(xs, ys);
  d.rate = -d.fit.slope;
  d.rate_stderr = d.fit.slope_stderr;
  d.ci_low = d.rate - 1.959963984540054 * d.rate_stderr;
  d.ci_high = d.rate + 1.959963984540054 * d.rate_stderr;
  return d;
}

}  // namespace symplyap
