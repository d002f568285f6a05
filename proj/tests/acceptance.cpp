// Acceptance run: one PASS/FAIL line per criterion. Exit status 1 if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "symplyap/box.hpp"
#include "symplyap/experiment.hpp"
#include "symplyap/lie.hpp"
#include "symplyap/lyapunov.hpp"
#include "symplyap/model.hpp"

using namespace symplyap;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Consecutive Wilson intervals must not separate against the trend.
bool trend_within_ci(const std::vector<ProbeReport>& r, bool increasing) {
  for (std::size_t k = 1; k < r.size(); ++k) {
    if (increasing ? r[k].ci_high < r[k - 1].ci_low : r[k].ci_low > r[k - 1].ci_high) return false;
  }
  return true;
}

std::string estimates(const std::vector<ProbeReport>& r) {
  std::string s;
  for (const auto& p : r) s += (s.empty() ? "" : ", ") + num(p.estimate) + " [" + num(p.ci_low) + ", " + num(p.ci_high) + "]";
  return s;
}

// Worst |γ_i + γ_{2N+1−i}| in units of its own stderr.
double symmetry_sigmas(const LyapunovSpectrum& s) {
  double worst = 0.0;
  const int d = s.dim();
  for (int i = 0; i < d / 2; ++i) {
    VectorX<double> w = VectorX<double>::Zero(d);
    w(i) = 1.0;
    w(d - 1 - i) = 1.0;
    const double sigma = s.combination_stderr(w);
    const double dev = std::abs(s.gamma(i) + s.gamma(d - 1 - i));
    worst = std::max(worst, sigma > 0 ? dev / sigma : (dev == 0 ? 0.0 : INFINITY));
  }
  return worst;
}

std::vector<LyapunovSpectrum> all_runs;  // every Lyapunov run, for the symmetry criterion

LyapunovSpectrum tracked(const ModelConfig& c, double e, long steps, std::uint64_t seed, int reorth = 1) {
  all_runs.push_back(lyapunov_spectrum(c, e, steps, seed, reorth));
  return all_runs.back();
}

Verdict criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string dims;
  for (int n = 1; n <= 4; ++n) {
    const ModelConfig c = ModelConfig::bernoulli(n, 1.0, std::vector<double>(n, 1.0));
    std::vector<MatrixX<double>> gens;
    for (std::uint64_t code = 0; code < c.site_count(); ++code) {
      gens.push_back(hamiltonian_generator(c, decode_site(c, code), 0.0).entries());
    }
    const int dim = lie_closure(gens).dim();
    ok = ok && dim == n * (2 * n + 1);
    dims += (dims.empty() ? "" : ", ") + std::to_string(dim);
  }
  const double t = seconds_since(t0);
  return {ok && t < 60.0, "dims " + dims + " (expected 3, 10, 21, 36), " + num(t) + " s"};
}

Verdict criterion2() {
  const ModelConfig c = ModelConfig::bernoulli(2, 0.5, {1.0, 1.0});
  const auto x = eigenvalue_extremes(c);
  const auto w = energy_window(c);
  const double tol = 1e-12;
  const bool ok = std::abs(x.lambda_max - 2.0) <= tol && std::abs(x.lambda_min + 1.0) <= tol &&
                  std::abs(w.lower) <= tol && std::abs(w.upper - 1.0) <= tol && !w.empty();
  return {ok, "lambda_max " + num(x.lambda_max) + ", lambda_min " + num(x.lambda_min) + ", window [" +
                  num(w.lower) + ", " + num(w.upper) + "]"};
}

Verdict criterion3() {
  std::mt19937_64 gen(20260117);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int n = 1 + k % 4;
    const ModelConfig base = ModelConfig::bernoulli(n, 1.0, std::vector<double>(n, 1.0));
    const double ell_c = energy_window(base).critical_length;
    const ModelConfig c = ModelConfig::bernoulli(n, ell_c * (0.05 + 0.9 * u(gen)), std::vector<double>(n, 1.0));
    const auto w = energy_window(c);
    const double e = w.lower + u(gen) * w.width();
    VectorX<double> omega(n);
    for (int i = 0; i < n; ++i) omega(i) = u(gen) < 0.5 ? 0.0 : 1.0;
    worst = std::max(worst, transfer_matrix(c, omega, e).residual());
  }
  return {worst <= 1e-10, "max residual " + num(worst) + " over 1000 matrices"};
}

Verdict criterion4() {
  const ModelConfig c = ModelConfig::deterministic(1, 1.0, {1.0}, 0);
  const auto hyp = tracked(c, -1.0, 1000000, 1);
  const auto ell = tracked(c, 1.0, 1000000, 1);
  const bool ok = std::abs(hyp.gamma(0) - 1.0) <= 1e-6 && std::abs(ell.gamma(0)) <= 3 * ell.stderr_(0) &&
                  ell.stderr_(0) <= 1e-3;
  return {ok, "hyperbolic gamma_1 " + num(hyp.gamma(0)) + "; elliptic gamma_1 " + num(ell.gamma(0)) +
                  " sigma " + num(ell.stderr_(0))};
}

// The separability runs are long; criterion 5 also checks their symmetry, so they run once.
struct SeparabilityRuns {
  EnergyWindow window;
  std::vector<LyapunovSpectrum> spectra;
  double seconds = 0.0;
};

const SeparabilityRuns& separability_runs() {
  static const SeparabilityRuns runs = [] {
    const auto t0 = std::chrono::steady_clock::now();
    const ModelConfig c = ModelConfig::bernoulli(3, 0.1, {1.0, 1.0, 1.0});
    SeparabilityRuns r{energy_window(c), {}, 0.0};
    if (!r.window.empty()) {
      for (int k = 0; k < 5; ++k) {
        const double e = r.window.lower + (k + 1) * r.window.width() / 6.0;
        r.spectra.push_back(tracked(c, e, 20000000, 100 + k, 5));
      }
    }
    r.seconds = seconds_since(t0);
    return r;
  }();
  return runs;
}

Verdict criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig c = ModelConfig::bernoulli(2, 0.5, {1.0, 1.0});
  const double e = energy_window(c).center();
  const auto qr = tracked(c, e, 100000, 5);
  const auto wedge = wedge_lyapunov_sum(c, e, 2, 100000, 5);
  VectorX<double> w = VectorX<double>::Zero(4);
  w(0) = w(1) = 1.0;
  const double sum = qr.gamma(0) + qr.gamma(1);
  const double sigma = std::hypot(qr.combination_stderr(w), wedge.stderr_);
  const bool wedge_ok = std::abs(wedge.estimate - sum) <= 3 * sigma;
  separability_runs();
  double worst = 0.0;
  for (const auto& s : all_runs) worst = std::max(worst, symmetry_sigmas(s));
  const double t = seconds_since(t0) - separability_runs().seconds;
  return {wedge_ok && worst <= 3.0 && t < 300.0,
          "wedge " + num(wedge.estimate) + " vs QR " + num(sum) + " (3 sigma " + num(3 * sigma) +
              "); worst symmetry " + num(worst) + " sigma over " + std::to_string(all_runs.size()) + " runs"};
}

Verdict criterion6() {
  const SeparabilityRuns& r = separability_runs();
  bool ok = r.spectra.size() == 5;
  double worst = INFINITY;
  for (const auto& s : r.spectra) {
    for (int i = 0; i < 3; ++i) {
      VectorX<double> wt = VectorX<double>::Zero(6);
      wt(i) = 1.0;
      if (i < 2) wt(i + 1) = -1.0;
      const double gap = i < 2 ? s.gamma(i) - s.gamma(i + 1) : s.gamma(2);
      const double ratio = gap / s.combination_stderr(wt);
      worst = std::min(worst, ratio);
      ok = ok && ratio > 3.0;
    }
  }
  return {ok && r.seconds < 900.0, "window [" + num(r.window.lower) + ", " + num(r.window.upper) +
                                       "], smallest gap " + num(worst) + " sigma, " + num(r.seconds) + " s"};
}

Verdict criterion7() {
  std::vector<double> energies;
  for (int k = 0; k <= 38; ++k) energies.push_back(1.0 + 0.5 * k);
  double worst1 = 0.0, worst2 = 0.0;
  const auto one = ids_estimate(ModelConfig::deterministic(1, 1.0, {1.0}, 0), energies, 100, 1, 1);
  const auto two = ids_estimate(ModelConfig::deterministic(2, 1.0, {1.0, 1.0}, 0), energies, 100, 1, 1);
  for (std::size_t i = 0; i < energies.size(); ++i) {
    const double e = energies[i];
    const double exact1 = std::sqrt(e) / M_PI;
    const double exact2 = (std::sqrt(e + 1.0) + std::sqrt(std::max(0.0, e - 1.0))) / M_PI;
    worst1 = std::max(worst1, std::abs(one.values[i] - exact1) / exact1);
    worst2 = std::max(worst2, std::abs(two.values[i] - exact2) / exact2);
  }
  return {worst1 <= 0.02 && worst2 <= 0.02,
          "max relative error N=1 " + num(worst1) + ", N=2 " + num(worst2)};
}

Verdict criterion8() {
  double worst_ratio = 0.0, worst_drift = 0.0;
  bool counts = true;
  long eigen = 0;
  for (int b = 0; b < 20; ++b) {
    const int n = 1 + b % 2;
    const int l = 2 + 2 * ((b / 2) % 4);
    const BoxOperator box =
        BoxOperator::sample(ModelConfig::bernoulli(n, 0.5, std::vector<double>(n, 1.0)), 1000 + b, l);
    const double lo = box.potential_floor() - 0.5;
    const double hi = box.potential_floor() + kFdCalibrationSpan;
    const auto fd = box_eigenvalues_fd(box, {lo, hi});
    const auto sh = box_eigenvalues_shooting(box, {lo, hi});
    const double bound = std::max(10 * kTolEig, kFdMeshErrorConstant * box.mesh() * box.mesh());
    if (fd.size() != sh.size()) {
      counts = false;
      continue;
    }
    eigen += static_cast<long>(fd.size());
    for (std::size_t i = 0; i < fd.size(); ++i) worst_ratio = std::max(worst_ratio, std::abs(fd[i] - sh[i]) / bound);
    for (double e : {lo + 0.3, 0.5 * (lo + hi), hi - 0.1}) {
      const auto p = integrate_matrix_solution(box, e, Side::plus);
      const auto m = integrate_matrix_solution(box, e, Side::minus);
      worst_drift = std::max(worst_drift, wronskian_drift(wronskian(p, m)));
    }
  }
  return {counts && worst_ratio <= 1.0 && worst_drift <= 1e-8,
          std::to_string(eigen) + " eigenvalues, worst |FD - shooting| / bound " + num(worst_ratio) +
              ", worst Wronskian drift " + num(worst_drift) + (counts ? "" : ", count mismatch")};
}

Verdict criterion9() {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long violations = 0, checks = 0;
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + k % 3;
    const BoxOperator box =
        BoxOperator::sample(ModelConfig::bernoulli(n, 1.0, std::vector<double>(n, 1.0)), 5000 + k, 4);
    const double e = box.potential_floor() - 1.0 + 6.0 * u(gen);
    const auto r = solution_bound_check(box, e, 1, 7000 + k);
    violations += r.gronwall_violations + r.l2_violations;
    checks += r.gronwall_checks + r.l2_checks;
  }
  return {violations == 0 && checks > 0, std::to_string(violations) + " violations in " + std::to_string(checks) + " checks"};
}

Verdict criterion10() {
  const auto t0 = std::chrono::steady_clock::now();
  ProbeSettings ps;
  ps.trials = 400;
  // Wegner: N = 2, ℓ = 0.5 at the window center.
  const ModelConfig two = ModelConfig::bernoulli(2, 0.5, {1.0, 1.0});
  const double e2 = energy_window(two).center();
  std::vector<ProbeReport> wegner;
  for (int l : {8, 16, 32}) wegner.push_back(wegner_probe(two, e2, l, 2.0, 0.5, 11, ps));
  const bool wegner_ok = trend_within_ci(wegner, false);
  std::cout << "  wegner (kappa 2, beta 0.5) p_hat: " << estimates(wegner) << (wegner_ok ? "" : "  <- increases") << "\n";

  // Good boxes: N = 1, where resolvent decay is governed by γ₁.
  const ModelConfig one = ModelConfig::bernoulli(1, 0.5, {1.0});
  const double e1 = energy_window(one).center();
  const auto g1 = lyapunov_spectrum(one, e1, 200000, 13).gamma(0);
  std::vector<ProbeReport> good;
  for (int l : {12, 24, 48}) good.push_back(good_box_probe(one, e1, 0.5 * g1, l, 17, ps));
  const bool good_ok = trend_within_ci(good, true);
  std::cout << "  good-box N=1 (gamma " << num(0.5 * g1) << ") p_hat: " << estimates(good) << "\n";
  {
    const auto g2 = lyapunov_spectrum(two, e2, 200000, 13).gamma(0);
    std::vector<ProbeReport> info;
    for (int l : {12, 24, 48}) info.push_back(good_box_probe(two, e2, 0.5 * g2, l, 17, ps));
    std::cout << "  good-box N=2 (informational, gamma " << num(0.5 * g2) << ") p_hat: " << estimates(info) << "\n";
  }

  // Large deviations: failure rate of the ε-event.
  LargeDeviationParams ld;
  ld.p = 1;
  ld.epsilon = 0.1;
  ld.trials = 400;
  ld.gamma_steps = 200000;
  const MatrixX<double> x = MatrixX<double>::Identity(4, 1);
  std::vector<ProbeReport> fails;
  for (long n : {50L, 100L, 200L}) {
    ld.n = n;
    ProbeReport r = large_deviation_probe(two, e2, ld, 19, x, x);
    const Interval ci = wilson_interval(r.trials - r.successes, r.trials);
    r.estimate = 1.0 - r.estimate;
    r.ci_low = ci.low;
    r.ci_high = ci.high;
    fails.push_back(r);
  }
  const bool ld_ok = trend_within_ci(fails, false);
  std::cout << "  large-deviation failure rate (epsilon 0.1): " << estimates(fails) << "\n";
  const double t = seconds_since(t0);
  return {wegner_ok && good_ok && ld_ok && t < 1800.0,
          std::string("wegner ") + (wegner_ok ? "ok" : "not monotone") + ", good-box " + (good_ok ? "ok" : "not monotone") +
              ", large deviation " + (ld_ok ? "ok" : "not monotone") + ", " + num(t) + " s"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict criterion11() {
  const fs::path root = fs::temp_directory_path() / "symplyap_acceptance";
  fs::remove_all(root);
  const std::vector<std::pair<std::string, std::string>> runs{
      {"ids", "n_channels = 2\ncell_length = 0.5\nenergy_grid = 0, 3, 7\nhalf_cells = 4\nsamples = 8\n"},
      {"wegner", "n_channels = 2\ncell_length = 0.5\nhalf_cells = 4, 8\n"},
      {"lyapunov-sweep", "n_channels = 2\ncell_length = 0.5\nenergies = 0.25, 0.75\nsteps = 20000\n"}};
  bool ok = true;
  std::string detail;
  std::ostringstream log;
  for (const auto& [command, text] : runs) {
    ExperimentSpec spec;
    spec.command = command;
    if (command == "wegner") spec.trials = 50;
    spec.config = parse_config(text, command_parameters(command));
    spec.out_dir = (root / command / "a").string();
    spec.master_seed = 42;
    spec.threads = 2;
    const RunManifest m = run(spec, log);
    const ReplayResult r = replay((root / command / "a" / "manifest.json").string(), (root / command / "b").string(), 1, log);
    bool same = r.identical() && !m.failed() && !m.files.empty();
    for (const auto& f : m.files) {
      if (f.path.ends_with(".csv")) {
        same = same && slurp(root / command / "a" / f.path) == slurp(root / command / "b" / f.path);
      }
    }
    ok = ok && same;
    detail += (detail.empty() ? "" : ", ") + command + (same ? " identical" : " differs");
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3},  {4, criterion4},  {5, criterion5}, {6, criterion6},
      {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}, {11, criterion11}};
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
