#include "symplyap/experiment.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "symplyap/box.hpp"
#include "symplyap/errors.hpp"
#include "symplyap/lie.hpp"
#include "symplyap/lyapunov.hpp"
#include "symplyap/parallel.hpp"
#include "symplyap/rng.hpp"

#ifndef SYMPLYAP_VERSION
#define SYMPLYAP_VERSION "0.0.0"
#endif

namespace symplyap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string fmt(long v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt_u64(std::uint64_t v) { return std::to_string(v); }

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string csv() const {
    std::string s;
    auto line = [&s](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
      s += "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return s;
  }
};

// Plot data: '#' comment lines, then whitespace-separated columns.
std::string plot_text(const std::vector<std::string>& comments, const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows) {
  std::string s;
  for (const auto& c : comments) s += "# " + c + "\n";
  s += "#";
  for (const auto& c : columns) s += " " + c;
  s += "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) s += (i ? " " : "") + fmt(r[i]);
    s += "\n";
  }
  return s;
}

json probe_json(const ProbeReport& r) {
  return json{{"event", r.event},
              {"trials", r.trials},
              {"successes", r.successes},
              {"estimate", r.estimate},
              {"ci_low", r.ci_low},
              {"ci_high", r.ci_high},
              {"params", r.params},
              {"low_trials_warning", r.low_trials_warning},
              {"flagged", r.flagged}};
}

// ---------------------------------------------------------------------------
// Parameter helpers. All of them throw ConfigError naming the key.

long positive_integer(const ConfigFile& c, const std::string& key, long fallback, long minimum = 1) {
  const long v = c.integer(key, fallback);
  if (v < minimum) throw ConfigError(key, key + " must be >= " + std::to_string(minimum));
  return v;
}

double positive_number(const ConfigFile& c, const std::string& key, double fallback) {
  const double v = c.number(key, fallback);
  if (!(v > 0.0)) throw ConfigError(key, key + " must be > 0");
  return v;
}

int mesh_parameter(const ConfigFile& c) {
  const long m = positive_integer(c, "mesh_per_cell", kDefaultMeshPerCell, 2);
  if (m % 2 != 0) throw ConfigError("mesh_per_cell", "mesh_per_cell must be even");
  return static_cast<int>(m);
}

std::vector<int> cell_list(const ConfigFile& c, const std::string& key, std::vector<double> fallback,
                           int multiple_of = 1) {
  std::vector<int> out;
  for (double v : c.numbers(key, std::move(fallback))) {
    if (v != std::floor(v) || v < 1 || v > 1e6) {
      throw ConfigError(key, key + " entries must be positive integers");
    }
    if (static_cast<long>(v) % multiple_of != 0) {
      throw ConfigError(key, key + " entries must be multiples of " + std::to_string(multiple_of));
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

EnergyWindow window_of(const ConfigFile& c) {
  try {
    return energy_window(c.model);
  } catch (const CapacityError& e) {
    throw ConfigError("n_channels", e.what());
  }
}

double energy_parameter(const ConfigFile& c) {
  if (c.has("energy")) return c.number("energy", 0.0);
  const EnergyWindow w = window_of(c);
  if (w.empty()) throw ConfigError("energy", "no energy given and the energy window is empty");
  return w.center();
}

std::vector<double> energy_grid(const ConfigFile& c) {
  if (c.has("energies") && c.has("energy_grid")) {
    throw ConfigError("energy_grid", "give either energies or energy_grid, not both");
  }
  if (c.has("energies")) return c.numbers("energies", {});
  double lo = 0.0, hi = 0.0;
  long count = 11;
  if (c.has("energy_grid")) {
    const auto g = c.numbers("energy_grid", {});
    if (g.size() != 3 || g[2] != std::floor(g[2]) || g[2] < 1 || g[0] > g[1]) {
      throw ConfigError("energy_grid", "energy_grid is 'lower, upper, count' with lower <= upper");
    }
    lo = g[0];
    hi = g[1];
    count = static_cast<long>(g[2]);
  } else {
    const EnergyWindow w = window_of(c);
    if (w.empty()) throw ConfigError("energies", "no energy grid given and the energy window is empty");
    lo = w.lower;
    hi = w.upper;
  }
  std::vector<double> e(count);
  for (long i = 0; i < count; ++i) e[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  return e;
}

// ---------------------------------------------------------------------------
// Execution context.

class Context {
 public:
  Context(const ExperimentSpec& spec, std::ostream& log) : spec_(spec), log_(log) {}

  const ExperimentSpec& spec() const { return spec_; }
  const ModelConfig& model() const { return spec_.config.model; }
  std::ostream& log() { return log_; }
  long trials(long fallback) const { return spec_.trials.value_or(fallback); }

  std::uint64_t seed(long index) const { return task_seed(spec_.master_seed, spec_.command, index); }

  /// Runs fn(i) for each task with outer_threads workers; failures are recorded, not thrown.
  void run_tasks(const std::vector<std::string>& labels, int outer_threads,
                 const std::function<void(std::size_t, std::uint64_t)>& fn) {
    const std::size_t base = tasks_.size();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      TaskRecord t;
      t.index = static_cast<long>(base + i);
      t.label = labels[i];
      t.seed = seed(t.index);
      tasks_.push_back(t);
    }
    parallel_for(labels.size(), outer_threads, [&](std::size_t i) {
      TaskRecord& t = tasks_[base + i];
      try {
        fn(i, t.seed);
      } catch (const std::exception& e) {
        t.ok = false;
        t.error = e.what();
      }
    });
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const TaskRecord& t = tasks_[base + i];
      if (!t.ok) log_ << "task " << t.index << " (" << t.label << ") failed: " << t.error << "\n";
    }
  }

  void fail_task(const std::string& label, const std::string& error) {
    TaskRecord t;
    t.index = static_cast<long>(tasks_.size());
    t.label = label;
    t.seed = seed(t.index);
    t.ok = false;
    t.error = error;
    tasks_.push_back(t);
    log_ << "task " << t.index << " (" << label << ") failed: " << error << "\n";
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path path = fs::path(spec_.out_dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
    f.close();
    files_.push_back({name, sha256_hex(content), content.size()});
  }

  void note(const std::string& line) {
    notes_.push_back(line);
    log_ << line << "\n";
  }

  std::vector<TaskRecord>& tasks() { return tasks_; }
  std::vector<FileRecord>& files() { return files_; }
  std::vector<std::string>& notes() { return notes_; }

 private:
  const ExperimentSpec& spec_;
  std::ostream& log_;
  std::vector<TaskRecord> tasks_;
  std::vector<FileRecord> files_;
  std::vector<std::string> notes_;
};

std::vector<std::string> provenance_header() { return {"seed", "L", "h", "N", "ell"}; }

std::vector<std::string> provenance(std::uint64_t seed, int half_cells, double h, const ModelConfig& m) {
  return {fmt_u64(seed), fmt(half_cells), fmt(h), fmt(m.n_channels), fmt(m.cell_length)};
}

// Consecutive estimates are compatible with a monotone trend when the later interval
// reaches the earlier one in the allowed direction.
bool monotone_within_ci(const std::vector<ProbeReport>& r, bool increasing) {
  for (std::size_t k = 1; k < r.size(); ++k) {
    if (increasing && r[k].ci_high < r[k - 1].ci_low) return false;
    if (!increasing && r[k].ci_low > r[k - 1].ci_high) return false;
  }
  return true;
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

// ---------------------------------------------------------------------------
// lyapunov-sweep

struct SweepPlan {
  std::vector<double> energies;
  long steps;
  LyapunovOptions options;
};

SweepPlan plan_sweep(const ExperimentSpec& s) {
  const ConfigFile& c = s.config;
  SweepPlan p;
  p.energies = energy_grid(c);
  p.steps = positive_integer(c, "steps", 100000, 1000);
  p.options.reorth_every = static_cast<int>(positive_integer(c, "reorth_every", 1));
  p.options.batches = static_cast<int>(positive_integer(c, "batches", 32, 30));
  p.options.burn_in = positive_integer(c, "burn_in", 0, 0);
  if (p.steps < p.options.batches) throw ConfigError("steps", "steps must be >= batches");
  return p;
}

void run_sweep(Context& ctx) {
  const SweepPlan p = plan_sweep(ctx.spec());
  const ModelConfig& m = ctx.model();
  std::vector<std::string> labels;
  for (double e : p.energies) labels.push_back("E=" + fmt(e));
  std::vector<std::optional<LyapunovSpectrum>> res(p.energies.size());
  ctx.run_tasks(labels, ctx.spec().threads, [&](std::size_t i, std::uint64_t seed) {
    res[i] = lyapunov_spectrum(m, p.energies[i], p.steps, seed, p.options);
  });

  const int dim = 2 * m.n_channels;
  Table t{{"E", "i", "gamma", "stderr", "n", "seed", "N", "ell", "reorth_every"}, {}};
  Table summary{{"E", "seed", "max_pair_sum", "symmetric_3sigma", "min_gap_over_sigma",
                 "gamma_N_over_sigma", "separated_3sigma"},
                {}};
  std::vector<std::vector<std::vector<double>>> curves(dim);
  for (std::size_t k = 0; k < res.size(); ++k) {
    if (!res[k]) continue;
    const LyapunovSpectrum& s = *res[k];
    for (int i = 0; i < dim; ++i) {
      t.rows.push_back({fmt(s.energy), fmt(i + 1), fmt(s.gamma(i)), fmt(s.stderr_(i)), fmt(s.steps),
                        fmt_u64(s.seed), fmt(m.n_channels), fmt(m.cell_length), fmt(s.reorth_every)});
      curves[i].push_back({s.energy, s.gamma(i), s.stderr_(i)});
    }
    double pair = 0.0;
    for (int i = 0; i < dim; ++i) pair = std::max(pair, std::abs(s.gamma(i) + s.gamma(dim - 1 - i)));
    double min_gap = std::numeric_limits<double>::infinity();
    const int n = m.n_channels;
    for (int i = 0; i + 1 < n; ++i) {
      VectorX<double> w = VectorX<double>::Zero(dim);
      w(i) = 1.0;
      w(i + 1) = -1.0;
      min_gap = std::min(min_gap, (s.gamma(i) - s.gamma(i + 1)) / s.combination_stderr(w));
    }
    VectorX<double> wn = VectorX<double>::Zero(dim);
    wn(n - 1) = 1.0;
    const double last = s.gamma(n - 1) / s.combination_stderr(wn);
    const bool separated = last > 3.0 && (n == 1 || min_gap > 3.0);
    summary.rows.push_back({fmt(s.energy), fmt_u64(s.seed), fmt(pair), yes_no(s.symmetric_within(3.0)),
                            n > 1 ? fmt(min_gap) : "nan", fmt(last), yes_no(separated)});
    ctx.note("E=" + fmt(s.energy) + ": gamma_1=" + fmt(s.gamma(0)) + " gamma_N=" + fmt(s.gamma(n - 1)) +
             " symmetric=" + yes_no(s.symmetric_within(3.0)) + " separated=" + yes_no(separated));
  }
  ctx.write("lyapunov.csv", t.csv());
  ctx.write("lyapunov_summary.csv", summary.csv());
  for (int i = 0; i < dim; ++i) {
    ctx.write("gamma_" + std::to_string(i + 1) + ".dat",
              plot_text({"Lyapunov exponent " + std::to_string(i + 1) + " per unit length",
                         "N=" + fmt(m.n_channels) + " ell=" + fmt(m.cell_length) + " n=" + fmt(p.steps)},
                        {"E", "gamma", "stderr"}, curves[i]));
  }
}

// ---------------------------------------------------------------------------
// window

void run_window(Context& ctx) {
  std::optional<EnergyWindow> w;
  ctx.run_tasks({"window"}, 1, [&](std::size_t, std::uint64_t) { w = energy_window(ctx.model()); });
  if (!w) return;
  const ModelConfig& m = ctx.model();
  Table t{{"N", "ell", "d", "lambda_min", "lambda_max", "delta0", "lower", "upper", "critical_length",
           "admissible"},
          {{fmt(m.n_channels), fmt(m.cell_length), fmt(m.log_chart_radius), fmt(w->lambda_min),
            fmt(w->lambda_max), fmt(w->delta0), fmt(w->lower), fmt(w->upper), fmt(w->critical_length),
            yes_no(w->admissible())}}};
  ctx.write("window.csv", t.csv());
  if (w->empty()) {
    ctx.note("window empty (ℓ ≥ ℓ_C): ell=" + fmt(m.cell_length) + " ell_C=" + fmt(w->critical_length));
  } else {
    ctx.note("window [" + fmt(w->lower) + ", " + fmt(w->upper) + "], ell_C=" + fmt(w->critical_length));
  }
}

// ---------------------------------------------------------------------------
// lie-check

struct LiePlan {
  int n_min, n_max;
  double coupling, energy;
};

LiePlan plan_lie(const ExperimentSpec& s) {
  const ConfigFile& c = s.config;
  LiePlan p;
  p.n_min = static_cast<int>(positive_integer(c, "n_min", 1));
  p.n_max = static_cast<int>(positive_integer(c, "n_max", 4));
  if (p.n_max < p.n_min || p.n_max > 6) throw ConfigError("n_max", "n_max must lie in [n_min, 6]");
  p.coupling = c.number("coupling", 1.0);
  if (p.coupling == 0.0) throw ConfigError("coupling", "coupling must be nonzero");
  p.energy = c.number("energy", 0.0);
  return p;
}

void run_lie(Context& ctx) {
  const LiePlan p = plan_lie(ctx.spec());
  const int count = p.n_max - p.n_min + 1;
  std::vector<std::string> labels;
  for (int n = p.n_min; n <= p.n_max; ++n) labels.push_back("N=" + std::to_string(n));
  std::vector<int> dims(count, -1);
  ctx.run_tasks(labels, ctx.spec().threads, [&](std::size_t k, std::uint64_t) {
    const int n = p.n_min + static_cast<int>(k);
    const ModelConfig g = ModelConfig::bernoulli(n, ctx.model().cell_length,
                                                 std::vector<double>(n, p.coupling));
    std::vector<MatrixX<double>> gens;
    for (std::uint64_t code = 0; code < g.site_count(); ++code) {
      gens.push_back(hamiltonian_generator(g, decode_site(g, code), p.energy).entries());
    }
    dims[k] = static_cast<int>(lie_closure(gens).elements.size());
  });
  Table t{{"N", "dim", "expected", "status"}, {}};
  for (int k = 0; k < count; ++k) {
    if (dims[k] < 0) continue;
    const int n = p.n_min + k;
    const int expected = n * (2 * n + 1);
    const std::string status = dims[k] == expected ? "PASS" : "FAIL";
    t.rows.push_back({fmt(n), fmt(dims[k]), fmt(expected), status});
    ctx.note(fmt(n) + ", " + fmt(dims[k]) + ", " + fmt(expected) + ", " + status);
  }
  ctx.write("lie_check.csv", t.csv());
}

// ---------------------------------------------------------------------------
// ids

struct IdsPlan {
  std::vector<double> energies;
  int half_cells;
  long samples;
  int mesh;
  IdsBackend backend;
  std::optional<std::pair<double, double>> holder;
};

IdsPlan plan_ids(const ExperimentSpec& s) {
  const ConfigFile& c = s.config;
  IdsPlan p;
  p.energies = energy_grid(c);
  if (!std::is_sorted(p.energies.begin(), p.energies.end())) {
    throw ConfigError("energies", "energies must be sorted");
  }
  p.half_cells = static_cast<int>(positive_integer(c, "half_cells", 16));
  p.samples = s.trials.value_or(positive_integer(c, "samples", 20));
  if (p.samples < 1) throw ConfigError("samples", "samples must be >= 1");
  p.mesh = mesh_parameter(c);
  const std::string b = c.word("backend", "fd");
  if (b != "fd" && b != "shooting") throw ConfigError("backend", "backend must be fd or shooting");
  p.backend = b == "fd" ? IdsBackend::fd : IdsBackend::shooting;
  if (c.has("holder_interval")) {
    const auto h = c.numbers("holder_interval", {});
    if (h.size() != 2 || !(h[0] < h[1])) {
      throw ConfigError("holder_interval", "holder_interval is 'lower, upper' with lower < upper");
    }
    p.holder = std::make_pair(h[0], h[1]);
  }
  return p;
}

void run_ids(Context& ctx) {
  const IdsPlan p = plan_ids(ctx.spec());
  const ModelConfig& m = ctx.model();
  std::optional<IDSCurve> curve;
  std::optional<HolderFit> holder;
  ctx.run_tasks({"ids"}, 1, [&](std::size_t, std::uint64_t seed) {
    curve = ids_estimate(m, p.energies, p.half_cells, p.samples, seed, p.backend, p.mesh,
                         ctx.spec().threads);
    if (!curve->nondecreasing()) throw std::runtime_error("IDS estimate is not monotone");
    if (p.holder) holder = holder_fit(*curve, p.holder->first, p.holder->second);
  });
  if (!curve) return;
  Table t{{"E", "ids", "ci_low", "ci_high", "samples", "backend"}, {}};
  for (const auto& c : provenance_header()) t.header.push_back(c);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < curve->energies.size(); ++i) {
    std::vector<std::string> r{fmt(curve->energies[i]), fmt(curve->values[i]), fmt(curve->ci_low[i]),
                               fmt(curve->ci_high[i]), fmt(curve->samples),
                               p.backend == IdsBackend::fd ? "fd" : "shooting"};
    for (auto& c : provenance(curve->seed, curve->half_cells, curve->mesh, m)) r.push_back(c);
    t.rows.push_back(std::move(r));
    rows.push_back({curve->energies[i], curve->values[i]});
  }
  ctx.write("ids.csv", t.csv());
  ctx.write("ids.dat", plot_text({"integrated density of states per unit length",
                                  "L=" + fmt(p.half_cells) + " samples=" + fmt(p.samples)},
                                 {"E", "N(E)"}, rows));
  if (holder) {
    Table h{{"lower", "upper", "alpha", "constant", "r_squared", "points", "degenerate"},
            {{fmt(p.holder->first), fmt(p.holder->second), fmt(holder->alpha), fmt(holder->constant),
              fmt(holder->r_squared), fmt(holder->points), yes_no(holder->degenerate)}}};
    ctx.write("ids_holder.csv", h.csv());
    ctx.note("Hoelder exponent " + fmt(holder->alpha) + " (r^2 " + fmt(holder->r_squared) + ")");
  }
  ctx.note("IDS at " + fmt(static_cast<long>(curve->energies.size())) + " energies, monotone");
}

// ---------------------------------------------------------------------------
// wegner and good-box

void write_probe_series(Context& ctx, const std::string& stem, const std::vector<int>& ls,
                        const std::vector<std::optional<ProbeReport>>& reports,
                        const std::vector<std::uint64_t>& seeds, double h, bool increasing,
                        const std::string& title) {
  const ModelConfig& m = ctx.model();
  Table t{{"p_hat", "ci_low", "ci_high", "trials", "successes", "flagged", "low_trials_warning"}, {}};
  std::vector<std::string> keys;
  for (const auto& r : reports) {
    if (!r) continue;
    for (const auto& [k, v] : r->params) {
      if (k != "L" && k != "h") keys.push_back(k);
    }
    break;
  }
  for (const auto& k : keys) t.header.push_back(k);
  for (const auto& c : provenance_header()) t.header.push_back(c);
  json js = json::array();
  std::vector<ProbeReport> ok;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (!reports[i]) continue;
    const ProbeReport& r = *reports[i];
    std::vector<std::string> row{fmt(r.estimate), fmt(r.ci_low), fmt(r.ci_high), fmt(r.trials),
                                 fmt(r.successes), fmt(r.flagged), yes_no(r.low_trials_warning)};
    for (const auto& k : keys) row.push_back(fmt(r.params.at(k)));
    for (auto& c : provenance(seeds[i], ls[i], h, m)) row.push_back(c);
    t.rows.push_back(std::move(row));
    json j = probe_json(r);
    j["seed"] = seeds[i];
    js.push_back(j);
    ok.push_back(r);
    rows.push_back({static_cast<double>(ls[i]), r.estimate, r.estimate > 0 ? std::log(r.estimate) : NAN,
                    r.ci_low, r.ci_high});
  }
  ctx.write(stem + ".csv", t.csv());
  ctx.write(stem + ".json", js.dump(2) + "\n");
  ctx.write(stem + ".dat", plot_text({title}, {"L", "p_hat", "log_p_hat", "ci_low", "ci_high"}, rows));
  if (ok.size() == reports.size()) {
    ctx.note(std::string(increasing ? "non-decreasing" : "non-increasing") + " in L within CI: " +
             yes_no(monotone_within_ci(ok, increasing)));
  }
}

struct WegnerPlan {
  double energy, kappa, beta;
  std::vector<int> half_cells;
  long trials;
  int mesh;
};

WegnerPlan plan_wegner(const ExperimentSpec& s) {
  const ConfigFile& c = s.config;
  WegnerPlan p;
  p.energy = energy_parameter(c);
  p.kappa = positive_number(c, "kappa", 2.0);
  p.beta = c.number("beta", 0.5);
  if (!(p.beta > 0.0 && p.beta < 1.0)) throw ConfigError("beta", "beta must lie in (0, 1)");
  p.half_cells = cell_list(c, "half_cells", {8, 16, 32});
  p.trials = s.trials.value_or(400);
  if (p.trials < 1) throw ConfigError("trials", "trials must be >= 1");
  p.mesh = mesh_parameter(c);
  return p;
}

void run_wegner(Context& ctx) {
  const WegnerPlan p = plan_wegner(ctx.spec());
  std::vector<std::string> labels;
  for (int l : p.half_cells) labels.push_back("L=" + std::to_string(l));
  std::vector<std::optional<ProbeReport>> reports(p.half_cells.size());
  std::vector<std::uint64_t> seeds(p.half_cells.size());
  ProbeSettings ps{p.trials, p.mesh, ctx.spec().threads};
  ctx.run_tasks(labels, 1, [&](std::size_t i, std::uint64_t seed) {
    seeds[i] = seed;
    reports[i] = wegner_probe(ctx.model(), p.energy, p.half_cells[i], p.kappa, p.beta, seed, ps);
  });
  write_probe_series(ctx, "wegner", p.half_cells, reports, seeds, ctx.model().cell_length / p.mesh, false,
                     "Wegner event frequency vs L at E=" + fmt(p.energy));
}

struct GoodBoxPlan {
  double energy;
  std::optional<double> gamma;
  double gamma_fraction;
  long gamma_steps;
  std::vector<int> half_cells;
  long trials;
  int mesh;
};

GoodBoxPlan plan_good_box(const ExperimentSpec& s) {
  const ConfigFile& c = s.config;
  GoodBoxPlan p;
  p.energy = energy_parameter(c);
  if (c.has("gamma")) p.gamma = positive_number(c, "gamma", 1.0);
  p.gamma_fraction = positive_number(c, "gamma_fraction", 0.5);
  p.gamma_steps = positive_integer(c, "gamma_steps", 200000, 1000);
  p.half_cells = cell_list(c, "half_cells", {12, 24, 48}, 3);
  p.trials = s.trials.value_or(400);
  if (p.trials < 1) throw ConfigError("trials", "trials must be >= 1");
  p.mesh = mesh_parameter(c);
  return p;
}

// γ̂₁ … γ̂_{2N} at E from a dedicated task.
std::optional<LyapunovSpectrum> gamma_task(Context& ctx, double energy, long steps) {
  std::optional<LyapunovSpectrum> s;
  ctx.run_tasks({"lyapunov at E=" + fmt(energy)}, 1, [&](std::size_t, std::uint64_t seed) {
    s = lyapunov_spectrum(ctx.model(), energy, steps, seed);
  });
  return s;
}

void run_good_box(Context& ctx) {
  const GoodBoxPlan p = plan_good_box(ctx.spec());
  std::optional<double> gamma = p.gamma;
  if (!gamma) {
    const auto s = gamma_task(ctx, p.energy, p.gamma_steps);
    if (s && s->gamma(0) > 0.0) {
      gamma = p.gamma_fraction * s->gamma(0);
      ctx.note("gamma_1 estimate " + fmt(s->gamma(0)) + " +- " + fmt(s->stderr_(0)) + ", gamma = " +
               fmt(*gamma));
    }
  }
  std::vector<std::string> labels;
  for (int l : p.half_cells) labels.push_back("L=" + std::to_string(l));
  std::vector<std::optional<ProbeReport>> reports(p.half_cells.size());
  std::vector<std::uint64_t> seeds(p.half_cells.size());
  if (!gamma) {
    for (const auto& l : labels) ctx.fail_task(l, "no positive gamma available");
  } else {
    ProbeSettings ps{p.trials, p.mesh, ctx.spec().threads};
    ctx.run_tasks(labels, 1, [&](std::size_t i, std::uint64_t seed) {
      seeds[i] = seed;
      reports[i] = good_box_probe(ctx.model(), p.energy, *gamma, p.half_cells[i], seed, ps);
    });
  }
  write_probe_series(ctx, "good_box", p.half_cells, reports, seeds, ctx.model().cell_length / p.mesh,
                     true, "good-box frequency vs L at E=" + fmt(p.energy));
}

// ---------------------------------------------------------------------------
// decay

struct DecayPlan {
  double energy, window_radius, min_distance;
  int half_cells;
  long realizations, gamma_steps;
  int mesh;
};

DecayPlan plan_decay(const ExperimentSpec& s) {
  const ConfigFile& c = s.config;
  DecayPlan p;
  p.energy = energy_parameter(c);
  p.window_radius = positive_number(c, "window_radius", 0.5);
  p.min_distance = c.number("min_distance", 0.0);
  if (p.min_distance < 0.0) throw ConfigError("min_distance", "min_distance must be >= 0");
  p.half_cells = static_cast<int>(positive_integer(c, "half_cells", 64));
  p.realizations = s.trials.value_or(1);
  if (p.realizations < 1) throw ConfigError("trials", "trials must be >= 1");
  p.gamma_steps = positive_integer(c, "gamma_steps", 200000, 1000);
  p.mesh = mesh_parameter(c);
  return p;
}

void run_decay(Context& ctx) {
  const DecayPlan p = plan_decay(ctx.spec());
  const ModelConfig& m = ctx.model();
  const auto s = gamma_task(ctx, p.energy, p.gamma_steps);
  const double g1 = s ? s->gamma(0) : NAN;
  const double gn = s ? s->gamma(m.n_channels - 1) : NAN;
  std::vector<std::string> labels;
  for (long r = 0; r < p.realizations; ++r) labels.push_back("realization " + std::to_string(r));
  std::vector<std::optional<DecayFit>> fits(p.realizations);
  std::vector<std::uint64_t> seeds(p.realizations);
  ctx.run_tasks(labels, ctx.spec().threads, [&](std::size_t r, std::uint64_t seed) {
    seeds[r] = seed;
    const BoxOperator box = BoxOperator::sample(m, seed, p.half_cells, p.mesh);
    fits[r] = eigenfunction_decay(box, p.energy, p.window_radius, p.min_distance);
  });
  Table t{{"realization", "E_target", "eigenvalue", "m_hat", "m_stderr", "ci_low", "ci_high", "center",
           "core_radius", "gamma_1", "gamma_N", "ell_gamma_1", "ell_gamma_N"},
          {}};
  for (const auto& c : provenance_header()) t.header.push_back(c);
  const double h = m.cell_length / p.mesh;
  for (long r = 0; r < p.realizations; ++r) {
    if (!fits[r]) continue;
    const DecayFit& f = *fits[r];
    std::vector<std::string> row{fmt(r), fmt(p.energy), fmt(f.eigenvalue), fmt(f.rate), fmt(f.rate_stderr),
                                 fmt(f.ci_low), fmt(f.ci_high), fmt(f.center), fmt(f.core_radius), fmt(g1),
                                 fmt(gn), fmt(m.cell_length * g1), fmt(m.cell_length * gn)};
    for (auto& c : provenance(seeds[r], p.half_cells, h, m)) row.push_back(c);
    t.rows.push_back(std::move(row));
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < f.window_x.size(); ++k) {
      rows.push_back({f.window_x[k], f.window_norm[k] > 0 ? std::log(f.window_norm[k]) : NAN,
                      std::abs(f.window_x[k] - f.center)});
    }
    ctx.write("decay_" + std::to_string(r) + ".dat",
              plot_text({"m_hat = " + fmt(f.rate) + " +- " + fmt(f.rate_stderr) + " (95% CI [" +
                             fmt(f.ci_low) + ", " + fmt(f.ci_high) + "])",
                         "gamma_1 = " + fmt(g1) + "  gamma_N = " + fmt(gn) + "  (per unit length)",
                         "eigenvalue = " + fmt(f.eigenvalue) + "  center = " + fmt(f.center)},
                        {"x", "log_window_norm", "distance"}, rows));
    ctx.note("realization " + fmt(r) + ": m_hat=" + fmt(f.rate) + " CI [" + fmt(f.ci_low) + ", " +
             fmt(f.ci_high) + "] vs gamma_1=" + fmt(g1) + " gamma_N=" + fmt(gn));
  }
  ctx.write("decay.csv", t.csv());
}

// ---------------------------------------------------------------------------
// probes: large deviations and negative moments

struct ProbesPlan {
  double energy, epsilon, delta;
  int p;
  std::vector<long> n_list;
  long moment_steps, trials, gamma_steps;
  int checkpoints;
};

ProbesPlan plan_probes(const ExperimentSpec& s) {
  const ConfigFile& c = s.config;
  ProbesPlan p;
  p.energy = energy_parameter(c);
  p.p = static_cast<int>(positive_integer(c, "p", 1));
  if (p.p > c.model.n_channels) throw ConfigError("p", "p must lie in [1, n_channels]");
  for (int n : cell_list(c, "n_list", {50, 100, 200})) p.n_list.push_back(n);
  p.epsilon = c.number("epsilon", 0.1);
  if (p.epsilon < 0.0) throw ConfigError("epsilon", "epsilon must be >= 0");
  p.delta = positive_number(c, "delta", 0.5);
  p.moment_steps = positive_integer(c, "moment_steps", 100, 2);
  p.checkpoints = static_cast<int>(positive_integer(c, "checkpoints", 8, 2));
  p.gamma_steps = positive_integer(c, "gamma_steps", 200000, 1000);
  p.trials = s.trials.value_or(400);
  if (p.trials < 1) throw ConfigError("trials", "trials must be >= 1");
  return p;
}

void run_probes(Context& ctx) {
  const ProbesPlan p = plan_probes(ctx.spec());
  const ModelConfig& m = ctx.model();
  const MatrixX<double> x = MatrixX<double>::Identity(2 * m.n_channels, p.p);
  const auto s = gamma_task(ctx, p.energy, p.gamma_steps);
  std::vector<std::string> labels;
  for (long n : p.n_list) labels.push_back("large deviation n=" + std::to_string(n));
  std::vector<std::optional<ProbeReport>> reports(p.n_list.size());
  std::vector<std::uint64_t> seeds(p.n_list.size());
  double gamma_sum = NAN;
  if (s) {
    gamma_sum = s->gamma.head(p.p).sum();
    ctx.run_tasks(labels, 1, [&](std::size_t i, std::uint64_t seed) {
      seeds[i] = seed;
      LargeDeviationParams lp;
      lp.p = p.p;
      lp.n = p.n_list[i];
      lp.epsilon = p.epsilon;
      lp.trials = p.trials;
      lp.gamma_sum = gamma_sum;
      lp.threads = ctx.spec().threads;
      reports[i] = large_deviation_probe(m, p.energy, lp, seed, x, x);
    });
  } else {
    for (const auto& l : labels) ctx.fail_task(l, "no Lyapunov estimate available");
  }
  std::optional<NegativeMomentReport> nm;
  std::uint64_t nm_seed = 0;
  ctx.run_tasks({"negative moment"}, 1, [&](std::size_t, std::uint64_t seed) {
    nm_seed = seed;
    nm = negative_moment_probe(m, p.energy, p.p, p.delta, p.moment_steps, p.trials, seed, x,
                               p.checkpoints, ctx.spec().threads);
  });

  Table t{{"n", "p_hat", "failure_rate", "ci_low", "ci_high", "trials", "successes", "epsilon", "gamma_sum",
           "E", "p", "seed", "N", "ell"},
          {}};
  json js = json::array();
  std::vector<ProbeReport> fails;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (!reports[i]) continue;
    const ProbeReport& r = *reports[i];
    t.rows.push_back({fmt(p.n_list[i]), fmt(r.estimate), fmt(1.0 - r.estimate), fmt(r.ci_low), fmt(r.ci_high),
                      fmt(r.trials), fmt(r.successes), fmt(p.epsilon), fmt(gamma_sum), fmt(p.energy), fmt(p.p),
                      fmt_u64(seeds[i]), fmt(m.n_channels), fmt(m.cell_length)});
    json j = probe_json(r);
    j["seed"] = seeds[i];
    js.push_back(j);
    ProbeReport f = r;
    f.estimate = 1.0 - r.estimate;
    f.ci_low = 1.0 - r.ci_high;
    f.ci_high = 1.0 - r.ci_low;
    fails.push_back(f);
    rows.push_back({static_cast<double>(p.n_list[i]), f.estimate, f.ci_low, f.ci_high});
  }
  ctx.write("large_deviation.csv", t.csv());
  ctx.write("large_deviation.json", js.dump(2) + "\n");
  ctx.write("large_deviation.dat", plot_text({"large-deviation failure rate 1 - p_hat vs n"},
                                             {"n", "failure_rate", "ci_low", "ci_high"}, rows));
  if (fails.size() == reports.size()) {
    ctx.note("failure rate non-increasing in n within CI: " + yes_no(monotone_within_ci(fails, false)));
  }
  if (nm) {
    Table tn{{"n", "log_moment", "delta", "p", "E", "trials", "seed", "N", "ell"}, {}};
    for (std::size_t k = 0; k < nm->checkpoints.size(); ++k) {
      tn.rows.push_back({fmt(nm->checkpoints[k]), fmt(nm->log_moments[k]), fmt(p.delta), fmt(p.p),
                         fmt(p.energy), fmt(nm->trials), fmt_u64(nm_seed), fmt(m.n_channels),
                         fmt(m.cell_length)});
    }
    ctx.write("negative_moment.csv", tn.csv());
    json j{{"moment", nm->moment.mean},   {"moment_ci", {nm->moment.ci_low, nm->moment.ci_high}},
           {"slope", nm->fit.slope},      {"slope_stderr", nm->fit.slope_stderr},
           {"xi", nm->xi},                {"trials", nm->trials},
           {"low_trials_warning", nm->low_trials_warning}, {"seed", nm_seed}};
    ctx.write("negative_moment.json", j.dump(2) + "\n");
    ctx.note("negative moment: slope " + fmt(nm->fit.slope) + " +- " + fmt(nm->fit.slope_stderr) +
             ", xi_1 = " + fmt(nm->xi));
  }
}

struct Command {
  std::set<std::string> params;
  std::function<void(const ExperimentSpec&)> plan;
  std::function<void(Context&)> run;
};

const std::map<std::string, Command>& commands() {
  static const std::set<std::string> grid{"energies", "energy_grid"};
  auto with = [](std::set<std::string> a, const std::set<std::string>& b) {
    a.insert(b.begin(), b.end());
    return a;
  };
  static const std::map<std::string, Command> table{
      {"lyapunov-sweep",
       {with({"steps", "reorth_every", "batches", "burn_in"}, grid), [](auto& s) { plan_sweep(s); },
        run_sweep}},
      {"window", {{}, [](auto&) {}, run_window}},
      {"lie-check", {{"n_min", "n_max", "coupling", "energy"}, [](auto& s) { plan_lie(s); }, run_lie}},
      {"ids",
       {with({"half_cells", "samples", "mesh_per_cell", "backend", "holder_interval"}, grid),
        [](auto& s) { plan_ids(s); }, run_ids}},
      {"wegner",
       {{"energy", "half_cells", "kappa", "beta", "mesh_per_cell"}, [](auto& s) { plan_wegner(s); },
        run_wegner}},
      {"good-box",
       {{"energy", "half_cells", "gamma", "gamma_fraction", "gamma_steps", "mesh_per_cell"},
        [](auto& s) { plan_good_box(s); }, run_good_box}},
      {"decay",
       {{"energy", "half_cells", "window_radius", "min_distance", "gamma_steps", "mesh_per_cell"},
        [](auto& s) { plan_decay(s); }, run_decay}},
      {"probes",
       {{"energy", "p", "n_list", "epsilon", "delta", "moment_steps", "checkpoints", "gamma_steps"},
        [](auto& s) { plan_probes(s); }, run_probes}},
  };
  return table;
}

const Command& find_command(const std::string& name) {
  const auto it = commands().find(name);
  if (it == commands().end()) throw ConfigError("command", "unknown command '" + name + "'");
  return it->second;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

const std::vector<std::string>& experiment_commands() {
  static const std::vector<std::string> names{"lyapunov-sweep", "window", "lie-check", "ids",
                                              "wegner",         "good-box", "decay",   "probes"};
  return names;
}

const std::set<std::string>& command_parameters(const std::string& command) {
  return find_command(command).params;
}

std::uint64_t task_seed(std::uint64_t master_seed, const std::string& command, long index) {
  return derive_key(master_seed, {hash_string(command), static_cast<std::uint64_t>(index)});
}

ExperimentSpec make_spec(const std::string& command, const std::string& config_path,
                         const std::string& out_dir, std::optional<std::uint64_t> seed,
                         std::optional<long> trials, int threads) {
  ExperimentSpec s;
  s.command = command;
  s.config = load_config(config_path, command_parameters(command));
  s.out_dir = out_dir;
  s.master_seed = seed ? *seed : s.config.seed.value_or(1);
  s.trials = trials;
  s.threads = std::max(1, threads);
  validate_spec(s);
  return s;
}

void validate_spec(const ExperimentSpec& spec) {
  const Command& cmd = find_command(spec.command);
  for (const auto& [key, value] : spec.config.params) {
    if (!cmd.params.count(key)) throw ConfigError(key, "unknown key '" + key + "' for " + spec.command);
  }
  spec.config.model.validate();
  if (spec.trials && *spec.trials < 1) throw ConfigError("trials", "--trials must be >= 1");
  cmd.plan(spec);
}

bool RunManifest::failed() const {
  return std::any_of(tasks.begin(), tasks.end(), [](const TaskRecord& t) { return !t.ok; });
}

std::string RunManifest::to_json() const {
  json j;
  j["tool"] = "symplyap";
  j["version"] = tool_version;
  j["command"] = command;
  j["config"] = config_text;
  j["master_seed"] = master_seed;
  j["trials"] = trials ? json(*trials) : json(nullptr);
  j["threads"] = threads;
  j["started_utc"] = started_utc;
  j["wall_seconds"] = wall_seconds;
  j["tasks"] = json::array();
  for (const auto& t : tasks) {
    json tj{{"index", t.index}, {"label", t.label}, {"seed", t.seed}, {"status", t.ok ? "ok" : "failed"}};
    if (!t.ok) tj["error"] = t.error;
    j["tasks"].push_back(tj);
  }
  j["files"] = json::array();
  for (const auto& f : files) j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  j["notes"] = notes;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    m.tool_version = j.at("version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.config_text = j.at("config").get<std::string>();
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (!j.at("trials").is_null()) m.trials = j.at("trials").get<long>();
    m.threads = j.value("threads", 1);
    m.started_utc = j.value("started_utc", "");
    m.wall_seconds = j.value("wall_seconds", 0.0);
    for (const auto& t : j.at("tasks")) {
      TaskRecord r;
      r.index = t.at("index").get<long>();
      r.label = t.at("label").get<std::string>();
      r.seed = t.at("seed").get<std::uint64_t>();
      r.ok = t.at("status").get<std::string>() == "ok";
      r.error = t.value("error", "");
      m.tasks.push_back(r);
    }
    for (const auto& f : j.at("files")) {
      m.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                         f.at("bytes").get<std::uintmax_t>()});
    }
    m.notes = j.value("notes", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw ConfigError("manifest", std::string("malformed manifest: ") + e.what());
  }
  return m;
}

RunManifest run(const ExperimentSpec& spec, std::ostream& log) {
  validate_spec(spec);
  const Command& cmd = find_command(spec.command);
  fs::create_directories(spec.out_dir);
  RunManifest manifest;
  manifest.tool_version = SYMPLYAP_VERSION;
  manifest.command = spec.command;
  manifest.config_text = serialize_config(spec.config);
  manifest.master_seed = spec.master_seed;
  manifest.trials = spec.trials;
  manifest.threads = spec.threads;
  manifest.started_utc = utc_now();
  const auto t0 = std::chrono::steady_clock::now();

  Context ctx(spec, log);
  cmd.run(ctx);

  manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.tasks = std::move(ctx.tasks());
  manifest.files = std::move(ctx.files());
  manifest.notes = std::move(ctx.notes());
  std::ofstream f(fs::path(spec.out_dir) / "manifest.json");
  f << manifest.to_json();
  return manifest;
}

ReplayResult replay(const std::string& manifest_path, const std::string& out_dir, int threads,
                    std::ostream& log) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("manifest", "cannot read manifest '" + manifest_path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const RunManifest original = RunManifest::from_json(ss.str());

  ExperimentSpec spec;
  spec.command = original.command;
  spec.config = parse_config(original.config_text, command_parameters(original.command));
  spec.out_dir = out_dir;
  spec.master_seed = original.master_seed;
  spec.trials = original.trials;
  spec.threads = std::max(1, threads);

  ReplayResult result;
  result.manifest = run(spec, log);
  std::map<std::string, std::string> fresh;
  for (const auto& f : result.manifest.files) fresh[f.path] = f.sha256;
  for (const auto& f : original.files) {
    const auto it = fresh.find(f.path);
    if (it == fresh.end() || it->second != f.sha256) result.mismatched.push_back(f.path);
  }
  if (fresh.size() != original.files.size() && result.mismatched.empty()) {
    result.mismatched.push_back("(file list)");
  }
  return result;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("SHA-256 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return sha256_hex(ss.str());
}

}  // namespace symplyap
