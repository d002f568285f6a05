#include "symplyap/stats.hpp"

#include <algorithm>
#include <cmath>

#include "symplyap/errors.hpp"

namespace symplyap {

Interval wilson_interval(long successes, long trials, double z) {
  if (trials <= 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::clamp(std::min(center - half, p), 0.0, 1.0),
          std::clamp(std::max(center + half, p), 0.0, 1.0)};
}

ProbeReport make_probe_report(std::string event, long trials, long successes,
                              std::map<std::string, double> params) {
  if (trials < 0 || successes < 0 || successes > trials) {
    throw ArgumentError("make_probe_report: need 0 <= successes <= trials");
  }
  ProbeReport r;
  r.event = std::move(event);
  r.trials = trials;
  r.successes = successes;
  r.estimate = trials > 0 ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0;
  const Interval ci = wilson_interval(successes, trials);
  r.ci_low = ci.low;
  r.ci_high = ci.high;
  r.params = std::move(params);
  r.low_trials_warning = trials < kMinProbeTrials;
  return r;
}

namespace {
double pairwise(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise(v, h) + pairwise(v + h, n - h);
}
}  // namespace

double pairwise_sum(const std::vector<double>& values) {
  return pairwise(values.data(), values.size());
}

MeanEstimate mean_estimate(const std::vector<double>& samples) {
  MeanEstimate m;
  m.count = static_cast<long>(samples.size());
  if (samples.empty()) return m;
  const double n = static_cast<double>(samples.size());
  m.mean = pairwise_sum(samples) / n;
  if (samples.size() > 1) {
    std::vector<double> sq(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double d = samples[i] - m.mean;
      sq[i] = d * d;
    }
    m.stderr_ = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
  }
  m.ci_low = m.mean - 1.959963984540054 * m.stderr_;
  m.ci_high = m.mean + 1.959963984540054 * m.stderr_;
  return m;
}

MeanEstimate batch_mean_estimate(const std::vector<double>& batch_means) {
  return mean_estimate(batch_means);
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ArgumentError("linear_fit: x and y differ in length");
  if (x.size() < 2) throw ArgumentError("linear_fit: need at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = pairwise_sum(x) / n;
  const double my = pairwise_sum(y) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ArgumentError("linear_fit: all x values coincide");
  LinearFit f;
  f.count = static_cast<long>(x.size());
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    sse += r * r;
  }
  f.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  if (x.size() > 2) {
    const double s2 = sse / (n - 2.0);
    f.slope_stderr = std::sqrt(s2 / sxx);
    f.intercept_stderr = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  }
  return f;
}

}  // namespace symplyap
