#pragma once

#include <map>
#include <string>
#include <vector>

namespace symplyap {

/// Monte-Carlo estimate of an event probability.
struct ProbeReport {
  std::string event;
  long trials = 0;
  long successes = 0;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::map<std::string, double> params;
  bool low_trials_warning = false;  // trials < kMinProbeTrials
  long flagged = 0;                 // realizations with a numerical flag (e.g. singular solve)
};

inline constexpr long kMinProbeTrials = 100;

struct Interval {
  double low;
  double high;
};

/// Wilson score interval, 95% by default. Always contains successes/trials.
Interval wilson_interval(long successes, long trials, double z = 1.959963984540054);

ProbeReport make_probe_report(std::string event, long trials, long successes,
                              std::map<std::string, double> params = {});

/// Pairwise (cascade) summation; deterministic for a given input order.
double pairwise_sum(const std::vector<double>& values);

struct MeanEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  long count = 0;
};

/// Sample mean with normal 95% interval.
MeanEstimate mean_estimate(const std::vector<double>& samples);

/// Mean and standard error from batch means (one value per batch).
MeanEstimate batch_mean_estimate(const std::vector<double>& batch_means);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  double r_squared = 0.0;
  long count = 0;
};

/// Ordinary least squares y ≈ slope·x + intercept. Needs ≥ 2 distinct x.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace symplyap
