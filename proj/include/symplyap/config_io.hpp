#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "symplyap/model.hpp"

namespace symplyap {

/// Parsed configuration file.
///
/// Grammar, one entry per line:
///   key = value            value is a number, a word, or a comma-separated list
///   # comment              also allowed after a value
/// Blank lines are ignored; a key may appear once. Model keys are n_channels,
/// cell_length, couplings, disorder_support, disorder_weights, log_chart_radius and
/// seed. Any other key must be a parameter of the command being run.
struct ConfigFile {
  ModelConfig model;
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> params;  // command parameters, raw text

  bool has(const std::string& key) const { return params.count(key) > 0; }
  double number(const std::string& key, double fallback) const;
  long integer(const std::string& key, long fallback) const;
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const;
  std::string word(const std::string& key, std::string fallback) const;
};

inline const std::set<std::string>& model_keys() {
  static const std::set<std::string> keys{"n_channels",       "cell_length",
                                          "couplings",        "disorder_support",
                                          "disorder_weights", "log_chart_radius",
                                          "seed"};
  return keys;
}

/// Parses text. Keys outside model_keys() ∪ allowed_params raise ConfigError naming the key,
/// as do malformed values and an invalid model.
ConfigFile parse_config(const std::string& text, const std::set<std::string>& allowed_params = {});
ConfigFile load_config(const std::string& path, const std::set<std::string>& allowed_params = {});

/// Canonical text form (model keys first, then parameters in key order); parse_config of
/// the result reproduces the same ConfigFile.
std::string serialize_config(const ConfigFile& cfg);

/// Shortest decimal text that round-trips a double.
std::string format_double(double value);

}  // namespace symplyap
