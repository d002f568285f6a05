#include "symplyap/config_io.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "symplyap/errors.hpp"

namespace symplyap {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ConfigError(key, "expected a finite number, got '" + t + "'");
  }
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(key, item));
  if (out.empty()) throw ConfigError(key, "expected a comma-separated list of numbers");
  return out;
}

long parse_integer(const std::string& key, const std::string& text) {
  const double v = parse_number(key, text);
  if (v != std::floor(v) || std::abs(v) > 9.0e15) throw ConfigError(key, "expected an integer");
  return static_cast<long>(v);
}

}  // namespace

double ConfigFile::number(const std::string& key, double fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : parse_number(key, it->second);
}

long ConfigFile::integer(const std::string& key, long fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : parse_integer(key, it->second);
}

std::vector<double> ConfigFile::numbers(const std::string& key, std::vector<double> fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : parse_list(key, it->second);
}

std::string ConfigFile::word(const std::string& key, std::string fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

ConfigFile parse_config(const std::string& text, const std::set<std::string>& allowed_params) {
  ConfigFile cfg;
  std::map<std::string, std::string> entries;
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(trim(line), "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(line_no) + ": empty key");
    if (!model_keys().count(key) && !allowed_params.count(key)) {
      throw ConfigError(key, "unknown key '" + key + "'");
    }
    if (value.empty()) throw ConfigError(key, "missing value for '" + key + "'");
    if (!entries.emplace(key, value).second) throw ConfigError(key, "duplicate key '" + key + "'");
  }

  auto take = [&](const std::string& key) -> const std::string* {
    const auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  };
  ModelConfig& m = cfg.model;
  if (const auto* v = take("n_channels")) {
    const long n = parse_integer("n_channels", *v);
    if (n < 1 || n > 64) throw ConfigError("n_channels", "n_channels must lie in [1, 64]");
    m.n_channels = static_cast<int>(n);
    m.couplings.assign(m.n_channels, 1.0);
  }
  if (const auto* v = take("cell_length")) m.cell_length = parse_number("cell_length", *v);
  if (const auto* v = take("couplings")) m.couplings = parse_list("couplings", *v);
  if (const auto* v = take("disorder_support")) {
    m.disorder_support = parse_list("disorder_support", *v);
    if (!take("disorder_weights")) {
      m.disorder_weights.assign(m.disorder_support.size(), 1.0 / m.disorder_support.size());
    }
  }
  if (const auto* v = take("disorder_weights")) m.disorder_weights = parse_list("disorder_weights", *v);
  if (const auto* v = take("log_chart_radius")) {
    m.log_chart_radius = parse_number("log_chart_radius", *v);
  }
  if (const auto* v = take("seed")) {
    const std::string t = trim(*v);
    std::uint64_t s = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), s);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
      throw ConfigError("seed", "seed must be an unsigned 64-bit integer");
    }
    cfg.seed = s;
  }
  m.validate();
  for (const auto& [key, value] : entries) {
    if (!model_keys().count(key)) cfg.params[key] = value;
  }
  return cfg;
}

ConfigFile load_config(const std::string& path, const std::set<std::string>& allowed_params) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config", "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), allowed_params);
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string serialize_config(const ConfigFile& cfg) {
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
    return s;
  };
  std::ostringstream out;
  const ModelConfig& m = cfg.model;
  out << "n_channels = " << m.n_channels << "\n"
      << "cell_length = " << format_double(m.cell_length) << "\n"
      << "couplings = " << list(m.couplings) << "\n"
      << "disorder_support = " << list(m.disorder_support) << "\n"
      << "disorder_weights = " << list(m.disorder_weights) << "\n"
      << "log_chart_radius = " << format_double(m.log_chart_radius) << "\n";
  if (cfg.seed) out << "seed = " << *cfg.seed << "\n";
  for (const auto& [key, value] : cfg.params) out << key << " = " << value << "\n";
  return out.str();
}

}  // namespace symplyap
