#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "symplyap/config_io.hpp"

namespace symplyap {

/// One CLI invocation: the command, its resolved configuration and the run controls.
struct ExperimentSpec {
  std::string command;
  ConfigFile config;
  std::string out_dir = ".";
  std::uint64_t master_seed = 1;
  std::optional<long> trials;  // overrides the command's default trial/sample count
  int threads = 1;             // never affects numeric output
};

struct TaskRecord {
  long index = 0;
  std::string label;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
};

struct FileRecord {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string tool_version;
  std::string command;
  std::string config_text;  // serialize_config of the resolved configuration
  std::uint64_t master_seed = 0;
  std::optional<long> trials;
  int threads = 1;
  std::string started_utc;
  double wall_seconds = 0.0;
  std::vector<TaskRecord> tasks;
  std::vector<FileRecord> files;
  std::vector<std::string> notes;  // human-readable summary lines

  bool failed() const;
  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

const std::vector<std::string>& experiment_commands();

/// Parameter keys a command accepts in addition to the model keys. Throws ConfigError for
/// an unknown command (key "command").
const std::set<std::string>& command_parameters(const std::string& command);

/// Builds a spec from a config file; --seed beats the file's seed, which beats 1.
ExperimentSpec make_spec(const std::string& command, const std::string& config_path,
                         const std::string& out_dir, std::optional<std::uint64_t> seed,
                         std::optional<long> trials, int threads);

/// Parses and checks every parameter the command will read. Throws ConfigError naming the key.
void validate_spec(const ExperimentSpec& spec);

/// task seed = derive_key(master, {hash(command), index}).
std::uint64_t task_seed(std::uint64_t master_seed, const std::string& command, long index);

/// Runs the experiment, writes its files and manifest.json into spec.out_dir.
/// Per-task numerical failures are recorded in the manifest, not thrown.
RunManifest run(const ExperimentSpec& spec, std::ostream& log);

struct ReplayResult {
  RunManifest manifest;
  std::vector<std::string> mismatched;  // files whose checksum differs from the original
  bool identical() const { return mismatched.empty() && !manifest.failed(); }
};

/// Re-runs the experiment recorded in a manifest into out_dir and compares checksums.
ReplayResult replay(const std::string& manifest_path, const std::string& out_dir, int threads,
                    std::ostream& log);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

}  // namespace symplyap
