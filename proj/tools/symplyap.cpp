// symplyap: command-line front end for the experiment harness.
//
//   symplyap <command> --config <file> [--out <dir>] [--seed <u64>] [--trials <n>] [--threads <n>]
//   symplyap replay --manifest <file> [--out <dir>] [--threads <n>]
//
// Exit codes: 0 success, 2 configuration error, 3 task failure.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "symplyap/errors.hpp"
#include "symplyap/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitTask = 3;

std::string command_list() {
  std::string s;
  for (const auto& c : symplyap::experiment_commands()) s += (s.empty() ? "" : " | ") + c;
  return s + " | replay";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for one-dimensional matrix-valued Anderson models"};
  app.set_version_flag("--version", std::string(SYMPLYAP_VERSION));

  std::string command, config, manifest, out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<long> trials;
  int threads = 1;
  app.add_option("command", command, command_list())->required();
  app.add_option("--config", config, "configuration file (key = value)");
  app.add_option("--manifest", manifest, "manifest.json to replay");
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "master seed (overrides the config file)");
  app.add_option("--trials", trials, "trial or sample count override");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (command == "replay") {
      if (manifest.empty()) throw symplyap::ConfigError("manifest", "replay needs --manifest <file>");
      const auto r = symplyap::replay(manifest, out, threads, std::cout);
      for (const auto& f : r.mismatched) std::cout << "replay: " << f << " differs\n";
      std::cout << "replay: " << (r.identical() ? "identical" : "mismatch") << "\n";
      return r.identical() ? 0 : kExitTask;
    }
    if (config.empty()) throw symplyap::ConfigError("config", command + " needs --config <file>");
    const auto spec = symplyap::make_spec(command, config, out, seed, trials, threads);
    const auto m = symplyap::run(spec, std::cout);
    std::cout << "wrote " << m.files.size() << " files and manifest.json to " << out << "\n";
    return m.failed() ? kExitTask : 0;
  } catch (const symplyap::ConfigError& e) {
    std::cerr << "config error [" << e.key() << "]: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTask;
  }
}
