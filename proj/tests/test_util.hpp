#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <random>
#include <string>
#include <sys/wait.h>

#include "enova/core.hpp"
#include "enova/scenario.hpp"

namespace enova::testing {

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(ENOVA_SOURCE_DIR) / rel;
}

inline Scenario bundled(const std::string& name) {
  return read_scenario(source_path("scenarios/" + name + ".json"));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("enova-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline MetricSample random_sample(std::mt19937_64& rng, double ts) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> big(0.0, 500.0);
  MetricSample s;
  s.ts = ts;
  s.n_f = big(rng) / 10;
  s.n_r = std::floor(big(rng));
  s.n_a = big(rng) / 7;
  s.n_p = std::floor(big(rng));
  s.t_r = big(rng) / 3;
  s.m_u = u(rng);
  s.g_u = u(rng);
  return s;
}

struct CliRun {
  int status = 0;
  std::string err;
};

// Runs the enova binary with args (already shell-quoted), capturing stderr.
inline CliRun run_cli(const std::string& args) {
  const auto err_path = std::filesystem::temp_directory_path() / "enova-test-stderr.txt";
  const std::string cmd = std::string("\"") + ENOVA_CLI_PATH + "\" " + args + " > /dev/null 2> \"" +
                          err_path.string() + "\"";
  const int raw = std::system(cmd.c_str());
  CliRun r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(err_path);
  std::ostringstream s;
  s << in.rdbuf();
  r.err = s.str();
  return r;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace enova::testing
