#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace peelkit::cli {

enum ExitCode { ok = 0, failure = 1, usage = 2 };

struct RunConfig {
  std::string command;

  // weight source: exactly one of preset, inline weights, config file
  std::string preset;
  std::optional<int> p;
  std::optional<double> H, r, a;
  std::string weights_json;
  std::string config_path;

  double tol = 1e-9;
  int k_neg = 2048;
  int d_max = 40;
  int l = 2;

  std::string mode = "ibpm";
  std::string volume_mode = "exact_small";
  long steps = 1000;
  long l0 = 2;
  std::uint64_t seed = 0x5eed;
  std::uint64_t chain = 0;
  long chains = 10000;
  long cap = 0;

  // scaling-test
  std::vector<std::string> models{"quadrangulation", "triangulation", "geometric:3"};
  long n = 10000;
  long samples = 100000;
  long exp_chains = 1000;
  bool quick = false;
  std::string samples_out;

  std::string out;     // empty: standard output
  std::string format;  // empty: command default
  int threads = 0;     // 0: PEELKIT_THREADS, then logical cores
};

// Help text or a usage error; code is 0 for --help and 2 otherwise.
struct Exit {
  int code;
  std::string text;
};

// Throws Exit on --help or invalid arguments.
RunConfig parse_args(int argc, const char* const* argv);

// Human-readable echo of a parsed config, one key=value per line.
std::string echo(const RunConfig& cfg);

// Runs a command; artifacts go to cfg.out (or out), diagnostics to err as
// "peelkit: error[<code>]: <message>".
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// parse_args + run with the exit-code policy.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace peelkit::cli
