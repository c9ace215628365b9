#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "procwass/error.hpp"
#include "procwass_cli/json_io.hpp"

namespace procwass::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitParse = 2,
  kExitDimension = 3,
  kExitNotPsd = 4,
  kExitNotConverged = 5,
};

int exit_code_for(Errc code);

struct CommandOutcome {
  json report;
  int exit_code = kExitOk;
};

struct GaussianDistOptions {
  std::string spec0;
  std::string spec1;
  std::string metric = "pw";  // "pw" | "bures"
  bool restrict_special = false;
};

struct EmpiricalDistOptions {
  std::string file0;
  std::string file1;
  bool restrict_special = false;
  std::string ot = "exact";  // "exact" | "sinkhorn"
  double epsilon = 0;        // <= 0: 0.05 * mean(C)
  int restarts = 4;
  int max_iter = 200;
  double tol = 1e-9;
  std::uint64_t seed = 0;
  std::optional<std::string> plan_out;
  std::optional<int> weights_col;
  int threads = 1;
};

/// Latent covariance for simulation: a GaussianSpec file or a diagonal.
struct CovarianceSource {
  std::optional<std::string> spec_path;
  std::vector<double> diagonal;
};

struct RecoverOptions {
  std::optional<std::string> data;  // CSV of observations; otherwise simulate
  CovarianceSource cov;
  std::vector<long> n_grid{1000};
  long replicates = 50;
  long bootstrap = 100;  // single-dataset mode; 0 = plug-in estimate
  bool subtract_mean = false;
  bool restrict_special = false;
  std::uint64_t seed = 0;
  std::optional<std::string> curve_out;
  int threads = 1;
};

struct SimulateOptions {
  CovarianceSource cov;
  long n = 1000;
  bool restrict_special = false;
  bool identity_transform = false;
  std::uint64_t seed = 0;
  std::string out;
};

struct SelftestOptions {
  std::uint64_t seed = 0;
};

CommandOutcome cmd_gaussian_dist(const GaussianDistOptions& opts);
CommandOutcome cmd_empirical_dist(const EmpiricalDistOptions& opts);
CommandOutcome cmd_recover(const RecoverOptions& opts);
CommandOutcome cmd_simulate(const SimulateOptions& opts);
CommandOutcome cmd_selftest(const SelftestOptions& opts);

/// Reads PROCWASS_THREADS (>= 1), defaulting to 1.
int threads_from_env();

std::vector<long> parse_long_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

}  // namespace procwass::cli
