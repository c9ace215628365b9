// procwass: Procrustes-Wasserstein distances and latent Gaussian recovery.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "procwass_cli/commands.hpp"

namespace {

using procwass::cli::CommandOutcome;

bool parse_group(const std::string& group) {
  if (group == "orthogonal") return false;
  if (group == "special-orthogonal") return true;
  throw procwass::Error(procwass::Errc::InvalidArgument, "--group must be 'orthogonal' or 'special-orthogonal'");
}

int emit(const CommandOutcome& outcome, const std::string& out_path) {
  const std::string text = procwass::cli::dump_canonical(outcome.report);
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      std::cerr << "error: " << out_path << ": cannot open for writing\n";
      return procwass::cli::kExitParse;
    }
    out << text;
  }
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Procrustes-Wasserstein distances and latent Gaussian class recovery"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PROCWASS_VERSION_STRING);

  std::string out_path;
  std::string group = "orthogonal";
  std::uint64_t seed = 0;
  const int threads = procwass::cli::threads_from_env();

  // gaussian-dist
  procwass::cli::GaussianDistOptions gopts;
  auto* gauss = app.add_subcommand("gaussian-dist", "Distance between two Gaussians given as JSON specs");
  gauss->add_option("spec0", gopts.spec0, "First Gaussian spec (JSON)")->required();
  gauss->add_option("spec1", gopts.spec1, "Second Gaussian spec (JSON)")->required();
  gauss->add_option("--metric", gopts.metric, "bures | pw")->check(CLI::IsMember({"bures", "pw"}));
  gauss->add_option("--group", group, "orthogonal | special-orthogonal");
  gauss->add_option("--out", out_path, "Write the JSON report here instead of stdout");

  // empirical-dist
  procwass::cli::EmpiricalDistOptions eopts;
  std::string plan_out;
  int weights_col = -1;
  auto* emp = app.add_subcommand("empirical-dist", "Procrustes-Wasserstein distance between two point clouds (CSV)");
  emp->add_option("file0", eopts.file0, "First point cloud (CSV)")->required();
  emp->add_option("file1", eopts.file1, "Second point cloud (CSV)")->required();
  emp->add_option("--group", group, "orthogonal | special-orthogonal");
  emp->add_option("--ot", eopts.ot, "exact | sinkhorn")->check(CLI::IsMember({"exact", "sinkhorn"}));
  emp->add_option("--epsilon", eopts.epsilon, "Sinkhorn regularization (default 0.05 * mean cost)");
  emp->add_option("--restarts", eopts.restarts, "Runs 2 * restarts + 1 starts: identity, two eigenbasis alignments, Haar pairs");
  emp->add_option("--max-iter", eopts.max_iter, "Maximum alternating iterations per start");
  emp->add_option("--tol", eopts.tol, "Relative objective decrease that stops a start");
  emp->add_option("--seed", seed, "Seed for random starts");
  emp->add_option("--out", out_path, "Write the JSON report here instead of stdout");
  emp->add_option("--plan-out", plan_out, "Write the optimal plan as i,j,mass CSV");
  emp->add_option("--weights-col", weights_col, "Column index holding point weights");

  // recover
  procwass::cli::RecoverOptions ropts;
  std::string data_path;
  std::string spec_path;
  std::string cov_diag;
  std::string n_grid;
  long single_n = 0;
  std::string curve_out;
  auto* rec = app.add_subcommand("recover", "Estimate the orthogonal class of a latent Gaussian");
  rec->add_option("--data", data_path, "Observations CSV (single-dataset mode)");
  rec->add_option("--spec", spec_path, "Latent Gaussian spec (JSON) for simulation");
  rec->add_option("--cov-diag", cov_diag, "Latent diagonal covariance for simulation, e.g. 1,4,9");
  rec->add_option("--n", single_n, "Samples per replicate");
  rec->add_option("--n-grid", n_grid, "Comma list of sample sizes (sweep mode)");
  rec->add_option("--replicates", ropts.replicates, "Replicates per sample size");
  rec->add_option("--bootstrap", ropts.bootstrap, "Bootstrap resamples in single-dataset mode (0: plug-in)");
  rec->add_flag("--center", ropts.subtract_mean, "Subtract the sample mean before the second moment");
  rec->add_option("--group", group, "Group of the hidden transform: orthogonal | special-orthogonal");
  rec->add_option("--seed", seed, "Seed");
  rec->add_option("--out", out_path, "Write the JSON report here instead of stdout");
  rec->add_option("--curve-out", curve_out, "Write the error curve (n, mean, std and estimate class error) as CSV");

  // simulate
  procwass::cli::SimulateOptions sopts;
  auto* sim = app.add_subcommand("simulate", "Sample r = V p, p ~ N(0, S), V Haar-random");
  sim->add_option("--spec", spec_path, "Latent Gaussian spec (JSON)");
  sim->add_option("--cov-diag", cov_diag, "Latent diagonal covariance, e.g. 1,4,9");
  sim->add_option("--n", sopts.n, "Number of samples");
  sim->add_option("--group", group, "orthogonal | special-orthogonal");
  sim->add_flag("--identity-transform", sopts.identity_transform, "Use V = I");
  sim->add_option("--seed", seed, "Seed");
  sim->add_option("--out", sopts.out, "Samples CSV path")->required();

  // selftest
  auto* self = app.add_subcommand("selftest", "Run the built-in invariant checks");
  self->add_option("--seed", seed, "Seed");
  self->add_option("--out", out_path, "Write the JSON report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return procwass::cli::kExitParse;
  }

  try {
    const bool special = parse_group(group);
    if (*gauss) {
      gopts.restrict_special = special;
      return emit(procwass::cli::cmd_gaussian_dist(gopts), out_path);
    }
    if (*emp) {
      eopts.restrict_special = special;
      eopts.seed = seed;
      eopts.threads = threads;
      if (!plan_out.empty()) eopts.plan_out = plan_out;
      if (weights_col >= 0) eopts.weights_col = weights_col;
      return emit(procwass::cli::cmd_empirical_dist(eopts), out_path);
    }
    if (*rec) {
      ropts.restrict_special = special;
      ropts.seed = seed;
      ropts.threads = threads;
      if (!data_path.empty()) ropts.data = data_path;
      if (!spec_path.empty()) ropts.cov.spec_path = spec_path;
      if (!cov_diag.empty()) ropts.cov.diagonal = procwass::cli::parse_double_list(cov_diag);
      if (!n_grid.empty()) {
        ropts.n_grid = procwass::cli::parse_long_list(n_grid);
      } else if (single_n > 0) {
        ropts.n_grid = {single_n};
      }
      if (!curve_out.empty()) ropts.curve_out = curve_out;
      return emit(procwass::cli::cmd_recover(ropts), out_path);
    }
    if (*sim) {
      sopts.restrict_special = special;
      sopts.seed = seed;
      if (!spec_path.empty()) sopts.cov.spec_path = spec_path;
      if (!cov_diag.empty()) sopts.cov.diagonal = procwass::cli::parse_double_list(cov_diag);
      return emit(procwass::cli::cmd_simulate(sopts), std::string{});
    }
    if (*self) {
      return emit(procwass::cli::cmd_selftest({seed}), out_path);
    }
  } catch (const procwass::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return procwass::cli::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return procwass::cli::kExitFailure;
  }
  return procwass::cli::kExitFailure;
}
