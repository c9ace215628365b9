#include "procwass_cli/commands.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "procwass/procwass.hpp"
#include "procwass_cli/csv.hpp"

namespace procwass::cli {

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::Parse:
    case Errc::NonFinite:
    case Errc::InvalidArgument:
      return kExitParse;
    case Errc::DimensionMismatch:
      return kExitDimension;
    case Errc::NotPSD:
    case Errc::SingularCovariance:
      return kExitNotPsd;
    case Errc::NotConverged:
    case Errc::NumericalOverflow:
      return kExitNotConverged;
    case Errc::InfeasibleWeights:
      return kExitParse;
  }
  return kExitFailure;
}

int threads_from_env() {
  const char* raw = std::getenv("PROCWASS_THREADS");
  if (!raw) return 1;
  int value = 1;
  const std::string_view s(raw);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || value < 1) return 1;
  return value;
}

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    if (first == std::string::npos) throw Error(Errc::Parse, std::string("empty entry in ") + what);
    const std::string_view s(item.data() + first, last - first + 1);
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw Error(Errc::Parse, std::string("cannot parse '") + std::string(s) + "' in " + what);
    }
    out.push_back(value);
  }
  if (out.empty()) throw Error(Errc::Parse, std::string("empty ") + what);
  return out;
}

json base_report(const std::string& command, const RunManifest& manifest) {
  json doc;
  doc["schema"] = kSchema;
  doc["command"] = command;
  doc["manifest"] = manifest;
  return doc;
}

SymmetricMatrix<double> covariance_from(const CovarianceSource& src) {
  if (src.spec_path) {
    const auto spec = read_gaussian_spec(*src.spec_path);
    return to_distribution(spec, *src.spec_path).covariance();
  }
  if (src.diagonal.empty()) throw Error(Errc::InvalidArgument, "no latent covariance given (--spec or --cov-diag)");
  const Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(src.diagonal.data(), Eigen::Index(src.diagonal.size()));
  SymmetricMatrix<double> cov = SymmetricMatrix<double>::diagonal(diag);
  require_psd(cov, "--cov-diag");
  return cov;
}

json covariance_parameters(const CovarianceSource& src) {
  json p;
  if (src.spec_path) p["spec"] = *src.spec_path;
  if (!src.diagonal.empty()) p["cov_diag"] = src.diagonal;
  return p;
}

std::vector<std::string> covariance_inputs(const CovarianceSource& src) {
  if (src.spec_path) return {*src.spec_path};
  return {};
}

DiscreteMeasure<double> measure_from(const PointTable& table, const std::string& path) {
  try {
    if (table.weights) return DiscreteMeasure<double>(table.points, *table.weights);
    return DiscreteMeasure<double>::uniform(table.points);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

json report_json(const RecoveryReport<double>& r) {
  json out;
  out["n"] = r.n_per_replicate;
  out["replicates"] = r.replicates;
  out["estimated_class"] = vector_json(r.estimated_class.sqrt_eigenvalues());
  out["per_replicate_sqrt_spectra"] = matrix_json(r.per_replicate_sqrt_spectra);
  if (r.true_class) out["true_class"] = vector_json(r.true_class->sqrt_eigenvalues());
  if (r.class_error) {
    out["class_error"] = *r.class_error;
    out["mean_replicate_error"] = r.mean_replicate_error();
    out["std_replicate_error"] = r.std_replicate_error();
  }
  return out;
}

}  // namespace

std::vector<long> parse_long_list(const std::string& text) { return parse_list<long>(text, "integer list"); }
std::vector<double> parse_double_list(const std::string& text) { return parse_list<double>(text, "number list"); }

CommandOutcome cmd_gaussian_dist(const GaussianDistOptions& opts) {
  if (opts.metric != "pw" && opts.metric != "bures") {
    throw Error(Errc::InvalidArgument, "--metric must be 'pw' or 'bures'");
  }
  const auto g0 = to_distribution(read_gaussian_spec(opts.spec0), opts.spec0);
  const auto g1 = to_distribution(read_gaussian_spec(opts.spec1), opts.spec1);
  if (g0.dim() != g1.dim()) {
    throw Error(Errc::DimensionMismatch, opts.spec0 + " has dimension " + std::to_string(g0.dim()) + " but " +
                                             opts.spec1 + " has dimension " + std::to_string(g1.dim()));
  }

  json params{{"metric", opts.metric},
              {"group", opts.restrict_special ? "special-orthogonal" : "orthogonal"}};
  CommandOutcome out;
  out.report = base_report("gaussian-dist", make_manifest("gaussian-dist", params, 0, {opts.spec0, opts.spec1}));
  json& doc = out.report;
  doc["metric"] = opts.metric;
  doc["dim"] = g0.dim();
  doc["mean_gap"] = (g0.mean() - g1.mean()).norm();
  doc["sqrt_spectra"] = json::array({vector_json(canonical_class(g0).sqrt_eigenvalues()),
                                     vector_json(canonical_class(g1).sqrt_eigenvalues())});
  if (opts.metric == "bures") {
    doc["distance"] = bures_w2(g0, g1);
  } else {
    const auto pw = pw_gaussian(g0, g1, opts.restrict_special);
    doc["distance"] = pw.distance;
    doc["theta_star"] = matrix_json(pw.theta_star.matrix());
    doc["certificate"] = pw.certificate;
  }
  return out;
}

CommandOutcome cmd_empirical_dist(const EmpiricalDistOptions& opts) {
  if (opts.ot != "exact" && opts.ot != "sinkhorn") throw Error(Errc::InvalidArgument, "--ot must be 'exact' or 'sinkhorn'");
  const auto t0 = read_points_csv(opts.file0, opts.weights_col);
  const auto t1 = read_points_csv(opts.file1, opts.weights_col);
  if (t0.points.cols() != t1.points.cols()) {
    throw Error(Errc::DimensionMismatch, opts.file0 + " has " + std::to_string(t0.points.cols()) + " coordinates but " +
                                             opts.file1 + " has " + std::to_string(t1.points.cols()));
  }
  const auto x = measure_from(t0, opts.file0);
  const auto y = measure_from(t1, opts.file1);

  AlignConfig cfg;
  cfg.restrict_special = opts.restrict_special;
  cfg.num_restarts = opts.restarts;
  cfg.max_outer_iter = opts.max_iter;
  cfg.rel_tol = opts.tol;
  cfg.seed = opts.seed;
  cfg.threads = opts.threads;
  cfg.ot_backend.kind = opts.ot == "exact" ? SolverKind::Exact : SolverKind::Sinkhorn;
  cfg.ot_backend.epsilon = opts.epsilon;

  const auto result = pw_empirical(x, y, cfg);

  json params{{"group", opts.restrict_special ? "special-orthogonal" : "orthogonal"},
              {"ot", opts.ot},
              {"epsilon", opts.epsilon},
              {"restarts", opts.restarts},
              {"max_iter", opts.max_iter},
              {"tol", opts.tol}};
  if (opts.weights_col) params["weights_col"] = *opts.weights_col;
  CommandOutcome out;
  out.report = base_report("empirical-dist", make_manifest("empirical-dist", params, opts.seed, {opts.file0, opts.file1}));
  json& doc = out.report;
  doc["distance"] = result.distance;
  doc["theta_star"] = matrix_json(result.theta_star.matrix());
  doc["translation"] = vector_json(result.translation);
  doc["trace"] = result.trace;
  doc["converged"] = result.converged;
  doc["best_start"] = result.best_start;
  doc["start_objectives"] = result.start_objectives;
  doc["n0"] = x.size();
  doc["n1"] = y.size();
  doc["dim"] = x.dim();

  if (opts.plan_out) {
    std::ofstream plan(*opts.plan_out, std::ios::binary);
    if (!plan) throw Error(Errc::Parse, *opts.plan_out + ": cannot open for writing");
    plan << "i,j,mass\n";
    const auto& c = result.plan.coupling;
    for (Eigen::Index i = 0; i < c.outerSize(); ++i) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(c, i); it; ++it) {
        plan << i << ',' << it.col() << ',' << format_double(it.value()) << '\n';
      }
    }
  }
  out.exit_code = result.converged ? kExitOk : kExitNotConverged;
  return out;
}

CommandOutcome cmd_recover(const RecoverOptions& opts) {
  CommandOutcome out;
  if (opts.data) {
    const auto table = read_points_csv(*opts.data);
    const ObservationSet<double> obs(table.points);
    const auto report = opts.bootstrap > 0 ? bootstrap_estimate(obs, opts.bootstrap, opts.seed, opts.subtract_mean)
                                           : plugin_estimate(obs, opts.subtract_mean);
    json params{{"mode", opts.bootstrap > 0 ? "bootstrap" : "plugin"},
                {"bootstrap", opts.bootstrap},
                {"center", opts.subtract_mean}};
    out.report = base_report("recover", make_manifest("recover", params, opts.seed, {*opts.data}));
    out.report["reports"] = json::array({report_json(report)});
    return out;
  }

  const auto cov = covariance_from(opts.cov);
  std::vector<Eigen::Index> grid(opts.n_grid.begin(), opts.n_grid.end());
  RecoveryOptions ropts;
  ropts.restrict_special = opts.restrict_special;
  ropts.threads = opts.threads;
  const auto reports = recovery_experiment(cov, grid, opts.replicates, opts.seed, ropts);

  json params = covariance_parameters(opts.cov);
  params["mode"] = "simulate";
  params["n_grid"] = opts.n_grid;
  params["replicates"] = opts.replicates;
  params["group"] = opts.restrict_special ? "special-orthogonal" : "orthogonal";
  out.report = base_report("recover", make_manifest("recover", params, opts.seed, covariance_inputs(opts.cov)));
  json list = json::array();
  for (const auto& r : reports) list.push_back(report_json(r));
  out.report["reports"] = std::move(list);

  if (opts.curve_out) {
    Eigen::MatrixXd curve(Eigen::Index(reports.size()), 4);
    for (std::size_t k = 0; k < reports.size(); ++k) {
      curve(Eigen::Index(k), 0) = double(reports[k].n_per_replicate);
      curve(Eigen::Index(k), 1) = reports[k].mean_replicate_error();
      curve(Eigen::Index(k), 2) = reports[k].std_replicate_error();
      curve(Eigen::Index(k), 3) = *reports[k].class_error;
    }
    write_matrix_csv(*opts.curve_out, curve, "n,mean_class_error,std_class_error,estimate_class_error");
  }
  return out;
}

CommandOutcome cmd_simulate(const SimulateOptions& opts) {
  if (opts.out.empty()) throw Error(Errc::InvalidArgument, "simulate needs --out <csv path>");
  if (opts.n < 1) throw Error(Errc::InvalidArgument, "--n must be >= 1");
  const auto cov = covariance_from(opts.cov);
  const auto v = opts.identity_transform
                     ? OrthogonalMatrix<double>::identity(cov.dim())
                     : random_orthogonal<double>(cov.dim(), derive_seed(opts.seed, 0), opts.restrict_special);
  const auto obs = simulate_observations(cov, v, opts.n, derive_seed(opts.seed, 1));
  write_matrix_csv(opts.out, obs.samples());

  json params = covariance_parameters(opts.cov);
  params["n"] = opts.n;
  params["group"] = opts.restrict_special ? "special-orthogonal" : "orthogonal";
  params["identity_transform"] = opts.identity_transform;
  params["out"] = opts.out;
  CommandOutcome out;
  out.report = base_report("simulate", make_manifest("simulate", params, opts.seed, covariance_inputs(opts.cov)));
  out.report["n"] = opts.n;
  out.report["dim"] = cov.dim();
  out.report["transform"] = matrix_json(v.matrix());
  out.report["true_class"] = vector_json(sqrt_spectrum(cov));
  out.report["samples_sha256"] = sha256_file(opts.out);
  return out;
}

}  // namespace procwass::cli
