// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "procwass/procwass.hpp"
#include "test_support.hpp"

using namespace procwass;
using namespace procwass::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

GaussianDistribution<double> random_gaussian_d(std::mt19937_64& rng) {
  static const int dims[] = {2, 3, 5};
  return random_gaussian(rng, dims[rng() % 3]);
}

Outcome closed_form_vs_brute_force() {
  std::mt19937_64 rng(101);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    const auto g0 = random_gaussian(rng, 2);
    const auto g1 = random_gaussian(rng, 2);
    const double oracle = brute_force_pw_2d(g0.covariance().matrix(), g1.covariance().matrix(), 100000);
    worst = std::max(worst, std::abs(pw_gaussian(g0, g1).distance - oracle));
  }
  return {worst <= 1e-4, "max |closed form - grid| = " + fmt("%.3g", worst) + " (tol 1e-4)"};
}

Outcome certificate_identity() {
  std::mt19937_64 rng(102);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const auto g0 = random_gaussian_d(rng);
    const auto g1 = random_gaussian(rng, g0.dim());
    const auto r = pw_gaussian(g0, g1);
    const double f = gaussian_F(r.theta_star, g0.covariance(), g1.covariance());
    worst = std::max(worst, std::abs(f - r.class0.sqrt_eigenvalues().dot(r.class1.sqrt_eigenvalues())));
  }
  return {worst <= 1e-8, "max |F(theta*) - <sqrt a0, sqrt a1>| = " + fmt("%.3g", worst) + " (tol 1e-8)"};
}

Outcome invariance_and_pseudometric() {
  std::mt19937_64 rng(103);
  double worst_invariance = 0;
  for (int t = 0; t < 100; ++t) {
    const auto g = random_gaussian_d(rng);
    const auto o = random_orthogonal<double>(g.dim(), rng(), false);
    worst_invariance = std::max(worst_invariance, pw_gaussian(pushforward(o, g), g).distance);
  }
  bool symmetric = true;
  double worst_triangle = 0;
  for (int t = 0; t < 200; ++t) {
    const auto a = random_gaussian_d(rng);
    const auto b = random_gaussian(rng, a.dim());
    const auto c = random_gaussian(rng, a.dim());
    const double ab = pw_gaussian(a, b).distance;
    symmetric = symmetric && ab == pw_gaussian(b, a).distance;
    const double excess = pw_gaussian(a, c).distance - ab - pw_gaussian(b, c).distance;
    worst_triangle = std::max(worst_triangle, excess);
  }
  const bool pass = worst_invariance < 1e-8 && symmetric && worst_triangle <= 1e-8;
  return {pass, "max pw(O#g, g) = " + fmt("%.3g", worst_invariance) + ", symmetry " +
                    (symmetric ? "exact" : "broken") + ", max triangle excess = " + fmt("%.3g", worst_triangle)};
}

Outcome length_inequality() {
  std::mt19937_64 rng(104);
  double worst = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < 200; ++t) {
    const auto g0 = random_gaussian_d(rng);
    const auto g1 = random_gaussian(rng, g0.dim());
    worst = std::max(worst, pw_gaussian(g0, g1).distance - bures_w2(centered(g0), centered(g1)));
  }
  return {worst <= 1e-8, "max (pw - centered Bures) = " + fmt("%.3g", worst) + " (tol 1e-8)"};
}

Outcome exact_ot_enumeration() {
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<double> unit;
  double worst_cost = 0, worst_gap = 0;
  int instances = 0;
  for (Eigen::Index n = 1; n <= 6; ++n) {
    for (int t = 0; t < 40; ++t, ++instances) {
      Eigen::MatrixXd xs(n, 2), ys(n, 2);
      for (Eigen::Index i = 0; i < n; ++i) {
        xs.row(i) << unit(rng), unit(rng);
        ys.row(i) << unit(rng), unit(rng);
      }
      const auto mu = DiscreteMeasure<double>::uniform(xs);
      const auto nu = DiscreteMeasure<double>::uniform(ys);
      const auto c = cost_matrix(mu, nu);
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      double best = std::numeric_limits<double>::infinity();
      do {
        double s = 0;
        for (Eigen::Index i = 0; i < n; ++i) s += c(i, perm[std::size_t(i)]);
        best = std::min(best, s / double(n));
      } while (std::next_permutation(perm.begin(), perm.end()));
      const auto plan = solve_exact(mu, nu, c);
      worst_cost = std::max(worst_cost, std::abs(plan_cost(plan, c) - best));
      worst_gap = std::max(worst_gap, std::abs(certify(plan, mu, nu, c).relative_gap));
    }
  }
  return {worst_cost <= 1e-9 && worst_gap < 1e-7,
          std::to_string(instances) + " instances, max cost error = " + fmt("%.3g", worst_cost) +
              ", max relative gap = " + fmt("%.3g", worst_gap)};
}

Outcome sinkhorn_fidelity() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit;
  Eigen::MatrixXd xs(50, 2), ys(50, 2);
  for (Eigen::Index i = 0; i < 50; ++i) {
    xs.row(i) << unit(rng), unit(rng);
    ys.row(i) << unit(rng) + 1.0, unit(rng);
  }
  const auto mu = DiscreteMeasure<double>::uniform(xs);
  const auto nu = DiscreteMeasure<double>::uniform(ys);
  const auto c = cost_matrix(mu, nu);
  const double exact = plan_cost(solve_exact(mu, nu, c), c);
  SinkhornOptions<double> opts;
  opts.epsilon = 0.01 * c.values.mean();
  const auto plan = solve_sinkhorn(mu, nu, c, opts);
  const Eigen::MatrixXd p(plan.coupling);
  const double violation = std::max((p.rowwise().sum() - mu.weights()).cwiseAbs().maxCoeff(),
                                    (p.colwise().sum().transpose() - nu.weights()).cwiseAbs().maxCoeff());
  const double rel = std::abs(plan_cost(plan, c) - exact) / exact;
  return {rel <= 0.01 && violation < 1e-6,
          "relative cost error = " + fmt("%.3g", rel) + " (tol 0.01), marginal violation = " + fmt("%.3g", violation)};
}

Outcome empirical_convergence() {
  std::mt19937_64 rng(106);
  const Eigen::Index n = 5000;
  const Eigen::MatrixXd x = gaussian_matrix(rng, n, 2) * Eigen::Vector2d(1, 2).asDiagonal();
  const Eigen::MatrixXd o = random_orthogonal<double>(2, rng(), false).matrix();
  const Eigen::MatrixXd y = gaussian_matrix(rng, n, 2) * Eigen::Vector2d(3, 4).asDiagonal() * o.transpose();
  AlignConfig cfg;
  cfg.num_restarts = 1;
  cfg.seed = 106;
  const auto r = pw_empirical(DiscreteMeasure<double>::uniform(x), DiscreteMeasure<double>::uniform(y), cfg);
  bool monotone = true;
  for (std::size_t k = 1; k < r.trace.size(); ++k) monotone = monotone && r.trace[k] <= r.trace[k - 1];
  const double target = 2 * std::sqrt(2.0);
  const double rel = std::abs(r.distance - target) / target;
  return {rel <= 0.05 && monotone, "distance = " + fmt("%.6f", r.distance) + " vs 2 sqrt 2, relative error = " +
                                       fmt("%.3g", rel) + ", trace " + (monotone ? "non-increasing" : "increases")};
}

Outcome recovery_experiment_check() {
  const auto sigma = SymmetricMatrix<double>::diagonal(Eigen::Vector3d(1, 4, 9));
  const Eigen::Vector3d truth(1, 2, 3);
  const auto big = recovery_experiment(sigma, {20000}, 50, 8);
  const Eigen::Vector3d est = big.front().estimated_class.sqrt_eigenvalues();
  const double mean_rel = ((est - truth).cwiseAbs().cwiseQuotient(truth)).mean();
  const auto sweep = recovery_experiment(sigma, {100, 1000, 10000}, 50, 8);
  bool decreasing = true;
  std::string errors;
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    errors += (k ? ", " : "") + fmt("%.4g", sweep[k].mean_replicate_error());
    if (k) decreasing = decreasing && sweep[k].mean_replicate_error() < sweep[k - 1].mean_replicate_error();
  }
  return {mean_rel < 0.02 && decreasing, "mean relative error at n=20000 = " + fmt("%.3g", mean_rel) +
                                             ", mean class_error over n=100,1000,10000: " + errors};
}

Outcome frechet_optimality() {
  std::mt19937_64 rng(109);
  const auto sigma = SymmetricMatrix<double>::diagonal(Eigen::Vector3d(1, 4, 9));
  int wins = 0, total = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto report = recovery_experiment(sigma, {200}, 30, rng()).front();
    const auto& spectra = report.per_replicate_sqrt_spectra;
    const double at_estimate = frechet_functional(spectra, report.estimated_class);
    std::normal_distribution<double> noise(0.0, 0.2);
    for (int k = 0; k < 20; ++k, ++total) {
      Eigen::Vector3d cand = report.estimated_class.sqrt_eigenvalues();
      for (int i = 0; i < 3; ++i) cand(i) = std::max(0.0, cand(i) + noise(rng));
      std::sort(cand.data(), cand.data() + 3);
      wins += at_estimate < frechet_functional(spectra, GaussianClass<double>(cand));
    }
  }
  return {wins == total, std::to_string(wins) + "/" + std::to_string(total) + " candidates beaten over 10 trials"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  const fs::path dir = fs::path(PROCWASS_TEST_SCRATCH) / "acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  int counter = 0;
  const auto run = [&](const std::string& args, const std::string& env, std::string& out) {
    const fs::path file = dir / ("out" + std::to_string(counter++));
    const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" PROCWASS_CLI "' " + args + " > '" +
                            file.string() + "' 2>/dev/null";
    const int status = std::system(cmd.c_str());
    out = slurp(file);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const std::string data = PROCWASS_TEST_DATA;
  std::string ignored;
  run("simulate --cov-diag 1,4,9 --n 40 --seed 1 --out x.csv", "", ignored);
  run("simulate --cov-diag 2,3,5 --n 40 --seed 2 --out y.csv", "", ignored);
  const std::vector<std::string> commands{
      "gaussian-dist '" + data + "/diag_1_4.json' '" + data + "/diag_9_16.json'",
      "empirical-dist x.csv y.csv --seed 7",
      "empirical-dist x.csv y.csv --ot sinkhorn --seed 7",
      "recover --cov-diag 1,4,9 --n-grid 50,500 --replicates 8 --seed 7",
      "recover --data x.csv --bootstrap 10 --seed 7",
      "simulate --cov-diag 1,4 --n 20 --seed 7 --out s.csv",
      "selftest --seed 7",
  };
  int identical = 0;
  for (const auto& c : commands) {
    std::string a, b, threaded;
    const int code = run(c, "", a);
    run(c, "", b);
    run(c, "PROCWASS_THREADS=4", threaded);
    identical += code == 0 && !a.empty() && a == b && a == threaded;
  }
  return {identical == int(commands.size()),
          std::to_string(identical) + "/" + std::to_string(commands.size()) + " commands byte-identical"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // <= 0: no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "gaussian closed form vs brute force", 30, closed_form_vs_brute_force},
      {2, "certificate identity", 0, certificate_identity},
      {3, "orthogonal invariance and pseudo-metric", 0, invariance_and_pseudometric},
      {4, "quotient length inequality", 0, length_inequality},
      {5, "exact OT vs permutation enumeration", 10, exact_ot_enumeration},
      {6, "sinkhorn fidelity", 0, sinkhorn_fidelity},
      {7, "empirical to closed form convergence", 60, empirical_convergence},
      {8, "recovery experiment", 120, recovery_experiment_check},
      {9, "frechet mean optimality", 0, frechet_optimality},
      {10, "CLI determinism", 0, cli_determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_seconds <= 0 || seconds < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("[%s] %2d %s: %s; %.2f s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), seconds,
                c.budget_seconds > 0 ? (" (budget " + fmt("%.0f", c.budget_seconds) + " s)").c_str() : "");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures ? 1 : 0;
}
