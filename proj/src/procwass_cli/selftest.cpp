#include <algorithm>
#include <numeric>
#include <random>

#include "procwass/procwass.hpp"
#include "procwass_cli/commands.hpp"

namespace procwass::cli {
namespace {

Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

GaussianDistribution<double> random_gaussian(std::mt19937_64& rng, Eigen::Index d) {
  const Eigen::MatrixXd a = gaussian_matrix(rng, d, d);
  return GaussianDistribution<double>(gaussian_matrix(rng, d, 1).col(0), SymmetricMatrix<double>(a * a.transpose()));
}

struct Check {
  std::string name;
  bool passed;
  double worst;
  double tolerance;
};

}  // namespace

CommandOutcome cmd_selftest(const SelftestOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::vector<Check> checks;

  {
    double worst = 0;
    for (int t = 0; t < 50; ++t) {
      const Eigen::Index d = 2 + t % 3;
      const auto g = random_gaussian(rng, d);
      const auto h = random_gaussian(rng, d);
      const auto o = random_orthogonal<double>(d, rng(), false);
      worst = std::max(worst, std::abs(pw_gaussian(pushforward(o, g), h).distance - pw_gaussian(g, h).distance));
    }
    checks.push_back({"orthogonal_invariance", worst < 1e-8, worst, 1e-8});
  }
  {
    double worst = -1e300;
    for (int t = 0; t < 50; ++t) {
      const Eigen::Index d = 2 + t % 3;
      const auto g = random_gaussian(rng, d);
      const auto h = random_gaussian(rng, d);
      worst = std::max(worst, pw_gaussian(g, h).distance - bures_w2(centered(g), centered(h)));
    }
    checks.push_back({"length_inequality", worst <= 1e-8, worst, 1e-8});
  }
  {
    double worst = 0;
    for (int t = 0; t < 50; ++t) {
      const Eigen::Index d = 2 + t % 3;
      const auto g = random_gaussian(rng, d);
      const auto h = random_gaussian(rng, d);
      const auto pw = pw_gaussian(g, h);
      const double bound = pw.class0.sqrt_eigenvalues().dot(pw.class1.sqrt_eigenvalues());
      worst = std::max(worst, std::abs(gaussian_F(pw.theta_star, g.covariance(), h.covariance()) - bound));
    }
    checks.push_back({"certificate_identity", worst < 1e-8, worst, 1e-8});
  }
  {
    double worst = -1e300;
    for (int t = 0; t < 50; ++t) {
      const Eigen::Index d = 2 + t % 3;
      const auto a = canonical_class(random_gaussian(rng, d));
      const auto b = canonical_class(random_gaussian(rng, d));
      const auto c = canonical_class(random_gaussian(rng, d));
      worst = std::max(worst, class_distance(a, c) - class_distance(a, b) - class_distance(b, c));
    }
    checks.push_back({"triangle_inequality", worst <= 1e-8, worst, 1e-8});
  }
  {
    double worst = 0;
    for (Eigen::Index n = 1; n <= 5; ++n) {
      const auto x = DiscreteMeasure<double>::uniform(gaussian_matrix(rng, n, 2));
      const auto y = DiscreteMeasure<double>::uniform(gaussian_matrix(rng, n, 2));
      const auto c = cost_matrix(x, y);
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      double best = 1e300;
      do {
        double s = 0;
        for (Eigen::Index i = 0; i < n; ++i) s += c(i, perm[i]) / double(n);
        best = std::min(best, s);
      } while (std::next_permutation(perm.begin(), perm.end()));
      worst = std::max(worst, std::abs(plan_cost(solve_exact(x, y, c), c) - best));
    }
    checks.push_back({"exact_ot_vs_permutations", worst < 1e-9, worst, 1e-9});
  }
  {
    const auto x = DiscreteMeasure<double>::uniform(gaussian_matrix(rng, 12, 3));
    const auto o = random_orthogonal<double>(3, rng(), false);
    const auto y = DiscreteMeasure<double>::uniform(x.points() * o.matrix().transpose());
    const double d = pw_empirical(x, y).distance;
    checks.push_back({"empirical_rotation_invariance", d < 1e-6, d, 1e-6});
  }

  CommandOutcome out;
  json params = json::object();
  out.report["schema"] = kSchema;
  out.report["command"] = "selftest";
  out.report["manifest"] = make_manifest("selftest", params, opts.seed, {});
  json list = json::array();
  bool all = true;
  for (const auto& c : checks) {
    list.push_back({{"name", c.name}, {"passed", c.passed}, {"worst", c.worst}, {"tolerance", c.tolerance}});
    all = all && c.passed;
  }
  out.report["checks"] = std::move(list);
  out.report["passed"] = all;
  out.exit_code = all ? kExitOk : kExitFailure;
  return out;
}

}  // namespace procwass::cli
