#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "procwass/ot_core.hpp"
#include "test_support.hpp"

using namespace procwass;
using procwass::testing::gaussian_matrix;

namespace {

using Measure = DiscreteMeasure<double>;

// Minimum over all permutation matchings of (1/n) sum C(i, pi(i)).
double permutation_minimum(const CostMatrix<double>& c) {
  std::vector<int> perm(static_cast<std::size_t>(c.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (Eigen::Index i = 0; i < c.rows(); ++i) s += c(i, perm[std::size_t(i)]);
    best = std::min(best, s / double(c.rows()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Integer multiplicities k_i / K expanded into K unit atoms, then enumerated.
double expanded_minimum(const CostMatrix<double>& c, const std::vector<int>& ka, const std::vector<int>& kb) {
  std::vector<Eigen::Index> rows, cols;
  for (std::size_t i = 0; i < ka.size(); ++i) rows.insert(rows.end(), std::size_t(ka[i]), Eigen::Index(i));
  for (std::size_t j = 0; j < kb.size(); ++j) cols.insert(cols.end(), std::size_t(kb[j]), Eigen::Index(j));
  CostMatrix<double> expanded;
  expanded.values.resize(Eigen::Index(rows.size()), Eigen::Index(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) expanded.values(Eigen::Index(i), Eigen::Index(j)) = c(rows[i], cols[j]);
  return permutation_minimum(expanded);
}

std::vector<int> random_composition(std::mt19937_64& rng, int parts, int total) {
  // Each part >= 0; total distributed uniformly at random.
  std::vector<int> k(std::size_t(parts), 0);
  std::uniform_int_distribution<int> pick(0, parts - 1);
  for (int t = 0; t < total; ++t) ++k[std::size_t(pick(rng))];
  return k;
}

Eigen::VectorXd as_weights(const std::vector<int>& k) {
  Eigen::VectorXd w(Eigen::Index(k.size()));
  for (std::size_t i = 0; i < k.size(); ++i) w(Eigen::Index(i)) = k[i];
  return w;
}

void check_feasible(const TransportPlan<double>& plan, const Measure& mu, const Measure& nu, double tol) {
  CHECK(max_marginal_error(plan, mu, nu) < tol);
  CHECK(plan.dense().minCoeff() >= 0.0);
}

}  // namespace

TEST_CASE("DiscreteMeasure") {
  const Measure m(Eigen::MatrixXd::Zero(3, 2), Eigen::Vector3d(1, 1, 2));
  CHECK(m.weights().sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.weights()(2) == doctest::Approx(0.5));
  CHECK_FALSE(m.is_uniform());
  CHECK(Measure::uniform(Eigen::MatrixXd::Zero(4, 1)).is_uniform());
  CHECK_THROWS_AS(Measure(Eigen::MatrixXd::Zero(2, 1), Eigen::Vector2d(1, -1)), Error);
  CHECK_THROWS_AS(Measure(Eigen::MatrixXd::Zero(2, 1), Eigen::Vector2d(0, 0)), Error);
  CHECK_THROWS_AS(Measure(Eigen::MatrixXd::Zero(2, 1), Eigen::Vector3d(1, 1, 1)), Error);
  CHECK_THROWS_AS(Measure(Eigen::MatrixXd::Zero(0, 1), Eigen::VectorXd(0)), Error);
}

TEST_CASE("cost_matrix") {
  std::mt19937_64 rng(1);
  const auto x = Measure::uniform(gaussian_matrix(rng, 5, 3));
  const auto y = Measure::uniform(gaussian_matrix(rng, 4, 3));
  const auto cxx = cost_matrix(x, x);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(cxx(i, i) == 0.0);
  const auto cxy = cost_matrix(x, y);
  const auto cyx = cost_matrix(y, x);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      CHECK(cxy(i, j) == cyx(j, i));
      CHECK(cxy(i, j) == doctest::Approx((x.points().row(i) - y.points().row(j)).squaredNorm()).epsilon(1e-14));
      CHECK(cxy(i, j) >= 0.0);
    }
  CHECK(cost_matrix(Measure::uniform(Eigen::MatrixXd::Constant(1, 1, 0.0)),
                    Measure::uniform(Eigen::MatrixXd::Constant(1, 1, 3.0)))(0, 0) == 9.0);
  Eigen::MatrixXd a(1, 2), b(1, 2);
  a << 0, 0;
  b << 3, 4;
  CHECK(cost_matrix(Measure::uniform(a), Measure::uniform(b))(0, 0) == 25.0);
  CHECK_THROWS_AS(cost_matrix(x, Measure::uniform(gaussian_matrix(rng, 4, 2))), Error);
}

TEST_CASE("solve_exact small closed-form cases") {
  SUBCASE("single point") {
    Eigen::MatrixXd a(1, 1), b(1, 1);
    a << 0;
    b << 3;
    const auto mu = Measure::uniform(a), nu = Measure::uniform(b);
    const auto c = cost_matrix(mu, nu);
    const auto plan = solve_exact(mu, nu, c);
    CHECK(plan.dense()(0, 0) == 1.0);
    CHECK(plan_cost(plan, c) == 9.0);
  }
  SUBCASE("1-D monotone rearrangement") {
    Eigen::MatrixXd a(2, 1);
    a << 0, 1;
    const auto mu = Measure::uniform(a);
    const auto c = cost_matrix(mu, mu);
    const auto plan = solve_exact(mu, mu, c);
    CHECK(plan_cost(plan, c) == 0.0);
    CHECK(plan.dense().isApprox(Eigen::MatrixXd(0.5 * Eigen::MatrixXd::Identity(2, 2))));
  }
  SUBCASE("random 1-D 3x3 gives the sorted matching") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
      const auto mu = Measure::uniform(gaussian_matrix(rng, 3, 1));
      const auto nu = Measure::uniform(gaussian_matrix(rng, 3, 1));
      const auto c = cost_matrix(mu, nu);
      const auto plan = solve_exact(mu, nu, c);
      CHECK(plan_cost(plan, c) == doctest::Approx(permutation_minimum(c)).epsilon(1e-12));
      std::vector<Eigen::Index> ri(3), ci(3);
      std::iota(ri.begin(), ri.end(), 0);
      std::iota(ci.begin(), ci.end(), 0);
      std::sort(ri.begin(), ri.end(), [&](auto p, auto q) { return mu.points()(p, 0) < mu.points()(q, 0); });
      std::sort(ci.begin(), ci.end(), [&](auto p, auto q) { return nu.points()(p, 0) < nu.points()(q, 0); });
      for (int k = 0; k < 3; ++k) CHECK(plan.dense()(ri[std::size_t(k)], ci[std::size_t(k)]) == doctest::Approx(1.0 / 3));
    }
  }
  SUBCASE("zero cost") {
    const auto mu = Measure::uniform(Eigen::MatrixXd::Zero(4, 2));
    const auto c = cost_matrix(mu, mu);
    CHECK(plan_cost(solve_exact(mu, mu, c), c) == 0.0);
  }
  SUBCASE("shape mismatch") {
    const auto mu = Measure::uniform(Eigen::MatrixXd::Zero(3, 1));
    const auto c = cost_matrix(mu, mu);
    CHECK_THROWS_AS(solve_exact(Measure::uniform(Eigen::MatrixXd::Zero(2, 1)), mu, c), Error);
  }
}

TEST_CASE("solve_exact matches permutation enumeration for n <= 6") {
  std::mt19937_64 rng(3);
  for (Eigen::Index n = 1; n <= 6; ++n) {
    for (int t = 0; t < 30; ++t) {
      const Eigen::Index d = 1 + t % 3;
      const auto mu = Measure::uniform(gaussian_matrix(rng, n, d));
      const auto nu = Measure::uniform(gaussian_matrix(rng, n, d));
      const auto c = cost_matrix(mu, nu);
      const auto plan = solve_exact(mu, nu, c);
      CHECK(std::abs(plan_cost(plan, c) - permutation_minimum(c)) < 1e-9);
      check_feasible(plan, mu, nu, 1e-12);
      const auto cert = certify(plan, mu, nu, c);
      CHECK(cert.relative_gap < 1e-7);
      CHECK(cert.relative_gap > -1e-7);
      CHECK(cert.min_reduced_cost > -1e-7);
      CHECK(cert.max_support_reduced < 1e-7);
    }
  }
}

TEST_CASE("network simplex on non-uniform weights against expanded enumeration") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 60; ++t) {
    const int n = 1 + t % 4;
    const int m = 1 + (t / 4) % 4;
    auto ka = random_composition(rng, n, 6);
    auto kb = random_composition(rng, m, 6);
    const auto mu = Measure(gaussian_matrix(rng, n, 2), as_weights(ka));
    const auto nu = Measure(gaussian_matrix(rng, m, 2), as_weights(kb));
    const auto c = cost_matrix(mu, nu);
    const auto plan = solve_exact(mu, nu, c);
    CHECK(std::abs(plan_cost(plan, c) - expanded_minimum(c, ka, kb)) < 1e-9);
    check_feasible(plan, mu, nu, 1e-12);
    const auto cert = certify(plan, mu, nu, c);
    CHECK(std::abs(cert.relative_gap) < 1e-7);
    CHECK(cert.min_reduced_cost > -1e-7);
    CHECK(cert.max_support_reduced < 1e-7);
  }
}

TEST_CASE("transport simplex agrees with the assignment solver") {
  std::mt19937_64 rng(5);
  for (Eigen::Index n : {7, 20, 60, 150}) {
    const auto mu = Measure::uniform(gaussian_matrix(rng, n, 3));
    const auto nu = Measure::uniform(gaussian_matrix(rng, n, 3));
    const auto c = cost_matrix(mu, nu);
    const auto assignment = solve_exact(mu, nu, c);
    const auto simplex = detail::solve_transport<double>(mu.weights(), nu.weights(), c.values);
    double simplex_cost = 0;
    for (const auto& cell : simplex.basis) simplex_cost += cell.flow * c(cell.row, cell.col);
    CHECK(simplex_cost == doctest::Approx(plan_cost(assignment, c)).epsilon(1e-10));
  }
}

TEST_CASE("assignment solver across the auction threshold") {
  std::mt19937_64 rng(6);
  for (Eigen::Index n : {detail::kAuctionThreshold - 1, detail::kAuctionThreshold + 1, Eigen::Index(700)}) {
    const auto mu = Measure::uniform(gaussian_matrix(rng, n, 2));
    const auto nu = Measure::uniform(gaussian_matrix(rng, n, 2));
    const auto c = cost_matrix(mu, nu);
    const auto plan = solve_exact(mu, nu, c);
    check_feasible(plan, mu, nu, 1e-12);
    const auto cert = certify(plan, mu, nu, c);
    CHECK(std::abs(cert.relative_gap) < 1e-7);
    CHECK(cert.min_reduced_cost > -1e-7);
    CHECK(cert.max_support_reduced < 1e-7);

    // Warm start from the previous plan after perturbing the cost.
    const auto nu2 = Measure::uniform(nu.points() + 0.05 * gaussian_matrix(rng, n, 2));
    const auto c2 = cost_matrix(mu, nu2);
    const auto warm = solve_exact(mu, nu2, c2, &plan);
    const auto cold = solve_exact(mu, nu2, c2);
    CHECK(plan_cost(warm, c2) == doctest::Approx(plan_cost(cold, c2)).epsilon(1e-10));
    const auto wcert = certify(warm, mu, nu2, c2);
    CHECK(std::abs(wcert.relative_gap) < 1e-7);
    CHECK(wcert.min_reduced_cost > -1e-7);
  }
}

TEST_CASE("large assignments: poor warm starts and heavy ties") {
  std::mt19937_64 rng(9);
  const Eigen::Index n = 400;
  const auto mu = Measure::uniform(gaussian_matrix(rng, n, 2));
  const auto nu = Measure::uniform(gaussian_matrix(rng, n, 2));
  const auto c = cost_matrix(mu, nu);
  const double cold = plan_cost(solve_exact(mu, nu, c), c);

  SUBCASE("warm start from an unrelated problem") {
    const auto far = Measure::uniform(30.0 * gaussian_matrix(rng, n, 2));
    const auto other = solve_exact(far, nu, cost_matrix(far, nu));
    const auto warm = solve_exact(mu, nu, c, &other);
    CHECK(plan_cost(warm, c) == doctest::Approx(cold).epsilon(1e-12));
    CHECK(std::abs(certify(warm, mu, nu, c).relative_gap) < 1e-7);
  }
  SUBCASE("integer grid with duplicated points matches the network simplex") {
    std::uniform_int_distribution<int> coord(0, 4);
    Eigen::MatrixXd a(n, 2), b(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      a.row(i) << coord(rng), coord(rng);
      b.row(i) << coord(rng), coord(rng);
    }
    const auto ga = Measure::uniform(a), gb = Measure::uniform(b);
    const auto cg = cost_matrix(ga, gb);
    const auto plan = solve_exact(ga, gb, cg);
    const auto simplex = detail::solve_transport<double>(ga.weights(), gb.weights(), cg.values);
    double simplex_cost = 0;
    for (const auto& cell : simplex.basis) simplex_cost += cell.flow * cg(cell.row, cell.col);
    CHECK(plan_cost(plan, cg) == doctest::Approx(simplex_cost).epsilon(1e-12));
    check_feasible(plan, ga, gb, 1e-12);
  }
}

TEST_CASE("solve_exact with ties and duplicated points") {
  Eigen::MatrixXd a(4, 1), b(4, 1);
  a << 0, 0, 1, 1;
  b << 0, 1, 0, 1;
  const auto mu = Measure::uniform(a), nu = Measure::uniform(b);
  const auto c = cost_matrix(mu, nu);
  const auto p1 = solve_exact(mu, nu, c);
  const auto p2 = solve_exact(mu, nu, c);
  CHECK(plan_cost(p1, c) == 0.0);
  CHECK(p1.assignment == p2.assignment);
}

TEST_CASE("solve_sinkhorn") {
  SUBCASE("single point") {
    Eigen::MatrixXd a(1, 2), b(1, 2);
    a << 0, 0;
    b << 1, 2;
    const auto mu = Measure::uniform(a), nu = Measure::uniform(b);
    const auto c = cost_matrix(mu, nu);
    for (double eps : {10.0, 0.01}) {
      SinkhornOptions<double> opts;
      opts.epsilon = eps;
      const auto plan = solve_sinkhorn(mu, nu, c, opts);
      CHECK(plan.dense()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  // Uniform samples on the unit square, the target displaced by one unit.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit;
  Eigen::MatrixXd xs(50, 2), ys(50, 2);
  for (Eigen::Index i = 0; i < 50; ++i) {
    xs.row(i) << unit(rng), unit(rng);
    ys.row(i) << unit(rng) + 1.0, unit(rng);
  }
  const auto mu = Measure::uniform(xs);
  const auto nu = Measure::uniform(ys);
  const auto c = cost_matrix(mu, nu);
  const double exact = plan_cost(solve_exact(mu, nu, c), c);
  const double mean_c = c.values.mean();

  SUBCASE("default epsilon") { CHECK(default_epsilon(c) == doctest::Approx(0.05 * mean_c)); }

  SUBCASE("cost decreases toward the exact value as epsilon shrinks") {
    double previous = std::numeric_limits<double>::infinity();
    for (double eps : {1.0, 0.1, 0.01}) {
      SinkhornOptions<double> opts;
      opts.epsilon = eps;
      opts.max_iter = 100000;
      opts.strict = false;
      const auto plan = solve_sinkhorn(mu, nu, c, opts);
      const double cost = plan_cost(plan, c);
      CHECK(cost < previous);
      CHECK(cost >= exact - 1e-9);
      check_feasible(plan, mu, nu, 1e-6);
      previous = cost;
    }
    SinkhornOptions<double> opts;
    opts.epsilon = 0.01 * mean_c;
    const auto plan = solve_sinkhorn(mu, nu, c, opts);
    CHECK(plan.converged);
    CHECK(std::abs(plan_cost(plan, c) - exact) <= 0.01 * exact);
    CHECK(plan.dual_potentials.has_value());
  }

  SUBCASE("identical measures stay within the entropic bound") {
    const auto cc = cost_matrix(mu, mu);
    SinkhornOptions<double> opts;
    opts.epsilon = 0.1;
    const auto plan = solve_sinkhorn(mu, mu, cc, opts);
    CHECK(plan_cost(plan, cc) <= 0.0 + 2 * 0.1 * std::log(50.0));
  }

  SUBCASE("cost trace is non-increasing after five iterations") {
    SinkhornOptions<double> opts;
    opts.epsilon = 0.05 * mean_c;
    const auto plan = solve_sinkhorn(mu, nu, c, opts);
    for (std::size_t k = 5; k < plan.cost_trace.size(); ++k) {
      CHECK(plan.cost_trace[k] <= plan.cost_trace[k - 1] + 1e-12);
    }
  }

  SUBCASE("non-uniform weights with a zero mass atom") {
    Eigen::VectorXd wa = Eigen::VectorXd::LinSpaced(50, 0.0, 2.0);
    const Measure mu_w(mu.points(), wa);
    const auto cw = cost_matrix(mu_w, nu);
    SinkhornOptions<double> opts;
    opts.epsilon = 0.05 * mean_c;
    const auto plan = solve_sinkhorn(mu_w, nu, cw, opts);
    check_feasible(plan, mu_w, nu, 1e-6);
    CHECK(plan.dense().row(0).sum() == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("strict mode reports non-convergence") {
    SinkhornOptions<double> opts;
    opts.epsilon = 0.001 * mean_c;
    opts.max_iter = 2;
    try {
      solve_sinkhorn(mu, nu, c, opts);
      FAIL("expected NotConverged");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NotConverged);
    }
    opts.strict = false;
    const auto plan = solve_sinkhorn(mu, nu, c, opts);
    CHECK_FALSE(plan.converged);
    CHECK(plan.marginal_violation > 0);
    check_feasible(plan, mu, nu, 1e-6);
  }
}

TEST_CASE("plan_cost") {
  const auto mu = Measure::uniform(Eigen::MatrixXd::Zero(2, 1));
  const auto c = cost_matrix(mu, mu);
  CHECK(plan_cost(solve_exact(mu, mu, c), c) == 0.0);
  CostMatrix<double> wrong;
  wrong.values = detail::RowMat<double>::Zero(3, 3);
  CHECK_THROWS_AS(plan_cost(solve_exact(mu, mu, c), wrong), Error);
}
