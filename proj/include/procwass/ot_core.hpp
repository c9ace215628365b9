#pragma once

// Discrete optimal transport with squared Euclidean ground cost: cost
// matrices, an exact solver (assignment for uniform equal-size measures,
// network simplex otherwise) and a log-domain Sinkhorn solver.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "procwass/detail/assignment.hpp"
#include "procwass/detail/network_simplex.hpp"
#include "procwass/error.hpp"
#include "procwass/linalg.hpp"

namespace procwass {

template <typename Scalar = double>
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  /// `points` holds one support point per row. Weights are renormalized.
  DiscreteMeasure(Mat<Scalar> points, Vec<Scalar> weights)
      : points_(std::move(points)), weights_(std::move(weights)) {
    if (points_.rows() < 1) throw Error(Errc::InvalidArgument, "DiscreteMeasure needs n >= 1");
    require_same_dim(points_.rows(), weights_.size(), "DiscreteMeasure points/weights");
    require_finite(points_, "DiscreteMeasure points");
    require_finite(weights_, "DiscreteMeasure weights");
    if (weights_.minCoeff() < Scalar(0)) throw Error(Errc::InfeasibleWeights, "negative weight");
    const Scalar total = weights_.sum();
    if (!(total > Scalar(0))) throw Error(Errc::InfeasibleWeights, "weights sum to zero");
    weights_ /= total;
  }

  static DiscreteMeasure uniform(Mat<Scalar> points) {
    const Eigen::Index n = points.rows();
    return DiscreteMeasure(std::move(points), Vec<Scalar>::Constant(n, Scalar(1)));
  }

  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }
  const Mat<Scalar>& points() const { return points_; }
  const Vec<Scalar>& weights() const { return weights_; }

  bool is_uniform() const {
    const Scalar w = Scalar(1) / Scalar(size());
    return ((weights_.array() - w).abs() <= Scalar(1e-12) * w).all();
  }

 private:
  Mat<Scalar> points_;
  Vec<Scalar> weights_;
};

template <typename Scalar = double>
struct CostMatrix {
  detail::RowMat<Scalar> values;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return values(i, j); }
};

/// Squared Euclidean distances between the rows of two point matrices.
template <typename DerivedX, typename DerivedY>
CostMatrix<typename DerivedX::Scalar> squared_euclidean_cost(const Eigen::MatrixBase<DerivedX>& x,
                                                             const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  require_same_dim(x.cols(), y.cols(), "cost_matrix ambient dimension");
  CostMatrix<Scalar> c;
  c.values.resize(x.rows(), y.rows());
  const Eigen::Index d = x.cols();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Scalar* out = c.values.data() + i * y.rows();
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      Scalar s = 0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const Scalar diff = x(i, k) - y(j, k);
        s += diff * diff;
      }
      out[j] = s;
    }
  }
  return c;
}

template <typename Scalar>
CostMatrix<Scalar> cost_matrix(const DiscreteMeasure<Scalar>& x, const DiscreteMeasure<Scalar>& y) {
  return squared_euclidean_cost(x.points(), y.points());
}

enum class SolverKind { Exact, Sinkhorn };

template <typename Scalar = double>
struct DualPotentials {
  Vec<Scalar> source;  // phi, one per source point
  Vec<Scalar> target;  // psi, one per target point
};

template <typename Scalar = double>
struct TransportPlan {
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> coupling;
  std::optional<DualPotentials<Scalar>> dual_potentials;
  SolverKind solver = SolverKind::Exact;
  Scalar epsilon = 0;  // Sinkhorn regularization, 0 for exact plans
  bool converged = true;
  Scalar marginal_violation = 0;  // L1, before rounding for Sinkhorn
  long iterations = 0;
  std::vector<Scalar> cost_trace;  // Sinkhorn: <P, C> of each rounded iterate
  /// Set by the assignment path: target index matched to each source.
  std::vector<Eigen::Index> assignment;

  Eigen::Index rows() const { return coupling.rows(); }
  Eigen::Index cols() const { return coupling.cols(); }
  Mat<Scalar> dense() const { return Mat<Scalar>(coupling); }
};

template <typename Scalar>
Scalar plan_cost(const TransportPlan<Scalar>& plan, const CostMatrix<Scalar>& c) {
  require_same_dim(plan.rows(), c.rows(), "plan_cost rows");
  require_same_dim(plan.cols(), c.cols(), "plan_cost cols");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < plan.coupling.outerSize(); ++i) {
    for (typename Eigen::SparseMatrix<Scalar, Eigen::RowMajor>::InnerIterator it(plan.coupling, i); it; ++it) {
      total += it.value() * c(i, it.col());
    }
  }
  return total;
}

/// Largest absolute deviation of the plan's row / column sums from the weights.
template <typename Scalar>
Scalar max_marginal_error(const TransportPlan<Scalar>& plan, const DiscreteMeasure<Scalar>& mu,
                          const DiscreteMeasure<Scalar>& nu) {
  const Mat<Scalar> p = plan.dense();
  const Scalar rows = (p.rowwise().sum() - mu.weights()).cwiseAbs().maxCoeff();
  const Scalar cols = (p.colwise().sum().transpose() - nu.weights()).cwiseAbs().maxCoeff();
  return std::max(rows, cols);
}

template <typename Scalar = double>
struct OptimalityCertificate {
  Scalar primal = 0;
  Scalar dual = 0;
  Scalar relative_gap = 0;            // (primal - dual) / (1 + |primal|)
  Scalar min_reduced_cost = 0;        // min_ij C_ij - phi_i - psi_j, >= -tol when dual feasible
  Scalar max_support_reduced = 0;     // max |reduced cost| on the plan's support
};

/// Complementary-slackness check of a plan against its dual potentials.
template <typename Scalar>
OptimalityCertificate<Scalar> certify(const TransportPlan<Scalar>& plan,
                                      const DiscreteMeasure<Scalar>& mu,
                                      const DiscreteMeasure<Scalar>& nu, const CostMatrix<Scalar>& c) {
  if (!plan.dual_potentials) throw Error(Errc::InvalidArgument, "certify: plan has no dual potentials");
  const auto& duals = *plan.dual_potentials;
  OptimalityCertificate<Scalar> cert;
  cert.primal = plan_cost(plan, c);
  cert.dual = mu.weights().dot(duals.source) + nu.weights().dot(duals.target);
  cert.relative_gap = (cert.primal - cert.dual) / (Scalar(1) + std::abs(cert.primal));
  Scalar min_red = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j)
      min_red = std::min(min_red, c(i, j) - duals.source(i) - duals.target(j));
  cert.min_reduced_cost = min_red;
  Scalar support = 0;
  for (Eigen::Index i = 0; i < plan.coupling.outerSize(); ++i) {
    for (typename Eigen::SparseMatrix<Scalar, Eigen::RowMajor>::InnerIterator it(plan.coupling, i); it; ++it) {
      if (it.value() > Scalar(0)) {
        support = std::max(support, std::abs(c(i, it.col()) - duals.source(i) - duals.target(it.col())));
      }
    }
  }
  cert.max_support_reduced = support;
  return cert;
}

namespace detail {

template <typename Scalar>
void require_plan_shapes(const DiscreteMeasure<Scalar>& mu, const DiscreteMeasure<Scalar>& nu,
                         const CostMatrix<Scalar>& c, const char* where) {
  require_same_dim(c.rows(), mu.size(), where);
  require_same_dim(c.cols(), nu.size(), where);
  require_finite(c.values, where);
}

}  // namespace detail

/// Exact Kantorovich solver. Uniform measures of equal size are solved as an
/// assignment problem (optionally warm-started from `warm`, a previous
/// assignment plan of the same shape); everything else goes to the network
/// simplex. Dual potentials are always populated.
template <typename Scalar>
TransportPlan<Scalar> solve_exact(const DiscreteMeasure<Scalar>& mu, const DiscreteMeasure<Scalar>& nu,
                                  const CostMatrix<Scalar>& c, const TransportPlan<Scalar>* warm = nullptr) {
  detail::require_plan_shapes(mu, nu, c, "solve_exact");
  const Eigen::Index n = mu.size();
  const Eigen::Index m = nu.size();
  TransportPlan<Scalar> plan;
  plan.solver = SolverKind::Exact;
  std::vector<Eigen::Triplet<Scalar>> triplets;

  if (n == m && mu.is_uniform() && nu.is_uniform()) {
    const bool usable_warm = warm && static_cast<Eigen::Index>(warm->assignment.size()) == n &&
                             warm->dual_potentials && warm->dual_potentials->target.size() == m;
    const auto sol = usable_warm
                         ? detail::solve_assignment<Scalar>(c.values, &warm->dual_potentials->target)
                         : detail::solve_assignment<Scalar>(c.values);
    const Scalar w = Scalar(1) / Scalar(n);
    triplets.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) triplets.emplace_back(i, sol.row_to_col[i], w);
    plan.assignment = sol.row_to_col;
    plan.dual_potentials = DualPotentials<Scalar>{sol.row_potential, sol.col_potential};
  } else {
    const auto sol = detail::solve_transport<Scalar>(mu.weights(), nu.weights(), c.values);
    for (const auto& cell : sol.basis) {
      if (cell.flow > Scalar(0)) triplets.emplace_back(cell.row, cell.col, cell.flow);
    }
    plan.iterations = sol.pivots;
    plan.dual_potentials = DualPotentials<Scalar>{sol.row_potential, sol.col_potential};
  }
  plan.coupling.resize(n, m);
  plan.coupling.setFromTriplets(triplets.begin(), triplets.end());
  return plan;
}

template <typename Scalar = double>
struct SinkhornOptions {
  Scalar epsilon = 0;  // <= 0 selects 0.05 * mean(C)
  long max_iter = 10000;
  Scalar tol = Scalar(1e-9);
  /// Throw NotConverged instead of returning a flagged best-effort plan.
  bool strict = true;
};

template <typename Scalar>
Scalar default_epsilon(const CostMatrix<Scalar>& c) {
  return Scalar(0.05) * c.values.mean();
}

namespace detail {

template <typename Scalar>
Scalar log_sum_exp(const Scalar* terms, Eigen::Index count, Eigen::Index stride) {
  Scalar peak = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index k = 0; k < count; ++k) peak = std::max(peak, terms[k * stride]);
  if (!std::isfinite(peak)) return peak;
  Scalar sum = 0;
  for (Eigen::Index k = 0; k < count; ++k) sum += std::exp(terms[k * stride] - peak);
  return peak + std::log(sum);
}

// Altschuler-Weed-Rigollet rounding onto the transportation polytope.
template <typename Scalar>
void round_to_marginals(Mat<Scalar>& p, const Vec<Scalar>& a, const Vec<Scalar>& b) {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const Scalar r = p.row(i).sum();
    if (r > a(i)) p.row(i) *= a(i) / r;
  }
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    const Scalar s = p.col(j).sum();
    if (s > b(j)) p.col(j) *= b(j) / s;
  }
  const Vec<Scalar> err_r = (a - p.rowwise().sum()).cwiseMax(Scalar(0));
  const Vec<Scalar> err_c = (b - p.colwise().sum().transpose()).cwiseMax(Scalar(0));
  const Scalar mass = err_r.template lpNorm<1>();
  if (mass > Scalar(0)) p.noalias() += err_r * err_c.transpose() / mass;
}

}  // namespace detail

/// Entropic OT by log-domain Sinkhorn iterations, followed by rounding to the
/// exact marginals.
template <typename Scalar>
TransportPlan<Scalar> solve_sinkhorn(const DiscreteMeasure<Scalar>& mu, const DiscreteMeasure<Scalar>& nu,
                                     const CostMatrix<Scalar>& c, SinkhornOptions<Scalar> opts = {},
                                     const TransportPlan<Scalar>* warm = nullptr) {
  detail::require_plan_shapes(mu, nu, c, "solve_sinkhorn");
  if (opts.max_iter < 1) throw Error(Errc::InvalidArgument, "solve_sinkhorn: max_iter must be >= 1");
  if (opts.epsilon <= Scalar(0)) opts.epsilon = default_epsilon(c);
  if (!(opts.epsilon > Scalar(0))) {
    // All costs zero: every feasible plan is optimal.
    opts.epsilon = Scalar(1);
  }
  const Eigen::Index n = mu.size();
  const Eigen::Index m = nu.size();
  const Scalar eps = opts.epsilon;
  const Vec<Scalar> log_a = mu.weights().array().log().matrix();
  const Vec<Scalar> log_b = nu.weights().array().log().matrix();

  Vec<Scalar> f = Vec<Scalar>::Zero(n);
  Vec<Scalar> g = Vec<Scalar>::Zero(m);
  if (warm && warm->solver == SolverKind::Sinkhorn && warm->epsilon == opts.epsilon && warm->dual_potentials &&
      warm->dual_potentials->target.size() == m) {
    g = warm->dual_potentials->target;
  }
  Mat<Scalar> scratch(n, m);  // column-major: column j holds terms over i
  detail::RowMat<Scalar> row_terms(n, m);

  TransportPlan<Scalar> plan;
  plan.solver = SolverKind::Sinkhorn;
  plan.epsilon = eps;
  plan.converged = false;
  Scalar violation = std::numeric_limits<Scalar>::infinity();
  long it = 0;
  Mat<Scalar> p(n, m);
  Mat<Scalar> feasible(n, m);

  while (it < opts.max_iter) {
    ++it;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) row_terms(i, j) = (g(j) - c(i, j)) / eps + log_b(j);
    for (Eigen::Index i = 0; i < n; ++i) f(i) = -eps * detail::log_sum_exp(row_terms.data() + i * m, m, 1);

    // Column update; the shifted exponentials give the plan directly:
    // p_ij = b_j exp(t_ij - peak_j) / sum_i exp(t_ij - peak_j).
    for (Eigen::Index j = 0; j < m; ++j) {
      Scalar peak = -std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index i = 0; i < n; ++i) {
        scratch(i, j) = (f(i) - c(i, j)) / eps + log_a(i);
        peak = std::max(peak, scratch(i, j));
      }
      Scalar sum = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        p(i, j) = std::exp(scratch(i, j) - peak);
        sum += p(i, j);
      }
      g(j) = -eps * (peak + std::log(sum));
      p.col(j) *= nu.weights()(j) / sum;
    }

    if (!f.allFinite() || !g.allFinite()) {
      throw Error(Errc::NumericalOverflow, "solve_sinkhorn: non-finite potentials");
    }

    // Columns match exactly after the g-update; measure the row violation.
    violation = (p.rowwise().sum() - mu.weights()).template lpNorm<1>();
    feasible = p;
    detail::round_to_marginals(feasible, mu.weights(), nu.weights());
    plan.cost_trace.push_back(feasible.cwiseProduct(c.values).sum());
    if (violation < opts.tol) {
      plan.converged = true;
      break;
    }
  }

  plan.iterations = it;
  plan.marginal_violation = violation;
  if (!plan.converged && opts.strict) {
    throw Error(Errc::NotConverged,
                "solve_sinkhorn: marginal violation " + std::to_string(double(violation)) + " after " +
                    std::to_string(it) + " iterations");
  }
  plan.coupling = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>(feasible.sparseView(Scalar(1), Scalar(0)));
  plan.dual_potentials = DualPotentials<Scalar>{f, g};
  return plan;
}

}  // namespace procwass
