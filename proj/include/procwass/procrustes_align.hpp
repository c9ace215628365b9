#pragma once

// Empirical Procrustes-Wasserstein distance between point clouds:
//
//   d(X, Y)^2 = min over theta in O(d), plans P of  sum_ij P_ij |theta x_i - y_j|^2
//
// after both clouds are centered. Solved by block-coordinate descent that
// alternates an OT solve (theta fixed) with an orthogonal Procrustes step
// (plan fixed), from several starting rotations.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <thread>
#include <utility>
#include <vector>

#include "procwass/error.hpp"
#include "procwass/linalg.hpp"
#include "procwass/ot_core.hpp"
#include "procwass/random.hpp"

namespace procwass {

struct OtBackend {
  SolverKind kind = SolverKind::Exact;
  double epsilon = 0;  // Sinkhorn only; <= 0 selects 0.05 * mean(C)
  long sinkhorn_max_iter = 10000;
  double sinkhorn_tol = 1e-6;  // L1 row-marginal violation before rounding
};

struct AlignConfig {
  bool restrict_special = false;
  /// Identity, the two covariance eigenbasis alignments, and two starts for
  /// each of (num_restarts - 1) Haar draws: 2 * num_restarts + 1 in total.
  int num_restarts = 4;
  int max_outer_iter = 200;
  double rel_tol = 1e-9;
  OtBackend ot_backend{};
  std::uint64_t seed = 0;
  /// Restarts run on up to this many threads; results do not depend on it.
  int threads = 1;
  /// When non-empty, these starting rotations replace the default set.
  std::vector<Eigen::MatrixXd> initial_rotations;
};

template <typename Scalar = double>
struct PWResult {
  Scalar distance = 0;
  OrthogonalMatrix<Scalar> theta_star;
  TransportPlan<Scalar> plan;
  /// Optimal translation theta * mean(X) - mean(Y).
  Vec<Scalar> translation;
  /// Objective after each outer iteration of the winning start.
  std::vector<Scalar> trace;
  bool converged = false;
  int best_start = 0;
  /// Final objective of every start, in start order.
  std::vector<Scalar> start_objectives;
};

template <typename Scalar>
std::pair<DiscreteMeasure<Scalar>, Vec<Scalar>> center(const DiscreteMeasure<Scalar>& m) {
  const Vec<Scalar> mean = m.points().transpose() * m.weights();
  Mat<Scalar> shifted = m.points().rowwise() - mean.transpose();
  return {DiscreteMeasure<Scalar>(std::move(shifted), m.weights()), mean};
}

/// sum_ij P_ij |theta x_i - y_j|^2 over the plan's support.
template <typename Scalar>
Scalar alignment_objective(const Mat<Scalar>& x, const Mat<Scalar>& y, const TransportPlan<Scalar>& plan,
                           const Mat<Scalar>& theta) {
  Scalar total = 0;
  for (Eigen::Index i = 0; i < plan.coupling.outerSize(); ++i) {
    const Vec<Scalar> tx = theta * x.row(i).transpose();
    for (typename Eigen::SparseMatrix<Scalar, Eigen::RowMajor>::InnerIterator it(plan.coupling, i); it; ++it) {
      total += it.value() * (tx - y.row(it.col()).transpose()).squaredNorm();
    }
  }
  return total;
}

/// Orthogonal theta minimizing sum_ij P_ij |theta x_i - y_j|^2 at a fixed plan:
/// the polar factor of sum_ij P_ij x_i y_j^T.
template <typename Scalar>
OrthogonalMatrix<Scalar> procrustes_step(const DiscreteMeasure<Scalar>& x, const DiscreteMeasure<Scalar>& y,
                                         const TransportPlan<Scalar>& plan, bool restrict_special) {
  require_same_dim(x.dim(), y.dim(), "procrustes_step ambient dimension");
  require_same_dim(plan.rows(), x.size(), "procrustes_step plan rows");
  require_same_dim(plan.cols(), y.size(), "procrustes_step plan cols");
  const Eigen::Index d = x.dim();
  Mat<Scalar> cross = Mat<Scalar>::Zero(d, d);
  for (Eigen::Index i = 0; i < plan.coupling.outerSize(); ++i) {
    for (typename Eigen::SparseMatrix<Scalar, Eigen::RowMajor>::InnerIterator it(plan.coupling, i); it; ++it) {
      cross.noalias() += it.value() * x.points().row(i).transpose() * y.points().row(it.col());
    }
  }
  return polar_orthogonal_factor(cross, restrict_special);
}

namespace detail {

// Eigenbasis of the weighted second moment of a centered cloud, each axis
// oriented so the projected third moment is non-negative.
template <typename Scalar>
Mat<Scalar> oriented_eigenbasis(const DiscreteMeasure<Scalar>& m) {
  const Mat<Scalar>& p = m.points();
  const SymmetricMatrix<Scalar> cov(p.transpose() * m.weights().asDiagonal() * p);
  Mat<Scalar> basis = sym_eigen(cov).eigenvectors;
  for (Eigen::Index k = 0; k < basis.cols(); ++k) {
    const Vec<Scalar> proj = p * basis.col(k);
    const Scalar third = m.weights().dot(proj.array().cube().matrix());
    const Scalar spread = std::pow(std::max(m.weights().dot(proj.cwiseAbs2()), Scalar(0)), Scalar(1.5));
    if (third < -Scalar(1e-12) * spread) basis.col(k) *= Scalar(-1);
  }
  return basis;
}

// Identity, the two eigenbasis alignments, then Haar draws H expressed in the
// eigenbasis frames as py H px^T and py H^T px^T. The whole set maps to itself
// under swapping X and Y (theta -> theta^T). Under X -> O X every start except
// the identity and px^T py maps to theta O^T.
template <typename Scalar>
std::vector<OrthogonalMatrix<Scalar>> starting_rotations(const DiscreteMeasure<Scalar>& x,
                                                         const DiscreteMeasure<Scalar>& y,
                                                         const AlignConfig& cfg) {
  const Eigen::Index d = x.dim();
  std::vector<OrthogonalMatrix<Scalar>> starts;
  if (!cfg.initial_rotations.empty()) {
    for (const auto& r : cfg.initial_rotations) {
      require_same_dim(r.rows(), d, "initial rotation");
      OrthogonalMatrix<Scalar> start(r.cast<Scalar>(), 1e-9);
      if (cfg.restrict_special && !start.special()) {
        throw Error(Errc::InvalidArgument, "initial rotation is not in SO(d)");
      }
      starts.push_back(std::move(start));
    }
    return starts;
  }
  starts.push_back(OrthogonalMatrix<Scalar>::identity(d));

  Mat<Scalar> px = oriented_eigenbasis(x);
  const Mat<Scalar> py = oriented_eigenbasis(y);
  const bool frames_flip = (py * px.transpose()).determinant() < Scalar(0);
  if (cfg.restrict_special && frames_flip) px.col(0) *= Scalar(-1);
  starts.emplace_back(py * px.transpose(), 1e-9);
  starts.emplace_back(px.transpose() * py, 1e-9);

  for (int k = 1; k < cfg.num_restarts; ++k) {
    Mat<Scalar> h = random_orthogonal<Scalar>(d, derive_seed(cfg.seed, std::uint64_t(k)), false).matrix();
    if (cfg.restrict_special && h.determinant() < Scalar(0)) h.col(0) *= Scalar(-1);
    starts.emplace_back(py * h * px.transpose(), 1e-9);
    starts.emplace_back(py * h.transpose() * px.transpose(), 1e-9);
  }
  return starts;
}

template <typename Scalar>
struct AlternationRun {
  Scalar objective = std::numeric_limits<Scalar>::infinity();
  OrthogonalMatrix<Scalar> theta;
  TransportPlan<Scalar> plan;
  std::vector<Scalar> trace;
  bool converged = false;
};

template <typename Scalar>
TransportPlan<Scalar> solve_backend(const DiscreteMeasure<Scalar>& x, const DiscreteMeasure<Scalar>& y,
                                    const CostMatrix<Scalar>& c, const OtBackend& backend,
                                    const TransportPlan<Scalar>* warm) {
  if (backend.kind == SolverKind::Exact) return solve_exact(x, y, c, warm);
  SinkhornOptions<Scalar> opts;
  opts.epsilon = Scalar(backend.epsilon);
  opts.max_iter = backend.sinkhorn_max_iter;
  opts.tol = Scalar(backend.sinkhorn_tol);
  opts.strict = false;
  return solve_sinkhorn(x, y, c, opts, warm);
}

template <typename Scalar>
AlternationRun<Scalar> alternate(const DiscreteMeasure<Scalar>& x, const DiscreteMeasure<Scalar>& y,
                                 OrthogonalMatrix<Scalar> theta, const AlignConfig& cfg) {
  AlternationRun<Scalar> run;
  run.theta = theta;
  bool solver_ok = true;
  const TransportPlan<Scalar>* warm = nullptr;
  OtBackend backend = cfg.ot_backend;

  for (int iter = 0; iter < cfg.max_outer_iter; ++iter) {
    const Mat<Scalar> moved = x.points() * theta.matrix().transpose();
    const CostMatrix<Scalar> c = squared_euclidean_cost(moved, y.points());
    // Sinkhorn epsilon is taken from the first cost matrix of each start.
    if (backend.kind == SolverKind::Sinkhorn && !(backend.epsilon > 0)) backend.epsilon = double(default_epsilon(c));
    TransportPlan<Scalar> plan = solve_backend(x, y, c, backend, warm);
    solver_ok = solver_ok && plan.converged;
    const Scalar after_ot = plan_cost(plan, c);
    if (after_ot > run.objective) {
      // Only possible with an inexact backend: keep the previous iterate.
      run.converged = solver_ok;
      break;
    }
    OrthogonalMatrix<Scalar> next = procrustes_step(x, y, plan, cfg.restrict_special);
    Scalar objective = alignment_objective(x.points(), y.points(), plan, next.matrix());
    if (objective > after_ot) {
      next = theta;
      objective = after_ot;
    }
    const Scalar previous = run.objective;
    run.objective = objective;
    run.theta = next;
    run.plan = std::move(plan);
    run.trace.push_back(objective);
    warm = &run.plan;
    theta = next;
    if (std::isfinite(previous) &&
        previous - objective <= Scalar(cfg.rel_tol) * std::max(previous, std::numeric_limits<Scalar>::min())) {
      run.converged = solver_ok;
      break;
    }
  }
  return run;
}

}  // namespace detail

template <typename Scalar>
PWResult<Scalar> pw_empirical(const DiscreteMeasure<Scalar>& x, const DiscreteMeasure<Scalar>& y,
                              const AlignConfig& cfg = {}) {
  require_same_dim(x.dim(), y.dim(), "pw_empirical ambient dimension");
  if (cfg.num_restarts < 1) throw Error(Errc::InvalidArgument, "num_restarts must be >= 1");
  if (!(cfg.rel_tol > 0)) throw Error(Errc::InvalidArgument, "rel_tol must be > 0");
  if (cfg.max_outer_iter < 1) throw Error(Errc::InvalidArgument, "max_outer_iter must be >= 1");

  const auto [xc, x_mean] = center(x);
  const auto [yc, y_mean] = center(y);
  const auto starts = detail::starting_rotations(xc, yc, cfg);

  std::vector<detail::AlternationRun<Scalar>> runs(starts.size());
  std::vector<std::exception_ptr> failures(starts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < starts.size(); k = next++) {
      try {
        runs[k] = detail::alternate(xc, yc, starts[k], cfg);
      } catch (...) {
        failures[k] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(cfg.threads, 1, int(starts.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  std::size_t best = 0;
  for (std::size_t k = 1; k < runs.size(); ++k) {
    if (runs[k].objective < runs[best].objective) best = k;
  }

  PWResult<Scalar> out;
  auto& win = runs[best];
  out.distance = std::sqrt(std::max(win.objective, Scalar(0)));
  out.theta_star = win.theta;
  out.plan = std::move(win.plan);
  out.trace = std::move(win.trace);
  out.converged = win.converged;
  out.best_start = int(best);
  out.translation = out.theta_star.matrix() * x_mean - y_mean;
  for (const auto& r : runs) out.start_objectives.push_back(r.objective);
  return out;
}

}  // namespace procwass
