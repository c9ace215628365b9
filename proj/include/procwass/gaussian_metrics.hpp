#pragma once

// Closed-form transport quantities between Gaussian measures: the
// Bures-Wasserstein distance, the Procrustes-Wasserstein distance (W2 modulo
// orthogonal maps and translations) and the linear Monge map.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "procwass/error.hpp"
#include "procwass/linalg.hpp"

namespace procwass {

template <typename Scalar = double>
class GaussianDistribution {
 public:
  GaussianDistribution() = default;

  GaussianDistribution(Vec<Scalar> mean, SymmetricMatrix<Scalar> covariance)
      : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    require_same_dim(mean_.size(), covariance_.dim(), "GaussianDistribution mean/covariance");
    require_finite(mean_, "GaussianDistribution mean");
    require_psd(covariance_, "GaussianDistribution covariance");
  }

  static GaussianDistribution centered(SymmetricMatrix<Scalar> covariance) {
    Vec<Scalar> zero = Vec<Scalar>::Zero(covariance.dim());
    return GaussianDistribution(std::move(zero), std::move(covariance));
  }

  Eigen::Index dim() const { return mean_.size(); }
  const Vec<Scalar>& mean() const { return mean_; }
  const SymmetricMatrix<Scalar>& covariance() const { return covariance_; }

 private:
  Vec<Scalar> mean_;
  SymmetricMatrix<Scalar> covariance_;
};

/// Orbit representative of a Gaussian under orthogonal maps and translations:
/// square roots of the covariance eigenvalues, ascending.
template <typename Scalar = double>
class GaussianClass {
 public:
  GaussianClass() = default;

  explicit GaussianClass(Vec<Scalar> sqrt_eigenvalues) : values_(std::move(sqrt_eigenvalues)) {
    require_finite(values_, "GaussianClass");
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
      if (values_(i) < Scalar(0)) throw Error(Errc::InvalidArgument, "GaussianClass entries must be >= 0");
      if (i > 0 && values_(i) < values_(i - 1)) {
        throw Error(Errc::InvalidArgument, "GaussianClass entries must be ascending");
      }
    }
  }

  Eigen::Index dim() const { return values_.size(); }
  const Vec<Scalar>& sqrt_eigenvalues() const { return values_; }

 private:
  Vec<Scalar> values_;
};

/// Affine map x -> offset + matrix * (x - source_mean); stored in the
/// equivalent form x -> matrix * x + offset.
template <typename Scalar = double>
struct LinearMap {
  Mat<Scalar> matrix;
  Vec<Scalar> offset;

  template <typename Derived>
  Vec<Scalar> operator()(const Eigen::MatrixBase<Derived>& x) const {
    return matrix * x + offset;
  }
};

/// O # N(m, S) = N(O m, O S O^T).
template <typename Scalar>
GaussianDistribution<Scalar> pushforward(const OrthogonalMatrix<Scalar>& o,
                                         const GaussianDistribution<Scalar>& g) {
  require_same_dim(o.dim(), g.dim(), "pushforward");
  const Mat<Scalar>& q = o.matrix();
  return GaussianDistribution<Scalar>(q * g.mean(),
                                      SymmetricMatrix<Scalar>(q * g.covariance().matrix() * q.transpose()));
}

template <typename Scalar>
GaussianDistribution<Scalar> centered(const GaussianDistribution<Scalar>& g) {
  return GaussianDistribution<Scalar>::centered(g.covariance());
}

template <typename Scalar>
Scalar bures_w2(const GaussianDistribution<Scalar>& g0, const GaussianDistribution<Scalar>& g1) {
  require_same_dim(g0.dim(), g1.dim(), "bures_w2");
  const SymmetricMatrix<Scalar> root1 = psd_sqrt(g1.covariance());
  const SymmetricMatrix<Scalar> cross(root1.matrix() * g0.covariance().matrix() * root1.matrix());
  const Scalar cross_trace = psd_sqrt(cross).trace();
  const Scalar gap = g0.covariance().trace() + g1.covariance().trace() - Scalar(2) * cross_trace;
  const Scalar mean_sq = (g0.mean() - g1.mean()).squaredNorm();
  return std::sqrt(std::max(Scalar(0), mean_sq + std::max(Scalar(0), gap)));
}

/// F(theta) = tr((S1^{1/2} theta S0 theta^T S1^{1/2})^{1/2}).
template <typename Scalar>
Scalar gaussian_F(const OrthogonalMatrix<Scalar>& theta, const SymmetricMatrix<Scalar>& sigma0,
                  const SymmetricMatrix<Scalar>& sigma1) {
  require_same_dim(sigma0.dim(), sigma1.dim(), "gaussian_F covariances");
  require_same_dim(theta.dim(), sigma0.dim(), "gaussian_F theta");
  require_psd(sigma0, "gaussian_F sigma0");
  const SymmetricMatrix<Scalar> root1 = psd_sqrt(sigma1);
  const Mat<Scalar>& q = theta.matrix();
  const SymmetricMatrix<Scalar> inner(root1.matrix() * q * sigma0.matrix() * q.transpose() *
                                      root1.matrix());
  return psd_sqrt(inner).trace();
}

template <typename Scalar>
GaussianClass<Scalar> canonical_class(const GaussianDistribution<Scalar>& g) {
  return GaussianClass<Scalar>(psd_eigenvalues(g.covariance()).cwiseSqrt());
}

template <typename Scalar>
Scalar class_distance(const GaussianClass<Scalar>& c0, const GaussianClass<Scalar>& c1) {
  require_same_dim(c0.dim(), c1.dim(), "class_distance");
  return (c0.sqrt_eigenvalues() - c1.sqrt_eigenvalues()).norm();
}

template <typename Scalar = double>
struct GaussianPWResult {
  Scalar distance = 0;
  OrthogonalMatrix<Scalar> theta_star;
  GaussianClass<Scalar> class0;
  GaussianClass<Scalar> class1;
  /// ||m0 - m1||; not part of the distance, reported for callers who need it.
  Scalar mean_gap = 0;
  /// F(theta_star); equals <sqrt a0, sqrt a1> up to rounding.
  Scalar certificate = 0;
};

/// Procrustes-Wasserstein distance between Gaussians: Euclidean distance of the
/// ascending square-rooted spectra. theta_star is the better (by F) of the two
/// eigenbasis products P1 P0^T and P0^T P1.
template <typename Scalar>
GaussianPWResult<Scalar> pw_gaussian(const GaussianDistribution<Scalar>& g0,
                                     const GaussianDistribution<Scalar>& g1,
                                     bool restrict_special = false) {
  require_same_dim(g0.dim(), g1.dim(), "pw_gaussian");
  const auto e0 = sym_eigen(g0.covariance());
  const auto e1 = sym_eigen(g1.covariance());
  const Vec<Scalar> a0 = detail::clamped_eigenvalues<Scalar>(e0.eigenvalues, "pw_gaussian sigma0");
  const Vec<Scalar> a1 = detail::clamped_eigenvalues<Scalar>(e1.eigenvalues, "pw_gaussian sigma1");

  Mat<Scalar> p0 = e0.eigenvectors;
  const Mat<Scalar>& p1 = e1.eigenvectors;
  if (restrict_special && (p1 * p0.transpose()).determinant() < Scalar(0)) {
    // Any eigenbasis works; flipping one column of P0 moves P1 P0^T into SO(d).
    p0.col(0) *= Scalar(-1);
  }

  GaussianPWResult<Scalar> out;
  out.class0 = GaussianClass<Scalar>(a0.cwiseSqrt());
  out.class1 = GaussianClass<Scalar>(a1.cwiseSqrt());
  out.distance = class_distance(out.class0, out.class1);
  out.mean_gap = (g0.mean() - g1.mean()).norm();

  const OrthogonalMatrix<Scalar> p1_p0t(p1 * p0.transpose(), 1e-9);
  const OrthogonalMatrix<Scalar> p0t_p1(p0.transpose() * p1, 1e-9);
  const Scalar f_p1_p0t = gaussian_F(p1_p0t, g0.covariance(), g1.covariance());
  const bool try_p0t_p1 = !restrict_special || p0t_p1.special();
  const Scalar f_p0t_p1 = try_p0t_p1 ? gaussian_F(p0t_p1, g0.covariance(), g1.covariance()) : Scalar(0);
  if (try_p0t_p1 && f_p0t_p1 > f_p1_p0t) {
    out.theta_star = p0t_p1;
    out.certificate = f_p0t_p1;
  } else {
    out.theta_star = p1_p0t;
    out.certificate = f_p1_p0t;
  }
  return out;
}

/// Optimal (W2) affine map pushing g0 onto g1. Needs a strictly positive
/// definite source covariance.
template <typename Scalar>
LinearMap<Scalar> monge_map(const GaussianDistribution<Scalar>& g0,
                            const GaussianDistribution<Scalar>& g1) {
  require_same_dim(g0.dim(), g1.dim(), "monge_map");
  const auto e0 = sym_eigen(g0.covariance());
  const Scalar max_ev = e0.eigenvalues.cwiseAbs().maxCoeff();
  if (!(e0.eigenvalues.minCoeff() > Scalar(1e-12) * max_ev) || max_ev <= Scalar(0)) {
    throw Error(Errc::SingularCovariance, "monge_map: source covariance is not positive definite");
  }
  require_psd(g1.covariance(), "monge_map sigma1");
  const Mat<Scalar>& p = e0.eigenvectors;
  const Mat<Scalar> root0 = p * e0.eigenvalues.cwiseSqrt().asDiagonal() * p.transpose();
  const Mat<Scalar> inv_root0 = p * e0.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal() * p.transpose();
  const SymmetricMatrix<Scalar> middle(root0 * g1.covariance().matrix() * root0);
  const SymmetricMatrix<Scalar> a(inv_root0 * psd_sqrt(middle).matrix() * inv_root0);

  LinearMap<Scalar> out;
  out.matrix = a.matrix();
  out.offset = g1.mean() - out.matrix * g0.mean();
  return out;
}

}  // namespace procwass
