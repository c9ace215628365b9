#pragma once

// Dense symmetric / orthogonal matrix kernels shared by every other module.
//
// Everything here is templated on the scalar type and works on Eigen dense
// matrices. The symmetric eigensolver is a cyclic Jacobi iteration with a
// fixed tie-breaking rule; decompositions are reproducible bit for bit.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "procwass/error.hpp"

namespace procwass {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Relative tolerance below which negative eigenvalues are treated as rounding
/// noise and clamped to zero.
inline constexpr double kPsdClampTol = 1e-10;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* where) {
  if (!m.allFinite()) throw Error(Errc::NonFinite, where);
}

/// Symmetric matrix stored as (A + A^T) / 2 so that entries(i,j) == entries(j,i)
/// holds bit for bit.
template <typename Scalar = double>
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;

  template <typename Derived>
  explicit SymmetricMatrix(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != a.cols()) {
      throw Error(Errc::DimensionMismatch,
                  "SymmetricMatrix needs a square matrix, got " + std::to_string(a.rows()) +
                      "x" + std::to_string(a.cols()));
    }
    if (a.rows() < 1) throw Error(Errc::InvalidArgument, "SymmetricMatrix needs dim >= 1");
    const Mat<Scalar> m = a.template cast<Scalar>();
    entries_ = m;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
        const Scalar s = (m(i, j) + m(j, i)) / Scalar(2);
        entries_(i, j) = s;
        entries_(j, i) = s;
      }
    }
  }

  static SymmetricMatrix identity(Eigen::Index dim) {
    return SymmetricMatrix(Mat<Scalar>::Identity(dim, dim));
  }

  template <typename Derived>
  static SymmetricMatrix diagonal(const Eigen::MatrixBase<Derived>& diag) {
    return SymmetricMatrix(Mat<Scalar>(diag.template cast<Scalar>().asDiagonal()));
  }

  Eigen::Index dim() const { return entries_.rows(); }
  const Mat<Scalar>& matrix() const { return entries_; }
  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }
  Scalar trace() const { return entries_.trace(); }

 private:
  Mat<Scalar> entries_;
};

template <typename Scalar = double>
struct SpectralDecomposition {
  Vec<Scalar> eigenvalues;   // ascending
  Mat<Scalar> eigenvectors;  // column i pairs with eigenvalues(i)

  Mat<Scalar> reconstruct() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
  }
};

/// Orthogonal matrix with a cached orientation flag (`special()` iff det > 0).
template <typename Scalar = double>
class OrthogonalMatrix {
 public:
  OrthogonalMatrix() = default;

  /// Validates Q^T Q = I within `tol` (max absolute entry deviation).
  template <typename Derived>
  explicit OrthogonalMatrix(const Eigen::MatrixBase<Derived>& q, double tol = 1e-10)
      : entries_(q.template cast<Scalar>()) {
    if (entries_.rows() != entries_.cols() || entries_.rows() < 1) {
      throw Error(Errc::DimensionMismatch, "OrthogonalMatrix needs a non-empty square matrix");
    }
    require_finite(entries_, "OrthogonalMatrix");
    const Scalar dev =
        (entries_.transpose() * entries_ - Mat<Scalar>::Identity(dim(), dim())).cwiseAbs().maxCoeff();
    if (!(dev <= Scalar(tol))) {
      throw Error(Errc::InvalidArgument,
                  "matrix is not orthogonal (deviation " + std::to_string(double(dev)) + ")");
    }
    special_ = entries_.determinant() > Scalar(0);
  }

  static OrthogonalMatrix identity(Eigen::Index dim) {
    return OrthogonalMatrix(Mat<Scalar>::Identity(dim, dim));
  }

  Eigen::Index dim() const { return entries_.rows(); }
  bool special() const { return special_; }
  const Mat<Scalar>& matrix() const { return entries_; }
  OrthogonalMatrix transpose() const { return OrthogonalMatrix(entries_.transpose()); }

  friend OrthogonalMatrix operator*(const OrthogonalMatrix& a, const OrthogonalMatrix& b) {
    return OrthogonalMatrix(a.entries_ * b.entries_, 1e-9);
  }

 private:
  Mat<Scalar> entries_;
  bool special_ = true;
};

namespace detail {

// Orients a vector so that its largest-magnitude component is positive
// (first index wins on equal magnitudes).
template <typename Scalar>
void orient_by_largest_component(Eigen::Ref<Vec<Scalar>> v) {
  Eigen::Index arg = 0;
  Scalar best = Scalar(-1);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > best) {
      best = std::abs(v(i));
      arg = i;
    }
  }
  if (v(arg) < Scalar(0)) v = -v;
}

template <typename Scalar>
bool lexicographically_greater(const Vec<Scalar>& a, const Vec<Scalar>& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) != b(i)) return a(i) > b(i);
  }
  return false;
}

template <typename Scalar>
Scalar off_diagonal_norm(const Mat<Scalar>& a) {
  Scalar sum = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (i != j) sum += a(i, j) * a(i, j);
  return std::sqrt(sum);
}

}  // namespace detail

/// Symmetric eigendecomposition by cyclic Jacobi sweeps.
///
/// Eigenvalues come back ascending. Within a cluster of numerically equal
/// eigenvalues each eigenvector is oriented so its largest-magnitude entry is
/// positive, and the cluster's columns are ordered lexicographically
/// descending (so the identity decomposes to the identity).
template <typename Scalar>
SpectralDecomposition<Scalar> sym_eigen(const SymmetricMatrix<Scalar>& s) {
  require_finite(s.matrix(), "sym_eigen");
  const Eigen::Index d = s.dim();
  Mat<Scalar> a = s.matrix();
  Mat<Scalar> v = Mat<Scalar>::Identity(d, d);

  const Scalar norm = a.norm();
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar stop = std::max(Scalar(1e-12), Scalar(16) * eps) * norm;
  constexpr int kMaxSweeps = 100;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (detail::off_diagonal_norm(a) <= stop) break;
    for (Eigen::Index p = 0; p < d - 1; ++p) {
      for (Eigen::Index q = p + 1; q < d; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        // Rotation annihilating a(p,q).
        const Scalar tau = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (tau >= Scalar(0) ? Scalar(1) : Scalar(-1)) /
                         (std::abs(tau) + std::sqrt(Scalar(1) + tau * tau));
        const Scalar c = Scalar(1) / std::sqrt(Scalar(1) + t * t);
        const Scalar sn = t * c;
        for (Eigen::Index k = 0; k < d; ++k) {
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < d; ++k) {
          const Scalar apk = a(p, k);
          const Scalar aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = Scalar(0);
        a(q, p) = Scalar(0);
        for (Eigen::Index k = 0; k < d; ++k) {
          const Scalar vkp = v(k, p);
          const Scalar vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });

  SpectralDecomposition<Scalar> out;
  out.eigenvalues.resize(d);
  out.eigenvectors.resize(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    out.eigenvalues(k) = a(order[k], order[k]);
    out.eigenvectors.col(k) = v.col(order[k]);
    detail::orient_by_largest_component<Scalar>(out.eigenvectors.col(k));
  }

  const Scalar scale = std::max(out.eigenvalues.cwiseAbs().maxCoeff(), Scalar(0));
  const Scalar tie = std::max(Scalar(1e-10), Scalar(64) * eps) * scale;
  Eigen::Index begin = 0;
  while (begin < d) {
    Eigen::Index end = begin + 1;
    while (end < d && out.eigenvalues(end) - out.eigenvalues(end - 1) <= tie) ++end;
    if (end - begin > 1) {
      std::vector<Vec<Scalar>> cols;
      for (Eigen::Index k = begin; k < end; ++k) cols.emplace_back(out.eigenvectors.col(k));
      std::stable_sort(cols.begin(), cols.end(), detail::lexicographically_greater<Scalar>);
      for (Eigen::Index k = begin; k < end; ++k) out.eigenvectors.col(k) = cols[k - begin];
    }
    begin = end;
  }
  return out;
}

namespace detail {

template <typename Scalar>
Vec<Scalar> clamped_eigenvalues(const Vec<Scalar>& ev, const char* where) {
  const Scalar scale = ev.size() ? ev.cwiseAbs().maxCoeff() : Scalar(0);
  const Scalar floor = -Scalar(kPsdClampTol) * scale;
  Vec<Scalar> out = ev;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < floor) {
      throw Error(Errc::NotPSD, std::string(where) + ": eigenvalue " +
                                    std::to_string(double(ev(i))) + " below clamp floor");
    }
    if (out(i) < Scalar(0)) out(i) = Scalar(0);
  }
  return out;
}

}  // namespace detail

/// Ascending eigenvalues of a PSD matrix with rounding-level negatives set to 0.
/// Throws NotPSD for genuinely indefinite input.
template <typename Scalar>
Vec<Scalar> psd_eigenvalues(const SymmetricMatrix<Scalar>& s) {
  return detail::clamped_eigenvalues<Scalar>(sym_eigen(s).eigenvalues, "psd_eigenvalues");
}

template <typename Scalar>
void require_psd(const SymmetricMatrix<Scalar>& s, const char* where) {
  detail::clamped_eigenvalues<Scalar>(sym_eigen(s).eigenvalues, where);
}

/// Unique PSD square root.
template <typename Scalar>
SymmetricMatrix<Scalar> psd_sqrt(const SymmetricMatrix<Scalar>& s) {
  const auto eig = sym_eigen(s);
  const Vec<Scalar> lam = detail::clamped_eigenvalues<Scalar>(eig.eigenvalues, "psd_sqrt");
  return SymmetricMatrix<Scalar>(eig.eigenvectors * lam.cwiseSqrt().asDiagonal() *
                                 eig.eigenvectors.transpose());
}

/// Orthogonal factor maximizing tr(theta * A) over O(d), or SO(d) when
/// `restrict_special` is set (Kabsch sign correction on the weakest direction).
template <typename Derived>
OrthogonalMatrix<typename Derived::Scalar> polar_orthogonal_factor(
    const Eigen::MatrixBase<Derived>& a, bool restrict_special) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols()) {
    throw Error(Errc::DimensionMismatch, "polar_orthogonal_factor needs a square matrix");
  }
  require_finite(a, "polar_orthogonal_factor");
  const Mat<Scalar> m = a;
  Eigen::JacobiSVD<Mat<Scalar>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat<Scalar>& u = svd.matrixU();
  Mat<Scalar> v = svd.matrixV();
  Mat<Scalar> theta = v * u.transpose();
  if (restrict_special && theta.determinant() < Scalar(0)) {
    // Singular values are descending, so the last column pairs with the smallest.
    v.col(v.cols() - 1) *= Scalar(-1);
    theta = v * u.transpose();
  }
  return OrthogonalMatrix<Scalar>(theta, 1e-9);
}

/// Haar-distributed sample on O(d) (or SO(d)) via sign-corrected QR of a
/// standard Gaussian matrix. Deterministic in `seed`.
template <typename Scalar = double>
OrthogonalMatrix<Scalar> random_orthogonal(Eigen::Index dim, std::uint64_t seed,
                                           bool restrict_special) {
  if (dim < 1) throw Error(Errc::InvalidArgument, "random_orthogonal needs dim >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat<Scalar> g(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j)
    for (Eigen::Index i = 0; i < dim; ++i) g(i, j) = Scalar(normal(rng));

  Eigen::HouseholderQR<Mat<Scalar>> qr(g);
  Mat<Scalar> q = qr.householderQ() * Mat<Scalar>::Identity(dim, dim);
  const Mat<Scalar> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < dim; ++k) {
    if (r(k, k) < Scalar(0)) q.col(k) *= Scalar(-1);
  }
  if (restrict_special && q.determinant() < Scalar(0)) q.col(0) *= Scalar(-1);
  return OrthogonalMatrix<Scalar>(q, 1e-9);
}

/// Rotation by `angle` radians in the plane.
template <typename Scalar = double>
OrthogonalMatrix<Scalar> rotation2d(Scalar angle) {
  Mat<Scalar> r(2, 2);
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return OrthogonalMatrix<Scalar>(r);
}

/// Relative Frobenius distance ||a - b|| / max(||b||, tiny).
template <typename A, typename B>
double relative_frobenius(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const double denom = std::max(double(b.norm()), 1e-300);
  return double((a - b).norm()) / denom;
}

}  // namespace procwass
