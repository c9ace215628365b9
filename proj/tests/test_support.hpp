#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "procwass/gaussian_metrics.hpp"
#include "procwass/linalg.hpp"

namespace procwass::testing {

inline Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline SymmetricMatrix<double> random_spd(std::mt19937_64& rng, Eigen::Index d) {
  const Eigen::MatrixXd a = gaussian_matrix(rng, d, d);
  return SymmetricMatrix<double>(a * a.transpose() + 0.05 * Eigen::MatrixXd::Identity(d, d));
}

inline GaussianDistribution<double> random_gaussian(std::mt19937_64& rng, Eigen::Index d) {
  return GaussianDistribution<double>(gaussian_matrix(rng, d, 1).col(0), random_spd(rng, d));
}

inline Eigen::Matrix2d rotation(double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

inline Eigen::Matrix2d reflection(double angle) {
  return rotation(angle) * Eigen::Vector2d(1.0, -1.0).asDiagonal();
}

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace procwass::testing

namespace procwass::testing {

// tr((S1^{1/2} T S0 T^T S1^{1/2})^{1/2}) for 2x2 inputs, using
// tr sqrt(M) = sqrt(tr M + 2 sqrt(det M)) for 2x2 PSD M.
inline double f_2x2(const Eigen::Matrix2d& theta, const Eigen::Matrix2d& s0, const Eigen::Matrix2d& s1) {
  // S1^{1/2} T S0 T^T S1^{1/2} is similar to T S0 T^T S1, which has the same trace and determinant.
  const Eigen::Matrix2d m = theta * s0 * theta.transpose() * s1;
  const double det = std::max(m.determinant(), 0.0);
  return std::sqrt(std::max(m.trace() + 2.0 * std::sqrt(det), 0.0));
}

// Minimum over a grid of rotations and reflections of the centered W2 distance
// between N(0, T S0 T^T) and N(0, S1).
inline double brute_force_pw_2d(const Eigen::Matrix2d& s0, const Eigen::Matrix2d& s1, int angles = 100000) {
  double best_f = 0;
  for (int k = 0; k < angles; ++k) {
    const double phi = 2 * kPi * k / angles;
    best_f = std::max({best_f, f_2x2(rotation(phi), s0, s1), f_2x2(reflection(phi), s0, s1)});
  }
  return std::sqrt(std::max(s0.trace() + s1.trace() - 2 * best_f, 0.0));
}

}  // namespace procwass::testing
