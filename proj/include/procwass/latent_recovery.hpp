#pragma once

// Recovery of a latent centered Gaussian N(0, S) observed only through an
// unknown orthogonal map, r_i = V p_i. Only the orthogonal-equivalence class
// of N(0, S) is identifiable; it is estimated as the Procrustes-Wasserstein
// Frechet mean of the empirical classes, i.e. the component-wise mean of the
// ascending square-rooted spectra of the empirical second-moment matrices.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <thread>
#include <utility>
#include <vector>

#include "procwass/error.hpp"
#include "procwass/gaussian_metrics.hpp"
#include "procwass/linalg.hpp"
#include "procwass/random.hpp"

namespace procwass {

template <typename Scalar = double>
struct SimulationProvenance {
  SymmetricMatrix<Scalar> covariance;
  OrthogonalMatrix<Scalar> transform;
  std::uint64_t seed = 0;
};

template <typename Scalar = double>
class ObservationSet {
 public:
  ObservationSet() = default;

  explicit ObservationSet(Mat<Scalar> samples,
                          std::optional<SimulationProvenance<Scalar>> provenance = std::nullopt)
      : samples_(std::move(samples)), provenance_(std::move(provenance)) {
    if (samples_.rows() < 1) throw Error(Errc::InvalidArgument, "ObservationSet needs n >= 1");
    require_finite(samples_, "ObservationSet");
  }

  Eigen::Index size() const { return samples_.rows(); }
  Eigen::Index dim() const { return samples_.cols(); }
  const Mat<Scalar>& samples() const { return samples_; }
  const std::optional<SimulationProvenance<Scalar>>& provenance() const { return provenance_; }

 private:
  Mat<Scalar> samples_;
  std::optional<SimulationProvenance<Scalar>> provenance_;
};

/// (1/n) sum r_i r_i^T. With `subtract_mean` the sample mean is removed first
/// (still 1/n normalized), for data that is not known to be centered.
template <typename Scalar>
SymmetricMatrix<Scalar> empirical_covariance(const ObservationSet<Scalar>& obs, bool subtract_mean = false) {
  const Scalar n = Scalar(obs.size());
  if (!subtract_mean) {
    return SymmetricMatrix<Scalar>(obs.samples().transpose() * obs.samples() / n);
  }
  const Mat<Scalar> centered = obs.samples().rowwise() - obs.samples().colwise().mean();
  return SymmetricMatrix<Scalar>(centered.transpose() * centered / n);
}

/// Element-wise square root of the ascending eigenvalues.
template <typename Scalar>
Vec<Scalar> sqrt_spectrum(const SymmetricMatrix<Scalar>& s) {
  return psd_eigenvalues(s).cwiseSqrt();
}

template <typename Scalar>
Vec<Scalar> mean_of_rows(const Mat<Scalar>& rows) {
  return rows.colwise().mean().transpose();
}

/// Frechet mean, under the Procrustes-Wasserstein metric, of the empirical
/// classes of several independent batches.
template <typename Scalar>
GaussianClass<Scalar> frechet_mean_estimate(const std::vector<ObservationSet<Scalar>>& batches,
                                            bool subtract_mean = false) {
  if (batches.empty()) throw Error(Errc::InvalidArgument, "frechet_mean_estimate needs >= 1 batch");
  const Eigen::Index d = batches.front().dim();
  Mat<Scalar> spectra(Eigen::Index(batches.size()), d);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    require_same_dim(batches[b].dim(), d, "frechet_mean_estimate batch dimension");
    spectra.row(Eigen::Index(b)) = sqrt_spectrum(empirical_covariance(batches[b], subtract_mean)).transpose();
  }
  return GaussianClass<Scalar>(mean_of_rows(spectra));
}

/// Empirical Frechet functional: sum_b |spectrum_b - candidate|^2.
template <typename Scalar>
Scalar frechet_functional(const Mat<Scalar>& spectra, const GaussianClass<Scalar>& candidate) {
  require_same_dim(spectra.cols(), candidate.dim(), "frechet_functional");
  return (spectra.rowwise() - candidate.sqrt_eigenvalues().transpose()).squaredNorm();
}

/// n draws of r = V p with p ~ N(0, S), p built from the spectral factor of S
/// so rank-deficient S works. Deterministic in `seed`.
template <typename Scalar>
ObservationSet<Scalar> simulate_observations(const SymmetricMatrix<Scalar>& true_cov,
                                             const OrthogonalMatrix<Scalar>& v, Eigen::Index n,
                                             std::uint64_t seed) {
  require_same_dim(true_cov.dim(), v.dim(), "simulate_observations");
  if (n < 1) throw Error(Errc::InvalidArgument, "simulate_observations needs n >= 1");
  const auto eig = sym_eigen(true_cov);
  const Vec<Scalar> lam = detail::clamped_eigenvalues<Scalar>(eig.eigenvalues, "simulate_observations");
  const Mat<Scalar> factor = v.matrix() * eig.eigenvectors * lam.cwiseSqrt().asDiagonal();

  const Eigen::Index d = true_cov.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat<Scalar> z(d, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) z(k, i) = Scalar(normal(rng));
  Mat<Scalar> samples = (factor * z).transpose();
  return ObservationSet<Scalar>(std::move(samples), SimulationProvenance<Scalar>{true_cov, v, seed});
}

template <typename Scalar = double>
struct RecoveryReport {
  GaussianClass<Scalar> estimated_class;
  Mat<Scalar> per_replicate_sqrt_spectra;  // replicates x d, rows ascending
  std::optional<GaussianClass<Scalar>> true_class;
  /// class_distance(estimated_class, true_class).
  std::optional<Scalar> class_error;
  /// class_distance(replicate spectrum, true_class), one per replicate.
  Vec<Scalar> replicate_errors;
  Eigen::Index n_per_replicate = 0;
  Eigen::Index replicates = 0;

  Scalar mean_replicate_error() const { return replicate_errors.size() ? replicate_errors.mean() : Scalar(0); }
  Scalar std_replicate_error() const {
    if (replicate_errors.size() < 2) return Scalar(0);
    const Scalar mu = replicate_errors.mean();
    return std::sqrt((replicate_errors.array() - mu).square().sum() / Scalar(replicate_errors.size() - 1));
  }
};

namespace detail {

template <typename Scalar>
RecoveryReport<Scalar> summarize(Mat<Scalar> spectra, Eigen::Index n,
                                 const std::optional<GaussianClass<Scalar>>& truth) {
  RecoveryReport<Scalar> report;
  report.estimated_class = GaussianClass<Scalar>(mean_of_rows(spectra));
  report.n_per_replicate = n;
  report.replicates = spectra.rows();
  report.true_class = truth;
  if (truth) {
    report.class_error = class_distance(report.estimated_class, *truth);
    report.replicate_errors.resize(spectra.rows());
    for (Eigen::Index r = 0; r < spectra.rows(); ++r) {
      report.replicate_errors(r) = (spectra.row(r).transpose() - truth->sqrt_eigenvalues()).norm();
    }
  }
  report.per_replicate_sqrt_spectra = std::move(spectra);
  return report;
}

template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& body) {
  std::vector<std::exception_ptr> failures(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        body(k);
      } catch (...) {
        failures[k] = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(threads, 1, std::max(1, int(count)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
}

}  // namespace detail

struct RecoveryOptions {
  bool restrict_special = false;  // group the hidden V is drawn from
  int threads = 1;
};

/// For each n (ascending), draws `replicates` fresh (V, batch) pairs and
/// reports the Frechet-mean class together with its error against the truth.
template <typename Scalar>
std::vector<RecoveryReport<Scalar>> recovery_experiment(const SymmetricMatrix<Scalar>& true_cov,
                                                        std::vector<Eigen::Index> n_grid, Eigen::Index replicates,
                                                        std::uint64_t seed, const RecoveryOptions& opts = {}) {
  if (replicates < 1) throw Error(Errc::InvalidArgument, "recovery_experiment needs replicates >= 1");
  if (n_grid.empty()) throw Error(Errc::InvalidArgument, "recovery_experiment needs a non-empty n grid");
  std::sort(n_grid.begin(), n_grid.end());
  const Eigen::Index d = true_cov.dim();
  const GaussianClass<Scalar> truth(sqrt_spectrum(true_cov));

  std::vector<RecoveryReport<Scalar>> reports;
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    const Eigen::Index n = n_grid[g];
    if (n < 1) throw Error(Errc::InvalidArgument, "recovery_experiment needs n >= 1");
    Mat<Scalar> spectra(replicates, d);
    detail::parallel_for(std::size_t(replicates), opts.threads, [&](std::size_t r) {
      const std::uint64_t stream = 2 * (std::uint64_t(g) * std::uint64_t(replicates) + r);
      const auto v = random_orthogonal<Scalar>(d, derive_seed(seed, stream), opts.restrict_special);
      const auto obs = simulate_observations(true_cov, v, n, derive_seed(seed, stream + 1));
      spectra.row(Eigen::Index(r)) = sqrt_spectrum(empirical_covariance(obs)).transpose();
    });
    reports.push_back(detail::summarize(std::move(spectra), n, std::optional<GaussianClass<Scalar>>(truth)));
  }
  return reports;
}

/// Single-dataset estimate: the expectation over replicates is replaced by B
/// bootstrap resamples (rows drawn with replacement).
template <typename Scalar>
RecoveryReport<Scalar> bootstrap_estimate(const ObservationSet<Scalar>& obs, Eigen::Index resamples,
                                          std::uint64_t seed, bool subtract_mean = false) {
  if (resamples < 1) throw Error(Errc::InvalidArgument, "bootstrap needs B >= 1");
  const Eigen::Index n = obs.size();
  Mat<Scalar> spectra(resamples, obs.dim());
  for (Eigen::Index b = 0; b < resamples; ++b) {
    std::mt19937_64 rng(derive_seed(seed, std::uint64_t(b)));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    Mat<Scalar> draw(n, obs.dim());
    for (Eigen::Index i = 0; i < n; ++i) draw.row(i) = obs.samples().row(pick(rng));
    spectra.row(b) = sqrt_spectrum(empirical_covariance(ObservationSet<Scalar>(std::move(draw)), subtract_mean))
                         .transpose();
  }
  return detail::summarize(std::move(spectra), n, std::optional<GaussianClass<Scalar>>{});
}

/// Single-dataset estimate without resampling: the class of the dataset itself.
template <typename Scalar>
RecoveryReport<Scalar> plugin_estimate(const ObservationSet<Scalar>& obs, bool subtract_mean = false) {
  Mat<Scalar> spectra(1, obs.dim());
  spectra.row(0) = sqrt_spectrum(empirical_covariance(obs, subtract_mean)).transpose();
  return detail::summarize(std::move(spectra), obs.size(), std::optional<GaussianClass<Scalar>>{});
}

}  // namespace procwass
