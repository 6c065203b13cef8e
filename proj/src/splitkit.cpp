#include "red/splitkit.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <cmath>
#include <mutex>
#include <numbers>

namespace red::split {

namespace {
std::mutex g_fftw_mutex;  // FFTW planning is not thread-safe
}

std::array<double, 5> band_powers(const Signal& epoch) {
  validate_signal(epoch, "band_powers");
  const size_t n = epoch.samples.size();
  if (n < 2) throw Error("band_powers: epoch too short");

  std::vector<double> in(epoch.samples);
  std::vector<fftw_complex> out(n / 2 + 1);
  {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                          out.data(), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
  }

  const double df = epoch.fs / static_cast<double>(n);
  std::array<double, 5> powers{};
  for (size_t b = 0; b < kBands.size(); ++b) {
    const auto [f_lo, f_hi] = kBands[b];
    double total = 0.0;
    size_t count = 0;
    for (size_t k = 0; k < out.size(); ++k) {
      const double f = df * static_cast<double>(k);
      if (f > f_lo && f <= f_hi) {
        total += std::hypot(out[k][0], out[k][1]);
        ++count;
      }
    }
    if (count == 0) {
      throw Error("band_powers: no DFT bins in band (" +
                  std::to_string(f_lo) + ", " + std::to_string(f_hi) +
                  "] Hz; epoch too short");
    }
    powers[b] = std::log(total / static_cast<double>(count));
  }
  return powers;
}

void standardize(std::vector<std::array<double, 5>>& rows) {
  if (rows.size() < 2) throw Error("standardize: need at least 2 rows");
  const double n = static_cast<double>(rows.size());
  for (size_t j = 0; j < 5; ++j) {
    double mean = 0.0;
    for (const auto& r : rows) mean += r[j];
    mean /= n;
    double var = 0.0;
    for (const auto& r : rows) var += (r[j] - mean) * (r[j] - mean);
    var /= n;
    if (var <= 0.0) {
      throw Error("standardize: column " + std::to_string(j) +
                  " has zero variance");
    }
    const double inv_std = 1.0 / std::sqrt(var);
    for (auto& r : rows) r[j] = (r[j] - mean) * inv_std;
  }
}

std::vector<double> rbf_kernel_matrix(
    const std::vector<std::array<double, 5>>& rows, double gamma) {
  if (!(gamma > 0.0)) throw Error("kpca: gamma must be positive");
  const size_t n = rows.size();
  std::vector<double> kernel(n * n);
  for (size_t i = 0; i < n; ++i) {
    kernel[i * n + i] = 1.0;
    for (size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (size_t f = 0; f < 5; ++f) {
        const double d = rows[i][f] - rows[j][f];
        d2 += d * d;
      }
      const double v = std::exp(-gamma * d2);
      kernel[i * n + j] = v;
      kernel[j * n + i] = v;
    }
  }
  return kernel;
}

void double_center(std::vector<double>& kernel, size_t n) {
  if (kernel.size() != n * n) throw Error("double_center: bad matrix size");
  std::vector<double> row_mean(n, 0.0);
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) row_mean[i] += kernel[i * n + j];
    row_mean[i] /= static_cast<double>(n);
    total += row_mean[i];
  }
  total /= static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      kernel[i * n + j] += total - row_mean[i] - row_mean[j];
    }
  }
}

Projection kpca_project(const std::vector<std::array<double, 5>>& rows,
                        double gamma) {
  const size_t n = rows.size();
  if (n < 3) throw Error("kpca: need at least 3 rows");
  for (size_t j = 0; j < 5; ++j) {
    double mean = 0.0;
    for (const auto& r : rows) mean += r[j];
    mean /= static_cast<double>(n);
    if (std::fabs(mean) > 1e-6) {
      throw Error("kpca: rows are not standardized (column mean " +
                  std::to_string(mean) + ")");
    }
  }

  std::vector<double> kdata = rbf_kernel_matrix(rows, gamma);
  double_center(kdata, n);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>>
      kernel(kdata.data(), static_cast<Eigen::Index>(n),
             static_cast<Eigen::Index>(n));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(kernel);
  if (solver.info() != Eigen::Success) {
    throw Error("kpca: eigendecomposition failed");
  }
  const Eigen::VectorXd evals = solver.eigenvalues();  // ascending
  const double lambda_max = evals(static_cast<Eigen::Index>(n) - 1);
  const double cutoff = 1e-10 * std::max(lambda_max, 0.0);
  const double l1 = evals(static_cast<Eigen::Index>(n) - 1);
  const double l2 = evals(static_cast<Eigen::Index>(n) - 2);
  if (!(l1 > cutoff && l2 > cutoff) || l2 <= 0.0) {
    throw Error("kpca: fewer than 2 positive eigenvalues");
  }

  Projection proj;
  proj.eigenvalues = {l1, l2};
  proj.points.resize(n);
  for (int comp = 0; comp < 2; ++comp) {
    const Eigen::Index col = static_cast<Eigen::Index>(n) - 1 - comp;
    Eigen::VectorXd vec = solver.eigenvectors().col(col);
    // Deterministic sign: largest-magnitude entry positive.
    Eigen::Index arg_max = 0;
    vec.cwiseAbs().maxCoeff(&arg_max);
    if (vec(arg_max) < 0.0) vec = -vec;
    const double scale = std::sqrt(comp == 0 ? l1 : l2);
    for (size_t i = 0; i < n; ++i) {
      proj.points[i][static_cast<size_t>(comp)] =
          scale * vec(static_cast<Eigen::Index>(i));
    }
  }
  return proj;
}

Gaussian2d fit_gaussian(const std::vector<std::array<double, 2>>& points) {
  const size_t n = points.size();
  if (n < 3) throw Error("fit_gaussian: need at least 3 points");
  Gaussian2d g;
  for (const auto& p : points) {
    g.mean[0] += p[0];
    g.mean[1] += p[1];
  }
  g.mean[0] /= static_cast<double>(n);
  g.mean[1] /= static_cast<double>(n);
  for (const auto& p : points) {
    const double dx = p[0] - g.mean[0];
    const double dy = p[1] - g.mean[1];
    g.cov[0][0] += dx * dx;
    g.cov[0][1] += dx * dy;
    g.cov[1][1] += dy * dy;
  }
  const double denom = static_cast<double>(n) - 1.0;
  g.cov[0][0] /= denom;
  g.cov[0][1] /= denom;
  g.cov[1][1] /= denom;
  g.cov[1][0] = g.cov[0][1];
  const double det = g.cov[0][0] * g.cov[1][1] - g.cov[0][1] * g.cov[1][0];
  if (!(det > 1e-300) || !(g.cov[0][0] > 0.0) || !(g.cov[1][1] > 0.0)) {
    throw Error("fit_gaussian: singular covariance");
  }
  return g;
}

double chi2_quantile_2dof(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error("chi2_quantile_2dof: p must lie in (0, 1)");
  }
  return -2.0 * std::log(1.0 - p);
}

Ellipse ellipse_95(const Gaussian2d& g) {
  // Closed-form symmetric 2x2 eigendecomposition.
  const double a = g.cov[0][0], b = g.cov[0][1], c = g.cov[1][1];
  const double tr = a + c;
  const double disc = std::sqrt(std::max(0.0, (a - c) * (a - c) + 4.0 * b * b));
  const double l1 = 0.5 * (tr + disc);
  const double l2 = 0.5 * (tr - disc);
  if (!(l2 > 0.0)) throw Error("ellipse_95: singular covariance");

  const double q = chi2_quantile_2dof(0.95);
  Ellipse e;
  e.center = g.mean;
  e.semi_axes = {std::sqrt(l1 * q), std::sqrt(l2 * q)};
  if (std::fabs(b) < 1e-300 && a >= c) {
    e.rotation_rad = 0.0;
  } else if (std::fabs(b) < 1e-300) {
    e.rotation_rad = std::numbers::pi / 2.0;
  } else {
    e.rotation_rad = std::atan2(l1 - a, b);
  }
  return e;
}

}  // namespace red::split
