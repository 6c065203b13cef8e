#pragma once

#include <array>
#include <vector>

#include "red/types.hpp"

// Band-power features per epoch, Kernel PCA projection to 2D, and
// per-recording Gaussian fits with 95% confidence ellipses, for judging how
// representative a test split is.
namespace red::split {

// The five sleep-medicine bands in Hz; a bin at frequency f belongs to band
// (f_L, f_U] when f_L < f <= f_U.
inline constexpr std::array<std::pair<double, double>, 5> kBands = {{
    {1.0, 4.0}, {4.0, 8.0}, {8.0, 12.0}, {12.0, 15.0}, {15.0, 30.0}}};

// log of the mean DFT magnitude over each band's bins (full epoch, no
// taper). Throws when a band holds no bins (epoch shorter than 2 s).
std::array<double, 5> band_powers(const Signal& epoch);

// Per-column standardization to zero mean, unit variance.
void standardize(std::vector<std::array<double, 5>>& rows);

// n x n row-major RBF kernel matrix k(x,y) = exp(-gamma ||x-y||^2).
std::vector<double> rbf_kernel_matrix(
    const std::vector<std::array<double, 5>>& rows, double gamma);

// In-place double centering: K - 1K - K1 + 1K1. Rows then sum to zero.
void double_center(std::vector<double>& kernel, size_t n);

struct Projection {
  std::vector<std::array<double, 2>> points;
  std::array<double, 2> eigenvalues{0.0, 0.0};
};

// RBF-kernel KPCA: k(x,y) = exp(-gamma ||x-y||^2), double-centered kernel,
// projections scaled by sqrt(eigenvalue). Needs >= 3 standardized rows and
// two positive eigenvalues.
Projection kpca_project(const std::vector<std::array<double, 5>>& rows,
                        double gamma);

inline constexpr double kDefaultGamma = 0.1;

struct Gaussian2d {
  std::array<double, 2> mean{0.0, 0.0};
  std::array<std::array<double, 2>, 2> cov{{{0.0, 0.0}, {0.0, 0.0}}};
};

Gaussian2d fit_gaussian(const std::vector<std::array<double, 2>>& points);

struct Ellipse {
  std::array<double, 2> center{0.0, 0.0};
  std::array<double, 2> semi_axes{0.0, 0.0};  // major, minor
  double rotation_rad{0.0};                   // major axis angle
};

// 95% confidence ellipse: semi-axes sqrt(lambda_i * q) with q the 0.95
// chi-square quantile for 2 dof.
Ellipse ellipse_95(const Gaussian2d& g);

// Closed form for 2 dof: q = -2 ln(1 - p).
double chi2_quantile_2dof(double p);

}  // namespace red::split
