#pragma once

#include <complex>
#include <filesystem>
#include <vector>

#include "red/types.hpp"

// Continuous Wavelet Transform with complex Morlet wavelets: geometric scale
// grid, truncated kernels, and border-padded convolution.
namespace red::cwt {

struct CwtConfig {
  double f_min_hz{0.5};
  double f_max_hz{30.0};
  int n_scales{32};
  double beta{0.5};   // wavelet width
  double eta{1.5};    // truncation support factor, >= 1
  int border{1000};   // padding samples on each side (T_B)

  void validate() const;
};

struct Spectrogram {
  // Planes of shape (n_scales, n_samples), row-major.
  std::vector<double> real_plane;
  std::vector<double> imag_plane;
  std::vector<double> scale_grid;
  size_t n_samples{0};
  double fs{0.0};

  size_t n_scales() const { return scale_grid.size(); }
  double real_at(size_t scale, size_t t) const {
    return real_plane[scale * n_samples + t];
  }
  double imag_at(size_t scale, size_t t) const {
    return imag_plane[scale * n_samples + t];
  }
};

// Geometric progression of N_s scales whose central frequencies (1/s) run
// from f_max down to f_min; endpoints map exactly.
std::vector<double> scale_grid(const CwtConfig& config);

// Morlet kernel samples psi_s(t) = exp(j*2*pi*t/s) * exp(-t^2/(beta*s^2))
// on t in [-eta*s*sqrt(4.5*beta), +eta*s*sqrt(4.5*beta)] at spacing 1/fs.
// Odd length, centered at t = 0.
std::vector<std::complex<double>> morlet_kernel(double scale, double beta,
                                                double eta, double fs);

// Half-support of the truncated kernel, in samples.
int kernel_half_width(double scale, double beta, double eta, double fs);

// Same kernel but evaluated on a caller-fixed support (used when the width
// parameter changes after the support was chosen).
std::vector<std::complex<double>> morlet_kernel_fixed_support(
    double scale, double beta, int half_width, double fs);

// Transforms the central T samples of a segment of T + 2*border samples.
// Throws when the border cannot hold the widest truncated kernel; the error
// names the required border. Rows may be computed concurrently; each row's
// accumulation order is fixed.
Spectrogram transform(const Signal& padded_segment, const CwtConfig& config);

// Spectrogram dump: JSON header naming a binary file that carries the real
// plane followed by the imaginary plane as little-endian float64.
void write_spectrogram(const std::filesystem::path& json_path,
                       const Spectrogram& spec);
Spectrogram read_spectrogram(const std::filesystem::path& json_path);

}  // namespace red::cwt
