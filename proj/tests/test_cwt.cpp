#include <cmath>
#include <complex>

#include "doctest.h"
#include "oracles.hpp"
#include "red/cwt.hpp"
#include "red/rng.hpp"

using namespace red;

namespace {

Signal sine(double freq, double seconds, double rate) {
  Signal s;
  s.fs = rate;
  const auto n = static_cast<size_t>(seconds * rate);
  s.samples.resize(n);
  for (size_t j = 0; j < n; ++j) {
    s.samples[j] = std::sin(2.0 * std::numbers::pi * freq * j / rate);
  }
  return s;
}

}  // namespace

TEST_SUITE("cwt") {

TEST_CASE("scale grid endpoints and spacing") {
  cwt::CwtConfig cfg;
  cfg.n_scales = 2;
  auto scales = cwt::scale_grid(cfg);
  REQUIRE(scales.size() == 2);
  CHECK(scales[0] == doctest::Approx(1.0 / 30.0).epsilon(1e-15));
  CHECK(scales[1] == doctest::Approx(2.0).epsilon(1e-15));

  cfg.n_scales = 32;
  scales = cwt::scale_grid(cfg);
  REQUIRE(scales.size() == 32);
  CHECK(1.0 / scales.front() == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(1.0 / scales.back() == doctest::Approx(0.5).epsilon(1e-12));
  const double ratio = scales[1] / scales[0];
  for (size_t i = 1; i + 1 < scales.size(); ++i) {
    CHECK(scales[i + 1] / scales[i] == doctest::Approx(ratio).epsilon(1e-12));
    CHECK(scales[i + 1] > scales[i]);
  }
}

TEST_CASE("morlet kernel center value and symmetry") {
  const auto kernel = cwt::morlet_kernel(0.1, 0.5, 1.5, 200.0);
  REQUIRE(kernel.size() % 2 == 1);
  const size_t center = kernel.size() / 2;
  CHECK(kernel[center].real() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(kernel[center].imag() == doctest::Approx(0.0).epsilon(1e-15));
  for (size_t k = 0; k < kernel.size(); ++k) {
    CHECK(std::abs(kernel[k]) ==
          doctest::Approx(std::abs(kernel[kernel.size() - 1 - k]))
              .epsilon(1e-12));
  }
}

TEST_CASE("morlet half-support follows the truncation heuristic") {
  // s=1, beta=0.5, eta=1: half-support sqrt(4.5 * 0.5) = 1.5 s.
  CHECK(cwt::kernel_half_width(1.0, 0.5, 1.0, 200.0) == 300);
  const auto kernel = cwt::morlet_kernel(1.0, 0.5, 1.0, 200.0);
  CHECK(kernel.size() == 601);
}

TEST_CASE("zero signal transforms to zero planes") {
  Signal z;
  z.fs = 50.0;
  z.samples.assign(400, 0.0);
  cwt::CwtConfig cfg;
  cfg.n_scales = 4;
  cfg.f_min_hz = 2.0;
  cfg.f_max_hz = 20.0;
  cfg.border = 100;
  const auto spec = cwt::transform(z, cfg);
  CHECK(spec.n_samples == 200);
  for (double v : spec.real_plane) CHECK(v == 0.0);
  for (double v : spec.imag_plane) CHECK(v == 0.0);
}

TEST_CASE("insufficient border names the required padding") {
  Signal z;
  z.fs = 200.0;
  z.samples.assign(3000, 0.0);
  cwt::CwtConfig cfg;  // widest kernel at 0.5 Hz needs 900 samples
  cfg.border = 100;
  CHECK_THROWS_WITH_AS(cwt::transform(z, cfg), doctest::Contains("900"),
                       Error);
}

TEST_CASE("matches the direct Riemann-summation oracle on random signals") {
  Rng rng(101);
  cwt::CwtConfig cfg;
  cfg.n_scales = 4;
  cfg.f_min_hz = 2.0;
  cfg.f_max_hz = 20.0;
  cfg.beta = 0.5;
  cfg.eta = 1.5;
  cfg.border = 60;  // widest kernel at fs 50: eta*s*sqrt(2.25)*fs = 56

  for (int trial = 0; trial < 3; ++trial) {
    Signal x;
    x.fs = 50.0;
    x.samples.resize(100 + 2 * cfg.border);  // 2 s + borders
    for (double& v : x.samples) v = rng.normal();

    const auto spec = cwt::transform(x, cfg);
    const auto scales = cwt::scale_grid(cfg);
    std::vector<std::complex<double>> row;
    for (size_t s = 0; s < scales.size(); ++s) {
      oracle::cwt_row_direct(x.samples, x.fs, scales[s], cfg.beta, cfg.eta,
                             cfg.border, row);
      for (size_t t = 0; t < spec.n_samples; ++t) {
        const double prod_re = spec.real_at(s, t);
        const double prod_im = spec.imag_at(s, t);
        const double mag = std::max(std::abs(row[t]), 1e-12);
        CHECK(std::fabs(prod_re - row[t].real()) / mag < 1e-9);
        CHECK(std::fabs(prod_im - row[t].imag()) / mag < 1e-9);
      }
    }
  }
}

TEST_CASE("13 Hz sine peaks at the oracle's scale bin, within one bin of 13 Hz") {
  // Full paper-scale configuration: 20 s segment, 5 s borders at 200 Hz.
  Signal x = sine(13.0, 30.0, 200.0);
  cwt::CwtConfig cfg;  // N_s=32, beta=0.5, f in [0.5, 30]
  cfg.border = 1000;
  const auto spec = cwt::transform(x, cfg);

  std::vector<double> mean_mag(spec.n_scales(), 0.0);
  for (size_t s = 0; s < spec.n_scales(); ++s) {
    for (size_t t = 0; t < spec.n_samples; ++t) {
      mean_mag[s] += std::hypot(spec.real_at(s, t), spec.imag_at(s, t));
    }
    mean_mag[s] /= static_cast<double>(spec.n_samples);
  }
  const size_t argmax_prod = static_cast<size_t>(
      std::max_element(mean_mag.begin(), mean_mag.end()) - mean_mag.begin());

  // Oracle: direct Riemann summation per scale, averaged magnitude.
  std::vector<std::complex<double>> row;
  double best = -1.0;
  size_t argmax_oracle = 0;
  for (size_t s = 0; s < spec.scale_grid.size(); ++s) {
    oracle::cwt_row_direct(x.samples, x.fs, spec.scale_grid[s], cfg.beta,
                           cfg.eta, cfg.border, row);
    double mean = 0.0;
    for (const auto& v : row) mean += std::abs(v);
    mean /= static_cast<double>(row.size());
    if (mean > best) {
      best = mean;
      argmax_oracle = s;
    }
  }
  CHECK(argmax_prod == argmax_oracle);

  // Central frequency of the winning bin within one geometric bin of 13 Hz.
  const double f_peak = 1.0 / spec.scale_grid[argmax_prod];
  const double bin_ratio = std::pow(30.0 / 0.5, 1.0 / 31.0);
  CHECK(f_peak <= 13.0 * bin_ratio);
  CHECK(f_peak >= 13.0 / bin_ratio);
}

TEST_CASE("linearity within 1e-9 relative") {
  Rng rng(55);
  cwt::CwtConfig cfg;
  cfg.n_scales = 3;
  cfg.f_min_hz = 2.0;
  cfg.f_max_hz = 20.0;
  cfg.border = 60;
  Signal x, y;
  x.fs = y.fs = 50.0;
  x.samples.resize(220);
  y.samples.resize(220);
  for (double& v : x.samples) v = rng.normal();
  for (double& v : y.samples) v = rng.normal();

  Signal combo;
  combo.fs = 50.0;
  combo.samples.resize(220);
  const double a = 2.5, b = -1.25;
  for (size_t i = 0; i < 220; ++i) {
    combo.samples[i] = a * x.samples[i] + b * y.samples[i];
  }
  const auto sx = cwt::transform(x, cfg);
  const auto sy = cwt::transform(y, cfg);
  const auto sc = cwt::transform(combo, cfg);
  for (size_t i = 0; i < sc.real_plane.size(); ++i) {
    const double want = a * sx.real_plane[i] + b * sy.real_plane[i];
    CHECK(std::fabs(sc.real_plane[i] - want) <=
          1e-9 * std::max(1.0, std::fabs(want)));
    const double want_im = a * sx.imag_plane[i] + b * sy.imag_plane[i];
    CHECK(std::fabs(sc.imag_plane[i] - want_im) <=
          1e-9 * std::max(1.0, std::fabs(want_im)));
  }
}

TEST_CASE("time shift moves rows by the same amount") {
  Rng rng(77);
  cwt::CwtConfig cfg;
  cfg.n_scales = 3;
  cfg.f_min_hz = 2.0;
  cfg.f_max_hz = 20.0;
  cfg.border = 60;
  const int shift = 7;
  std::vector<double> base(400);
  for (double& v : base) v = rng.normal();

  Signal x, shifted;
  x.fs = shifted.fs = 50.0;
  // Same underlying sequence viewed through windows shift samples apart.
  x.samples.assign(base.begin(), base.begin() + 300);
  shifted.samples.assign(base.begin() + shift, base.begin() + 300 + shift);

  const auto sx = cwt::transform(x, cfg);
  const auto ss = cwt::transform(shifted, cfg);
  const int t_len = static_cast<int>(sx.n_samples);
  for (size_t s = 0; s < sx.n_scales(); ++s) {
    for (int t = 0; t + shift < t_len; ++t) {
      const double a = sx.real_at(s, static_cast<size_t>(t + shift));
      const double b = ss.real_at(s, static_cast<size_t>(t));
      CHECK(std::fabs(a - b) <= 1e-9 * std::max(1.0, std::fabs(a)));
    }
  }
}

TEST_CASE("repeated transforms are bitwise identical") {
  Rng rng(5);
  cwt::CwtConfig cfg;
  cfg.n_scales = 8;
  cfg.f_min_hz = 1.0;
  cfg.f_max_hz = 25.0;
  cfg.border = 120;
  Signal x;
  x.fs = 50.0;
  x.samples.resize(500);
  for (double& v : x.samples) v = rng.normal();
  const auto a = cwt::transform(x, cfg);
  const auto b = cwt::transform(x, cfg);
  CHECK(a.real_plane == b.real_plane);
  CHECK(a.imag_plane == b.imag_plane);
}

TEST_CASE("spectrogram dump round trips") {
  Rng rng(13);
  cwt::CwtConfig cfg;
  cfg.n_scales = 3;
  cfg.f_min_hz = 2.0;
  cfg.f_max_hz = 20.0;
  cfg.border = 60;
  Signal x;
  x.fs = 50.0;
  x.samples.resize(200);
  for (double& v : x.samples) v = rng.normal();
  const auto spec = cwt::transform(x, cfg);

  const auto dir = std::filesystem::temp_directory_path() / "red_cwt_test";
  std::filesystem::create_directories(dir);
  cwt::write_spectrogram(dir / "spec.json", spec);
  const auto back = cwt::read_spectrogram(dir / "spec.json");
  CHECK(back.real_plane == spec.real_plane);
  CHECK(back.imag_plane == spec.imag_plane);
  CHECK(back.scale_grid == spec.scale_grid);
  CHECK(back.fs == spec.fs);
}

}  // TEST_SUITE
