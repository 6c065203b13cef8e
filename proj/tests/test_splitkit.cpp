#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "red/rng.hpp"
#include "red/splitkit.hpp"

using namespace red;

namespace {

Signal sine_epoch(double freq, double seconds = 20.0, double rate = 200.0) {
  Signal s;
  s.fs = rate;
  const auto n = static_cast<size_t>(seconds * rate);
  s.samples.resize(n);
  for (size_t j = 0; j < n; ++j) {
    s.samples[j] = std::sin(2.0 * std::numbers::pi * freq * j / rate);
  }
  return s;
}

std::vector<std::array<double, 5>> random_rows(Rng& rng, size_t n) {
  std::vector<std::array<double, 5>> rows(n);
  for (auto& r : rows) {
    for (double& v : r) v = rng.normal();
  }
  split::standardize(rows);
  return rows;
}

}  // namespace

TEST_SUITE("splitkit") {

TEST_CASE("a 10 Hz sine epoch peaks in the (8,12] Hz band") {
  const auto powers = split::band_powers(sine_epoch(10.0));
  REQUIRE(powers.size() == 5);
  const size_t argmax = static_cast<size_t>(
      std::max_element(powers.begin(), powers.end()) - powers.begin());
  CHECK(argmax == 2);
}

TEST_CASE("band powers match the direct-DFT oracle") {
  Rng rng(3);
  Signal epoch;
  epoch.fs = 100.0;
  epoch.samples.resize(400);  // 4 s
  for (double& v : epoch.samples) v = rng.normal();
  const auto powers = split::band_powers(epoch);

  const auto mags = oracle::dft_magnitudes(epoch.samples, epoch.fs,
                                           epoch.samples.size() / 2 + 1);
  const double df = epoch.fs / static_cast<double>(epoch.samples.size());
  for (size_t b = 0; b < split::kBands.size(); ++b) {
    double total = 0.0;
    size_t count = 0;
    for (size_t k = 0; k < mags.size(); ++k) {
      const double f = df * static_cast<double>(k);
      if (f > split::kBands[b].first && f <= split::kBands[b].second) {
        total += mags[k];
        ++count;
      }
    }
    CHECK(powers[b] ==
          doctest::Approx(std::log(total / static_cast<double>(count)))
              .epsilon(1e-9));
  }
}

TEST_CASE("scaling an epoch shifts every band power by log c") {
  Signal epoch = sine_epoch(7.0, 4.0, 100.0);
  Rng rng(5);
  for (double& v : epoch.samples) v += 0.3 * rng.normal();
  const auto base = split::band_powers(epoch);
  Signal scaled = epoch;
  const double c = 3.7;
  for (double& v : scaled.samples) v *= c;
  const auto shifted = split::band_powers(scaled);
  for (size_t b = 0; b < 5; ++b) {
    CHECK(shifted[b] - base[b] == doctest::Approx(std::log(c)).epsilon(1e-9));
  }
}

TEST_CASE("too-short epochs are rejected") {
  CHECK_THROWS_WITH_AS(split::band_powers(sine_epoch(10.0, 0.125, 100.0)),
                       doctest::Contains("band"), Error);
}

TEST_CASE("standardize yields zero mean, unit variance columns") {
  Rng rng(7);
  auto rows = random_rows(rng, 40);
  for (size_t j = 0; j < 5; ++j) {
    double mean = 0.0, var = 0.0;
    for (const auto& r : rows) mean += r[j];
    mean /= static_cast<double>(rows.size());
    for (const auto& r : rows) var += (r[j] - mean) * (r[j] - mean);
    var /= static_cast<double>(rows.size());
    CHECK(std::fabs(mean) < 1e-10);
    CHECK(std::fabs(var - 1.0) < 1e-10);
  }
}

TEST_CASE("RBF kernel has unit diagonal; centered rows sum to zero") {
  Rng rng(9);
  const auto rows = random_rows(rng, 25);
  auto kernel = split::rbf_kernel_matrix(rows, split::kDefaultGamma);
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(kernel[i * rows.size() + i] == 1.0);
  }
  split::double_center(kernel, rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    double row_sum = 0.0;
    for (size_t j = 0; j < rows.size(); ++j) {
      row_sum += kernel[i * rows.size() + j];
    }
    CHECK(std::fabs(row_sum) < 1e-10);
  }
}

TEST_CASE("kpca projection is row-order invariant up to component signs") {
  Rng rng(11);
  const auto rows = random_rows(rng, 20);
  const auto base = split::kpca_project(rows, 0.1);

  std::vector<std::array<double, 5>> shuffled = rows;
  std::vector<size_t> perm(rows.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1],
              perm[static_cast<size_t>(rng.uniform_int(0, int64_t(i) - 1))]);
  }
  for (size_t i = 0; i < perm.size(); ++i) shuffled[i] = rows[perm[i]];
  const auto moved = split::kpca_project(shuffled, 0.1);

  CHECK(moved.eigenvalues[0] ==
        doctest::Approx(base.eigenvalues[0]).epsilon(1e-9));
  CHECK(moved.eigenvalues[1] ==
        doctest::Approx(base.eigenvalues[1]).epsilon(1e-9));
  for (int comp = 0; comp < 2; ++comp) {
    // Determine the sign once per component from the largest entry.
    double sign = 0.0;
    double best = -1.0;
    for (size_t i = 0; i < perm.size(); ++i) {
      const double a = moved.points[i][static_cast<size_t>(comp)];
      const double b = base.points[perm[i]][static_cast<size_t>(comp)];
      if (std::fabs(b) > best) {
        best = std::fabs(b);
        sign = (a * b >= 0) ? 1.0 : -1.0;
      }
    }
    for (size_t i = 0; i < perm.size(); ++i) {
      CHECK(moved.points[i][static_cast<size_t>(comp)] ==
            doctest::Approx(sign * base.points[perm[i]][static_cast<size_t>(comp)])
                .epsilon(1e-6));
    }
  }
}

TEST_CASE("kpca needs standardized input and enough rows") {
  Rng rng(13);
  auto rows = random_rows(rng, 10);
  for (auto& r : rows) r[0] += 5.0;  // break standardization
  CHECK_THROWS_WITH_AS(split::kpca_project(rows, 0.1),
                       doctest::Contains("standardized"), Error);
  CHECK_THROWS_AS(split::kpca_project({}, 0.1), Error);
}

TEST_CASE("gaussian fit on symmetric unit-variance points") {
  const double a = std::sqrt(1.5);  // sample variance (n-1) of 1 per axis
  const auto g = split::fit_gaussian(
      {{a, 0.0}, {-a, 0.0}, {0.0, a}, {0.0, -a}});
  CHECK(g.mean[0] == doctest::Approx(0.0));
  CHECK(g.mean[1] == doctest::Approx(0.0));
  CHECK(g.cov[0][0] == doctest::Approx(1.0));
  CHECK(g.cov[1][1] == doctest::Approx(1.0));
  CHECK(g.cov[0][1] == doctest::Approx(0.0));
}

TEST_CASE("gaussian fit is shift equivariant; degenerate spread rejected") {
  Rng rng(17);
  std::vector<std::array<double, 2>> pts(30);
  for (auto& p : pts) p = {rng.normal(0, 2.0), rng.normal(0, 0.5)};
  const auto g = split::fit_gaussian(pts);
  std::vector<std::array<double, 2>> moved = pts;
  for (auto& p : moved) {
    p[0] += 3.0;
    p[1] -= 1.5;
  }
  const auto g2 = split::fit_gaussian(moved);
  CHECK(g2.mean[0] == doctest::Approx(g.mean[0] + 3.0));
  CHECK(g2.mean[1] == doctest::Approx(g.mean[1] - 1.5));
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(g2.cov[static_cast<size_t>(i)][static_cast<size_t>(j)] ==
            doctest::Approx(g.cov[static_cast<size_t>(i)][static_cast<size_t>(j)])
                .epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(
      split::fit_gaussian({{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}}), Error);
}

TEST_CASE("chi-square 0.95 quantile for 2 dof is 5.991") {
  // Closed form: -2 ln(0.05) = 5.9914645471...
  CHECK(std::fabs(split::chi2_quantile_2dof(0.95) - 5.991) < 1e-3);
  CHECK(split::chi2_quantile_2dof(0.95) ==
        doctest::Approx(5.9914645471079817).epsilon(1e-12));
}

TEST_CASE("rotating the points rotates the ellipse, axes unchanged") {
  Rng rng(19);
  std::vector<std::array<double, 2>> pts(60);
  for (auto& p : pts) p = {rng.normal(0, 3.0), rng.normal(0, 1.0)};
  const auto e1 = split::ellipse_95(split::fit_gaussian(pts));

  const double theta = 0.7;
  std::vector<std::array<double, 2>> rotated(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    rotated[i] = {std::cos(theta) * pts[i][0] - std::sin(theta) * pts[i][1],
                  std::sin(theta) * pts[i][0] + std::cos(theta) * pts[i][1]};
  }
  const auto e2 = split::ellipse_95(split::fit_gaussian(rotated));
  CHECK(e2.semi_axes[0] == doctest::Approx(e1.semi_axes[0]).epsilon(1e-9));
  CHECK(e2.semi_axes[1] == doctest::Approx(e1.semi_axes[1]).epsilon(1e-9));
  double diff = e2.rotation_rad - e1.rotation_rad - theta;
  while (diff > std::numbers::pi / 2) diff -= std::numbers::pi;
  while (diff < -std::numbers::pi / 2) diff += std::numbers::pi;
  CHECK(std::fabs(diff) < 1e-6);
}

}  // TEST_SUITE
