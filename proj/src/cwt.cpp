#include "red/cwt.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "red/threading.hpp"

namespace red::cwt {

void CwtConfig::validate() const {
  if (!(0.0 < f_min_hz && f_min_hz < f_max_hz)) {
    throw Error("cwt: need 0 < f_min < f_max, got [" +
                std::to_string(f_min_hz) + ", " + std::to_string(f_max_hz) +
                "]");
  }
  if (n_scales < 2) throw Error("cwt: need at least 2 scales");
  if (!(beta > 0.0)) throw Error("cwt: wavelet width beta must be positive");
  if (!(eta >= 1.0)) throw Error("cwt: support factor eta must be >= 1");
  if (border < 0) throw Error("cwt: border must be >= 0");
}

std::vector<double> scale_grid(const CwtConfig& config) {
  config.validate();
  const int n = config.n_scales;
  const double s_first = 1.0 / config.f_max_hz;
  const double s_last = 1.0 / config.f_min_hz;
  const double ratio = std::pow(s_last / s_first, 1.0 / (n - 1));
  std::vector<double> scales(n);
  for (int i = 0; i < n; ++i) scales[i] = s_first * std::pow(ratio, i);
  scales.front() = s_first;
  scales.back() = s_last;
  return scales;
}

int kernel_half_width(double scale, double beta, double eta, double fs) {
  return static_cast<int>(
      std::floor(eta * scale * std::sqrt(4.5 * beta) * fs));
}

std::vector<std::complex<double>> morlet_kernel_fixed_support(double scale,
                                                              double beta,
                                                              int half_width,
                                                              double fs) {
  std::vector<std::complex<double>> kernel(2 * half_width + 1);
  for (int k = -half_width; k <= half_width; ++k) {
    const double t = static_cast<double>(k) / fs;
    const double envelope = std::exp(-t * t / (beta * scale * scale));
    const double phase = 2.0 * std::numbers::pi * t / scale;
    kernel[k + half_width] = std::complex<double>(
        envelope * std::cos(phase), envelope * std::sin(phase));
  }
  return kernel;
}

std::vector<std::complex<double>> morlet_kernel(double scale, double beta,
                                                double eta, double fs) {
  if (!(scale > 0 && beta > 0 && eta > 0 && fs > 0)) {
    throw Error("morlet_kernel: scale, beta, eta, fs must be positive");
  }
  return morlet_kernel_fixed_support(scale, beta,
                                     kernel_half_width(scale, beta, eta, fs),
                                     fs);
}

Spectrogram transform(const Signal& padded_segment, const CwtConfig& config) {
  config.validate();
  validate_signal(padded_segment, "cwt input");
  const int total = static_cast<int>(padded_segment.samples.size());
  const int border = config.border;
  if (total <= 2 * border) {
    throw Error("cwt: segment of " + std::to_string(total) +
                " samples leaves nothing after dropping 2*" +
                std::to_string(border) + " border samples");
  }
  const int t_len = total - 2 * border;
  const double fs = padded_segment.fs;

  Spectrogram spec;
  spec.scale_grid = scale_grid(config);
  spec.n_samples = static_cast<size_t>(t_len);
  spec.fs = fs;

  const int widest =
      kernel_half_width(spec.scale_grid.back(), config.beta, config.eta, fs);
  if (widest > border) {
    throw Error("cwt: border of " + std::to_string(border) +
                " samples cannot hold the widest kernel; need T_B >= " +
                std::to_string(widest));
  }

  const int n_scales = static_cast<int>(spec.scale_grid.size());
  spec.real_plane.assign(static_cast<size_t>(n_scales) * t_len, 0.0);
  spec.imag_plane.assign(static_cast<size_t>(n_scales) * t_len, 0.0);

  const double* x = padded_segment.samples.data();
  const double inv_fs = 1.0 / fs;

  parallel_for(n_scales, [&](int row) {
    const double s = spec.scale_grid[row];
    const int half = kernel_half_width(s, config.beta, config.eta, fs);
    const auto kernel =
        morlet_kernel_fixed_support(s, config.beta, half, fs);
    double* re = spec.real_plane.data() + static_cast<size_t>(row) * t_len;
    double* im = spec.imag_plane.data() + static_cast<size_t>(row) * t_len;
    // CWT[x](s,t) = integral x(tau) conj(psi_s)(t - tau) dtau. With the even
    // envelope this is a correlation against psi_s itself; dtau = 1/fs.
    for (int t = 0; t < t_len; ++t) {
      const int center = t + border;
      double acc_re = 0.0, acc_im = 0.0;
      for (int u = -half; u <= half; ++u) {
        const double xv = x[center + u];
        const std::complex<double>& kv = kernel[u + half];
        acc_re += xv * kv.real();
        acc_im += xv * kv.imag();
      }
      re[t] = acc_re * inv_fs;
      im[t] = acc_im * inv_fs;
    }
  });
  return spec;
}

void write_spectrogram(const std::filesystem::path& json_path,
                       const Spectrogram& spec) {
  const auto bin_path = std::filesystem::path(json_path).replace_extension(
      ".planes");
  nlohmann::json j;
  j["planes"] = bin_path.filename().string();
  j["n_scales"] = spec.n_scales();
  j["n_samples"] = spec.n_samples;
  j["fs"] = spec.fs;
  j["scale_grid"] = spec.scale_grid;
  std::ofstream out(json_path, std::ios::binary);
  if (!out) throw Error("cannot write " + json_path.string());
  out << j.dump(2) << "\n";

  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error("cannot write " + bin_path.string());
  bin.write(reinterpret_cast<const char*>(spec.real_plane.data()),
            static_cast<std::streamsize>(spec.real_plane.size() * 8));
  bin.write(reinterpret_cast<const char*>(spec.imag_plane.data()),
            static_cast<std::streamsize>(spec.imag_plane.size() * 8));
}

Spectrogram read_spectrogram(const std::filesystem::path& json_path) {
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw Error("cannot open " + json_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(json_path.string() + ": " + e.what());
  }
  Spectrogram spec;
  spec.n_samples = j.at("n_samples").get<size_t>();
  spec.fs = j.at("fs").get<double>();
  spec.scale_grid = j.at("scale_grid").get<std::vector<double>>();
  const size_t plane = spec.scale_grid.size() * spec.n_samples;
  const auto bin_path =
      json_path.parent_path() / j.at("planes").get<std::string>();
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error("cannot open " + bin_path.string());
  spec.real_plane.resize(plane);
  spec.imag_plane.resize(plane);
  bin.read(reinterpret_cast<char*>(spec.real_plane.data()),
           static_cast<std::streamsize>(plane * 8));
  bin.read(reinterpret_cast<char*>(spec.imag_plane.data()),
           static_cast<std::streamsize>(plane * 8));
  if (!bin) throw Error(bin_path.string() + ": truncated planes");
  return spec;
}

}  // namespace red::cwt
