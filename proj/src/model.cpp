#include "red/model.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "red/cwt.hpp"
#include "red/threading.hpp"

namespace red::model {

std::string to_string(Variant v) {
  return v == Variant::time ? "time" : "cwt";
}

Variant variant_from_string(const std::string& s) {
  if (s == "time") return Variant::time;
  if (s == "cwt") return Variant::cwt;
  throw Error("unknown variant '" + s + "' (expected time|cwt)");
}

ModelConfig ModelConfig::defaults(Variant v) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.n_filters = (v == Variant::cwt) ? 32 : 64;
  return cfg;
}

void ModelConfig::validate() const {
  if (t_samples <= 0 || t_samples % 8 != 0) {
    throw Error("model: T must be positive and divisible by 8, got " +
                std::to_string(t_samples));
  }
  if (channels != 1) {
    throw Error("model: only the single-channel case is supported, got C=" +
                std::to_string(channels));
  }
  if (n_filters <= 0 || lstm_units <= 0 || classifier_hidden <= 0) {
    throw Error("model: filter, LSTM and classifier sizes must be positive");
  }
  if (drop1 < 0 || drop1 >= 1 || drop2 < 0 || drop2 >= 1) {
    throw Error("model: dropout rates must lie in [0, 1)");
  }
  if (variant == Variant::cwt) {
    if (n_scales < 2) throw Error("model: cwt variant needs at least 2 scales");
    if (!(beta_init > 0)) throw Error("model: beta_init must be positive");
    if (!(eta >= 1)) throw Error("model: eta must be >= 1");
    cwt::CwtConfig cw;
    cw.f_min_hz = f_min_hz;
    cw.f_max_hz = f_max_hz;
    cw.n_scales = n_scales;
    cw.beta = beta_init;
    cw.eta = eta;
    const double widest_scale = 1.0 / f_min_hz;
    const int need = cwt::kernel_half_width(widest_scale, beta_init, eta, fs);
    if (need > border) {
      throw Error("model: border of " + std::to_string(border) +
                  " samples cannot hold the widest wavelet; need T_B >= " +
                  std::to_string(need));
    }
  }
  if (!(fs > 0)) throw Error("model: fs must be positive");
}

void write_model_config(const std::filesystem::path& path,
                        const ModelConfig& config) {
  nlohmann::json j;
  j["variant"] = to_string(config.variant);
  j["T"] = config.t_samples;
  j["T_B"] = config.border;
  j["C"] = config.channels;
  j["N_f"] = config.n_filters;
  j["N_s"] = config.n_scales;
  j["beta_init"] = config.beta_init;
  j["eta"] = config.eta;
  j["N_1"] = config.lstm_units;
  j["N_2"] = config.classifier_hidden;
  j["rho_1"] = config.drop1;
  j["rho_2"] = config.drop2;
  j["pooling"] = config.pooling == ad::PoolKind::avg ? "avg" : "max";
  j["fs"] = config.fs;
  j["f_min"] = config.f_min_hz;
  j["f_max"] = config.f_max_hz;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

ModelConfig model_config_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("model config: ") + e.what());
  }
  const Variant v =
      variant_from_string(j.value("variant", std::string("time")));
  ModelConfig cfg = ModelConfig::defaults(v);
  cfg.t_samples = j.value("T", cfg.t_samples);
  cfg.border = j.value("T_B", cfg.border);
  cfg.channels = j.value("C", cfg.channels);
  cfg.n_filters = j.value("N_f", cfg.n_filters);
  cfg.n_scales = j.value("N_s", cfg.n_scales);
  cfg.beta_init = j.value("beta_init", cfg.beta_init);
  cfg.eta = j.value("eta", cfg.eta);
  cfg.lstm_units = j.value("N_1", cfg.lstm_units);
  cfg.classifier_hidden = j.value("N_2", cfg.classifier_hidden);
  cfg.drop1 = j.value("rho_1", cfg.drop1);
  cfg.drop2 = j.value("rho_2", cfg.drop2);
  if (j.contains("pooling")) {
    const std::string p = j["pooling"].get<std::string>();
    if (p == "avg") {
      cfg.pooling = ad::PoolKind::avg;
    } else if (p == "max") {
      cfg.pooling = ad::PoolKind::max;
    } else {
      throw Error("model config: pooling must be avg|max, got '" + p + "'");
    }
  }
  cfg.fs = j.value("fs", cfg.fs);
  cfg.f_min_hz = j.value("f_min", cfg.f_min_hz);
  cfg.f_max_hz = j.value("f_max", cfg.f_max_hz);
  cfg.validate();
  return cfg;
}

ModelConfig read_model_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return model_config_from_json(text);
}

// ---------------------------------------------------------- CwtFrontEnd

CwtFrontEnd::CwtFrontEnd(const ModelConfig& config)
    : fs(config.fs), t_out(config.t_samples), border(config.border) {
  cwt::CwtConfig cw;
  cw.f_min_hz = config.f_min_hz;
  cw.f_max_hz = config.f_max_hz;
  cw.n_scales = config.n_scales;
  cw.beta = config.beta_init;
  cw.eta = config.eta;
  cw.border = config.border;
  scales = cwt::scale_grid(cw);
  half_widths.reserve(scales.size());
  for (double s : scales) {
    half_widths.push_back(
        cwt::kernel_half_width(s, config.beta_init, config.eta, fs));
  }
  log_beta = ad::Tensor::from({1}, {std::log(config.beta_init)}, true);
}

ad::Tensor CwtFrontEnd::forward(const ad::Tensor& x) const {
  const int total = t_out + 2 * border;
  if (x.ndim() != 3 || x.dim(1) != total || x.dim(2) != 1) {
    throw Error("cwt front end: expected input (B, " + std::to_string(total) +
                ", 1), got " + ad::shape_str(x.shape()));
  }
  const int batch = x.dim(0);
  const int n_scales = static_cast<int>(scales.size());
  const double beta_now = beta();
  const double inv_fs = 1.0 / fs;

  std::vector<std::vector<std::complex<double>>> kernels(n_scales);
  for (int i = 0; i < n_scales; ++i) {
    kernels[i] = cwt::morlet_kernel_fixed_support(scales[i], beta_now,
                                                  half_widths[i], fs);
  }

  std::vector<double> out(size_t(batch) * n_scales * t_out * 2);
  const double* xv = x.data();
  const int t_len = t_out, b_pad = border;
  parallel_for(batch * n_scales, [&](int task) {
    const int bi = task / n_scales;
    const int row = task % n_scales;
    const int half = half_widths[row];
    const auto& kernel = kernels[row];
    const double* xb = xv + size_t(bi) * total;
    double* yb = out.data() + ((size_t(bi) * n_scales + row) * t_len) * 2;
    for (int t = 0; t < t_len; ++t) {
      const double* xc = xb + b_pad + t;
      double acc_re = 0.0, acc_im = 0.0;
      for (int u = -half; u <= half; ++u) {
        const double v = xc[u];
        acc_re += v * kernel[u + half].real();
        acc_im += v * kernel[u + half].imag();
      }
      yb[2 * t] = acc_re * inv_fs;
      yb[2 * t + 1] = acc_im * inv_fs;
    }
  });

  auto lb = log_beta;
  const auto scales_c = scales;
  const auto half_widths_c = half_widths;
  const double fs_c = fs;
  return ad::make_op(
      {batch, n_scales, t_len, 2}, std::move(out), {x, lb},
      [batch, n_scales, t_len, b_pad, total, scales_c, half_widths_c, fs_c,
       beta_now, inv_fs](ad::Node& self) {
        auto& xn = self.parents[0];
        auto& lbn = self.parents[1];
        const double* xv = xn->values.data();
        // d(psi)/d(beta) = psi * t^2/(beta^2 s^2); one extra correlation per
        // row yields dL/dbeta, accumulated in fixed row order.
        std::vector<double> partial(size_t(batch) * n_scales, 0.0);
        parallel_for(batch * n_scales, [&](int task) {
          const int bi = task / n_scales;
          const int row = task % n_scales;
          const double s = scales_c[row];
          const int half = half_widths_c[row];
          const auto kernel = cwt::morlet_kernel_fixed_support(
              s, beta_now, half, fs_c);
          const double* xb = xv + size_t(bi) * total;
          const double* dyb =
              self.grad.data() + ((size_t(bi) * n_scales + row) * t_len) * 2;
          const double denom = 1.0 / (beta_now * beta_now * s * s);
          double acc = 0.0;
          for (int t = 0; t < t_len; ++t) {
            const double* xc = xb + b_pad + t;
            double d_re = 0.0, d_im = 0.0;
            for (int u = -half; u <= half; ++u) {
              const double tu = static_cast<double>(u) / fs_c;
              const double w = tu * tu * denom;
              const double v = xc[u] * w;
              d_re += v * kernel[u + half].real();
              d_im += v * kernel[u + half].imag();
            }
            acc += dyb[2 * t] * d_re * inv_fs + dyb[2 * t + 1] * d_im * inv_fs;
          }
          partial[task] = acc;
        });
        double dbeta = 0.0;
        for (double p : partial) dbeta += p;
        lbn->grad_data()[0] += dbeta * beta_now;  // d(beta)/d(log beta)

        if (xn->requires_grad) {
          double* dx = xn->grad_data();
          for (int bi = 0; bi < batch; ++bi) {
            for (int row = 0; row < n_scales; ++row) {
              const int half = half_widths_c[row];
              const auto kernel = cwt::morlet_kernel_fixed_support(
                  scales_c[row], beta_now, half, fs_c);
              const double* dyb =
                  self.grad.data() +
                  ((size_t(bi) * n_scales + row) * t_len) * 2;
              double* dxb = dx + size_t(bi) * total;
              for (int t = 0; t < t_len; ++t) {
                const double g_re = dyb[2 * t] * inv_fs;
                const double g_im = dyb[2 * t + 1] * inv_fs;
                double* dxc = dxb + b_pad + t;
                for (int u = -half; u <= half; ++u) {
                  dxc[u] += g_re * kernel[u + half].real() +
                            g_im * kernel[u + half].imag();
                }
              }
            }
          }
        }
      });
}

// --------------------------------------------------------------- Network

Network::Network(const ModelConfig& config, uint64_t seed)
    : cfg_(config), dropout_rng_(seed ^ 0x6d726f7064726f70ULL) {
  cfg_.validate();
  Rng init_rng(seed);

  int lstm_in = 0;
  if (cfg_.variant == Variant::cwt) {
    front_ = CwtFrontEnd(cfg_);
    input_bn_ = ad::BatchNorm(cfg_.n_scales * 2 * cfg_.channels,
                              ad::BatchNorm::Features::freq_channels);
    int c_in = 2 * cfg_.channels;
    for (int i = 0; i < 3; ++i) {
      const int f = cfg_.n_filters << i;
      Block2d block;
      block.conv1 = ad::Conv2d(c_in, f, init_rng);
      block.bn1 = ad::BatchNorm(f);
      block.conv2 = ad::Conv2d(f, f, init_rng);
      block.bn2 = ad::BatchNorm(f);
      blocks2d_.push_back(std::move(block));
      c_in = f;
    }
    lstm_in = cfg_.n_scales * c_in;
  } else {
    input_bn_ = ad::BatchNorm(cfg_.channels);
    int c_in = cfg_.channels;
    for (int i = 0; i < 3; ++i) {
      const int f = cfg_.n_filters << i;
      Block1d block;
      block.conv1 = ad::Conv1d(c_in, f, init_rng);
      block.bn1 = ad::BatchNorm(f);
      block.conv2 = ad::Conv1d(f, f, init_rng);
      block.bn2 = ad::BatchNorm(f);
      blocks1d_.push_back(std::move(block));
      c_in = f;
    }
    lstm_in = c_in;
  }

  lstm1_fwd_ = ad::Lstm(lstm_in, cfg_.lstm_units, init_rng);
  lstm1_bwd_ = ad::Lstm(lstm_in, cfg_.lstm_units, init_rng);
  lstm2_fwd_ = ad::Lstm(2 * cfg_.lstm_units, cfg_.lstm_units, init_rng);
  lstm2_bwd_ = ad::Lstm(2 * cfg_.lstm_units, cfg_.lstm_units, init_rng);
  hidden_ = ad::PointwiseDense(2 * cfg_.lstm_units, cfg_.classifier_hidden,
                               init_rng);
  logits_ = ad::PointwiseDense(cfg_.classifier_hidden, 2, init_rng);
}

double Network::beta() const {
  if (cfg_.variant != Variant::cwt) {
    throw Error("beta() is only defined for the cwt variant");
  }
  return front_.beta();
}

ad::Tensor Network::forward(const ad::Tensor& segment, ad::Mode mode) {
  const int want = input_len();
  if (segment.ndim() != 3 || segment.dim(1) != want ||
      segment.dim(2) != cfg_.channels) {
    throw Error("forward: expected segment (B, " + std::to_string(want) +
                ", " + std::to_string(cfg_.channels) + "), got " +
                ad::shape_str(segment.shape()));
  }

  ad::Tensor h;
  if (cfg_.variant == Variant::cwt) {
    h = front_.forward(segment);
    h = input_bn_.forward(h, mode);
    for (auto& block : blocks2d_) {
      h = ad::relu(block.bn1.forward(block.conv1.forward(h), mode));
      h = ad::relu(block.bn2.forward(block.conv2.forward(h), mode));
      h = ad::pool2d_time(h, cfg_.pooling);
    }
    h = ad::flatten_freq(h);
  } else {
    h = input_bn_.forward(segment, mode);
    for (auto& block : blocks1d_) {
      h = ad::relu(block.bn1.forward(block.conv1.forward(h), mode));
      h = ad::relu(block.bn2.forward(block.conv2.forward(h), mode));
      h = ad::pool1d(h, cfg_.pooling);
    }
  }

  h = ad::dropout(h, cfg_.drop1, mode, dropout_rng_);
  h = ad::concat_channels(lstm1_fwd_.forward(h, false),
                          lstm1_bwd_.forward(h, true));
  h = ad::dropout(h, cfg_.drop2, mode, dropout_rng_);
  h = ad::concat_channels(lstm2_fwd_.forward(h, false),
                          lstm2_bwd_.forward(h, true));
  h = ad::dropout(h, cfg_.drop2, mode, dropout_rng_);
  h = ad::relu(hidden_.forward(h));
  return ad::softmax(logits_.forward(h));
}

std::vector<ad::NamedParam> Network::named_state() {
  std::vector<ad::NamedParam> state;
  auto add = [&state](const std::string& name, const ad::Tensor& t) {
    state.push_back({name, t});
  };
  auto add_bn = [&add](const std::string& prefix, ad::BatchNorm& bn) {
    add(prefix + ".gamma", bn.gamma);
    add(prefix + ".shift", bn.shift);
    add(prefix + ".running_mean", bn.running_mean);
    add(prefix + ".running_var", bn.running_var);
  };
  auto add_lstm = [&add](const std::string& prefix, ad::Lstm& lstm) {
    add(prefix + ".w_x", lstm.w_x);
    add(prefix + ".w_h", lstm.w_h);
    add(prefix + ".bias", lstm.bias);
  };

  if (cfg_.variant == Variant::cwt) add("frontend.log_beta", front_.log_beta);
  add_bn("input_bn", input_bn_);
  for (size_t i = 0; i < blocks1d_.size(); ++i) {
    const std::string p = "block" + std::to_string(i);
    add(p + ".conv1.w", blocks1d_[i].conv1.w);
    add(p + ".conv1.b", blocks1d_[i].conv1.b);
    add_bn(p + ".bn1", blocks1d_[i].bn1);
    add(p + ".conv2.w", blocks1d_[i].conv2.w);
    add(p + ".conv2.b", blocks1d_[i].conv2.b);
    add_bn(p + ".bn2", blocks1d_[i].bn2);
  }
  for (size_t i = 0; i < blocks2d_.size(); ++i) {
    const std::string p = "block" + std::to_string(i);
    add(p + ".conv1.w", blocks2d_[i].conv1.w);
    add(p + ".conv1.b", blocks2d_[i].conv1.b);
    add_bn(p + ".bn1", blocks2d_[i].bn1);
    add(p + ".conv2.w", blocks2d_[i].conv2.w);
    add(p + ".conv2.b", blocks2d_[i].conv2.b);
    add_bn(p + ".bn2", blocks2d_[i].bn2);
  }
  add_lstm("blstm1.fwd", lstm1_fwd_);
  add_lstm("blstm1.bwd", lstm1_bwd_);
  add_lstm("blstm2.fwd", lstm2_fwd_);
  add_lstm("blstm2.bwd", lstm2_bwd_);
  add("classifier.hidden.w", hidden_.w);
  add("classifier.hidden.b", hidden_.b);
  add("classifier.logits.w", logits_.w);
  add("classifier.logits.b", logits_.b);
  return state;
}

std::vector<ad::Tensor> Network::trainable_params() {
  std::vector<ad::Tensor> params;
  for (auto& [name, tensor] : named_state()) {
    if (tensor.requires_grad()) params.push_back(tensor);
  }
  return params;
}

void Network::copy_state_from(Network& other) {
  auto dst = named_state();
  auto src = other.named_state();
  if (dst.size() != src.size()) {
    throw Error("copy_state_from: incompatible networks");
  }
  for (size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != src[i].name ||
        dst[i].tensor.size() != src[i].tensor.size()) {
      throw Error("copy_state_from: mismatch at '" + dst[i].name + "'");
    }
    dst[i].tensor.values() = src[i].tensor.values();
  }
}

void Network::save(const std::filesystem::path& path, int64_t step) {
  const auto state = named_state();
  ad::save_checkpoint(path, state, step);
}

int64_t Network::load(const std::filesystem::path& path) {
  auto state = named_state();
  return ad::load_checkpoint(path, state);
}

}  // namespace red::model
