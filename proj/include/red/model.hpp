#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "red/checkpoint.hpp"
#include "red/layers.hpp"
#include "red/optim.hpp"
#include "red/rng.hpp"

// The two detector architectures: a time-domain variant working directly on
// the signal segment and a CWT variant working on a trainable-width complex
// Morlet spectrogram. Both emit one (background, event) probability pair
// every eight input samples.
namespace red::model {

enum class Variant { time, cwt };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ModelConfig {
  Variant variant{Variant::time};
  int t_samples{4000};         // T, divisible by 8
  int border{1000};            // T_B context samples per side (cwt only)
  int channels{1};             // C
  int n_filters{64};           // N_f (64 for time, 32 for cwt)
  int n_scales{32};            // N_s
  double beta_init{0.5};
  double eta{1.5};
  int lstm_units{256};         // N_1 per direction
  int classifier_hidden{128};  // N_2
  double drop1{0.2};           // rho_1
  double drop2{0.5};           // rho_2
  ad::PoolKind pooling{ad::PoolKind::avg};
  double fs{200.0};
  double f_min_hz{0.5};
  double f_max_hz{30.0};

  static ModelConfig defaults(Variant v);
  void validate() const;

  int input_len() const {
    return variant == Variant::cwt ? t_samples + 2 * border : t_samples;
  }
  int output_len() const { return t_samples / 8; }
};

void write_model_config(const std::filesystem::path& path,
                        const ModelConfig& config);
ModelConfig read_model_config(const std::filesystem::path& path);
ModelConfig model_config_from_json(const std::string& json_text);

// Morlet spectrogram front end with trainable width. The truncated support
// of every kernel is fixed at construction from beta_init; the envelope is
// recomputed from the current width each forward pass.
struct CwtFrontEnd {
  ad::Tensor log_beta;  // scalar; width stays positive via exp
  std::vector<double> scales;
  std::vector<int> half_widths;
  double fs{0.0};
  int t_out{0};
  int border{0};

  CwtFrontEnd() = default;
  CwtFrontEnd(const ModelConfig& config);
  double beta() const { return std::exp(log_beta.data()[0]); }
  // (B, T + 2*T_B, 1) -> (B, N_s, T, 2) with channels (real, imag).
  ad::Tensor forward(const ad::Tensor& x) const;
};

class Network {
 public:
  Network(const ModelConfig& config, uint64_t seed);

  // Segment rows of length input_len(); returns (B, T/8, 2) probabilities.
  ad::Tensor forward(const ad::Tensor& segment, ad::Mode mode);

  const ModelConfig& config() const { return cfg_; }
  int input_len() const { return cfg_.input_len(); }
  int output_len() const { return cfg_.output_len(); }
  double beta() const;

  std::vector<ad::Tensor> trainable_params();
  // Trainable parameters plus batchnorm running statistics, stable order.
  std::vector<ad::NamedParam> named_state();
  void copy_state_from(Network& other);

  void save(const std::filesystem::path& path, int64_t step);
  int64_t load(const std::filesystem::path& path);

 private:
  struct Block1d {
    ad::Conv1d conv1, conv2;
    ad::BatchNorm bn1, bn2;
  };
  struct Block2d {
    ad::Conv2d conv1, conv2;
    ad::BatchNorm bn1, bn2;
  };

  ModelConfig cfg_;
  Rng dropout_rng_;
  CwtFrontEnd front_;
  ad::BatchNorm input_bn_;
  std::vector<Block1d> blocks1d_;
  std::vector<Block2d> blocks2d_;
  ad::Lstm lstm1_fwd_, lstm1_bwd_, lstm2_fwd_, lstm2_bwd_;
  ad::PointwiseDense hidden_, logits_;
};

}  // namespace red::model
