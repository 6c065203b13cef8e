#pragma once

#include "red/rng.hpp"
#include "red/tensor.hpp"

// Layer primitives. Layouts are channel-last: 1D activations are
// (B, T, C), 2D activations are (B, F, T, C) with F the frequency rows.
namespace red::ad {

enum class Mode { train, infer };
enum class PoolKind { avg, max };

// 1D convolution, kernel size 3, zero padding, same output length.
struct Conv1d {
  Tensor w;  // (k, C_in, C_out)
  Tensor b;  // (C_out)
  int c_in{0}, c_out{0}, k{3};

  Conv1d() = default;
  Conv1d(int c_in, int c_out, Rng& rng);
  Tensor forward(const Tensor& x) const;  // (B, T, C_in) -> (B, T, C_out)
};

// 2D convolution, 3x3 kernel, zero padding on both spatial axes.
struct Conv2d {
  Tensor w;  // (kf, kt, C_in, C_out)
  Tensor b;  // (C_out)
  int c_in{0}, c_out{0}, kf{3}, kt{3};

  Conv2d() = default;
  Conv2d(int c_in, int c_out, Rng& rng);
  Tensor forward(const Tensor& x) const;  // (B, F, T, C_in) -> (B, F, T, C_out)
};

// Kernel-size-1 convolution: a dense layer with weights shared across time.
struct PointwiseDense {
  Tensor w;  // (C_in, C_out)
  Tensor b;  // (C_out)
  int c_in{0}, c_out{0};

  PointwiseDense() = default;
  PointwiseDense(int c_in, int c_out, Rng& rng);
  Tensor forward(const Tensor& x) const;  // (..., C_in) -> (..., C_out)
};

// Batch normalization. A feature is either the channel axis or, for the
// frequency-specific variant, the (frequency, channel) pair; statistics are
// taken over the remaining axes. Training uses batch statistics and updates
// exponential moving averages used at inference.
struct BatchNorm {
  enum class Features { channels, freq_channels };

  Tensor gamma;  // (n_features)
  Tensor shift;  // (n_features)
  Tensor running_mean, running_var;  // buffers, not optimized
  Features features{Features::channels};
  int n_features{0};
  double momentum{0.99};
  double eps{1e-12};

  BatchNorm() = default;
  BatchNorm(int n_features, Features features = Features::channels);
  Tensor forward(const Tensor& x, Mode mode);
};

// Pooling of size 2 over the time axis.
Tensor pool1d(const Tensor& x, PoolKind kind);       // (B, T, C) -> (B, T/2, C)
Tensor pool2d_time(const Tensor& x, PoolKind kind);  // (B, F, T, C) -> (B, F, T/2, C)

// Unidirectional LSTM. Standard gates (input, forget, output, tanh
// candidate), zero initial state, forget-gate bias initialized to 1.
struct Lstm {
  Tensor w_x;   // (C_in, 4H), gate column order [i, f, g, o]
  Tensor w_h;   // (H, 4H)
  Tensor bias;  // (4H)
  int c_in{0}, hidden{0};

  Lstm() = default;
  Lstm(int c_in, int hidden, Rng& rng);
  // (B, T, C_in) -> (B, T, H). With reverse_time the sequence is processed
  // from the last step to the first; outputs stay in input order.
  Tensor forward(const Tensor& x, bool reverse_time = false) const;
};

// Inverted dropout: zeroes with probability rate and scales survivors by
// 1/(1-rate) at training; identity at inference.
Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng);

Tensor relu(const Tensor& x);

// Softmax over the last axis.
Tensor softmax(const Tensor& x);

// Concatenates along the last (channel) axis.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// (B, F, T, C) -> (B, T, F*C): folds the frequency axis into channels.
Tensor flatten_freq(const Tensor& x);

// Mean over all rows of -log p[row, label]. probs has shape (..., n_classes)
// with one label per row; probabilities are clamped at 1e-12.
Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels);

}  // namespace red::ad
