#pragma once

#include <cstdint>
#include <vector>

#include "red/tensor.hpp"

namespace red::ad {

// Joint L2 norm clipping over a gradient set: when the norm exceeds g_max
// every gradient is scaled by g_max/norm. Returns the pre-clip norm.
double clip_global_norm(const std::vector<Tensor>& params, double g_max);

// Adam with bias correction. Moments are laid out per parameter; the
// learning rate is mutable so schedules can halve it in place.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  void step();
  void zero_grad();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  int64_t step_count() const { return step_count_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t step_count_{0};
};

}  // namespace red::ad
