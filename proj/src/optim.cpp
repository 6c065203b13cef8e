#include "red/optim.hpp"

#include <cmath>

namespace red::ad {

double clip_global_norm(const std::vector<Tensor>& params, double g_max) {
  if (!(g_max > 0.0)) throw Error("clip_global_norm: g_max must be positive");
  double sq = 0.0;
  for (const Tensor& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > g_max) {
    const double scale = g_max / norm;
    for (const Tensor& p : params) {
      if (!p.has_grad()) continue;
      Tensor t = p;
      double* g = t.grad_data();
      for (size_t i = 0; i < t.size(); ++i) g[i] *= scale;
    }
  }
  return norm;
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = params_[pi];
    const bool has_grad = p.has_grad();
    double* values = p.data();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (size_t i = 0; i < p.size(); ++i) {
      const double g = has_grad ? p.grad()[i] : 0.0;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      values[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace red::ad
