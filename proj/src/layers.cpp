#include "red/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace red::ad {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using StrideMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using CStrideMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

double init_bound(int fan_in) { return 1.0 / std::sqrt(double(fan_in)); }

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(numel(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(v), true);
}

void expect(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Gathers x rows [t0, t0+len) shifted by `offset` into columns
// [col0, col0+c) of the patch matrix; rows outside [0, t) stay zero.
void im2col_1d(CMapMat x, MapMat patches, int t_len, int c, int offset,
               int col0) {
  const int lo = std::max(0, -offset);
  const int hi = std::min(t_len, t_len - offset);
  if (hi > lo) {
    patches.block(lo, col0, hi - lo, c) = x.block(lo + offset, 0, hi - lo, c);
  }
}

void col2im_1d(MapMat dx, CMapMat dpatches, int t_len, int c, int offset,
               int col0) {
  const int lo = std::max(0, -offset);
  const int hi = std::min(t_len, t_len - offset);
  if (hi > lo) {
    dx.block(lo + offset, 0, hi - lo, c) += dpatches.block(lo, col0, hi - lo, c);
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(int c_in_, int c_out_, Rng& rng) : c_in(c_in_), c_out(c_out_) {
  const double bound = init_bound(c_in * k);
  w = uniform_tensor({k, c_in, c_out}, bound, rng);
  b = Tensor::zeros({c_out}, true);
}

Tensor Conv1d::forward(const Tensor& x) const {
  expect(x.ndim() == 3 && x.dim(2) == c_in,
         "conv1d: expected input (B, T, " + std::to_string(c_in) + "), got " +
             shape_str(x.shape()));
  const int batch = x.dim(0), t_len = x.dim(1);
  const int kk = k, ci = c_in, co = c_out;

  std::vector<double> out(size_t(batch) * t_len * co);
  RowMat patches = RowMat::Zero(t_len, kk * ci);
  CMapMat wmat(w.data(), kk * ci, co);
  Eigen::Map<const Eigen::RowVectorXd> bias(b.data(), co);
  for (int bi = 0; bi < batch; ++bi) {
    CMapMat xi(x.data() + size_t(bi) * t_len * ci, t_len, ci);
    for (int d = 0; d < kk; ++d) {
      im2col_1d(xi, MapMat(patches.data(), t_len, kk * ci), t_len, ci,
                d - kk / 2, d * ci);
    }
    MapMat yi(out.data() + size_t(bi) * t_len * co, t_len, co);
    yi.noalias() = patches * wmat;
    yi.rowwise() += bias;
  }

  auto wt = w;
  auto bt = b;
  return make_op(
      {batch, t_len, co}, std::move(out), {x, wt, bt},
      [batch, t_len, kk, ci, co](Node& self) {
        auto& xn = self.parents[0];
        auto& wn = self.parents[1];
        auto& bn = self.parents[2];
        RowMat patches = RowMat::Zero(t_len, kk * ci);
        RowMat dpatches(t_len, kk * ci);
        MapMat dw(wn->grad_data(), kk * ci, co);
        Eigen::Map<Eigen::RowVectorXd> db(bn->grad_data(), co);
        CMapMat wmat(wn->values.data(), kk * ci, co);
        for (int bi = 0; bi < batch; ++bi) {
          CMapMat xi(xn->values.data() + size_t(bi) * t_len * ci, t_len, ci);
          CMapMat dyi(self.grad.data() + size_t(bi) * t_len * co, t_len, co);
          patches.setZero();
          for (int d = 0; d < kk; ++d) {
            im2col_1d(xi, MapMat(patches.data(), t_len, kk * ci), t_len, ci,
                      d - kk / 2, d * ci);
          }
          dw.noalias() += patches.transpose() * dyi;
          db += dyi.colwise().sum();
          if (xn->requires_grad) {
            dpatches.noalias() = dyi * wmat.transpose();
            MapMat dxi(xn->grad_data() + size_t(bi) * t_len * ci, t_len, ci);
            for (int d = 0; d < kk; ++d) {
              col2im_1d(dxi, CMapMat(dpatches.data(), t_len, kk * ci), t_len,
                        ci, d - kk / 2, d * ci);
            }
          }
        }
      });
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int c_in_, int c_out_, Rng& rng) : c_in(c_in_), c_out(c_out_) {
  const double bound = init_bound(c_in * kf * kt);
  w = uniform_tensor({kf, kt, c_in, c_out}, bound, rng);
  b = Tensor::zeros({c_out}, true);
}

namespace {

// Patch layout for 3x3 conv over (F, T) with channels last: column block
// (df*kt + dt)*c holds x[f+df-1, t+dt-1, :].
void im2col_2d(const double* x, double* patches, int f_len, int t_len, int c,
               int kf, int kt) {
  const size_t row_width = size_t(kf) * kt * c;
  std::fill(patches, patches + size_t(f_len) * t_len * row_width, 0.0);
  for (int df = 0; df < kf; ++df) {
    for (int f = 0; f < f_len; ++f) {
      const int fs = f + df - kf / 2;
      if (fs < 0 || fs >= f_len) continue;
      for (int dt = 0; dt < kt; ++dt) {
        const int lo = std::max(0, kt / 2 - dt);
        const int hi = std::min(t_len, t_len + kt / 2 - dt);
        if (hi <= lo) continue;
        const double* src = x + (size_t(fs) * t_len + lo + dt - kt / 2) * c;
        double* dst = patches + (size_t(f) * t_len + lo) * row_width +
                      (size_t(df) * kt + dt) * c;
        for (int t = lo; t < hi; ++t) {
          std::copy(src, src + c, dst);
          src += c;
          dst += row_width;
        }
      }
    }
  }
}

void col2im_2d(double* dx, const double* dpatches, int f_len, int t_len, int c,
               int kf, int kt) {
  const size_t row_width = size_t(kf) * kt * c;
  for (int df = 0; df < kf; ++df) {
    for (int f = 0; f < f_len; ++f) {
      const int fs = f + df - kf / 2;
      if (fs < 0 || fs >= f_len) continue;
      for (int dt = 0; dt < kt; ++dt) {
        const int lo = std::max(0, kt / 2 - dt);
        const int hi = std::min(t_len, t_len + kt / 2 - dt);
        if (hi <= lo) continue;
        double* dst = dx + (size_t(fs) * t_len + lo + dt - kt / 2) * c;
        const double* src = dpatches + (size_t(f) * t_len + lo) * row_width +
                            (size_t(df) * kt + dt) * c;
        for (int t = lo; t < hi; ++t) {
          for (int ci = 0; ci < c; ++ci) dst[ci] += src[ci];
          dst += c;
          src += row_width;
        }
      }
    }
  }
}

}  // namespace

Tensor Conv2d::forward(const Tensor& x) const {
  expect(x.ndim() == 4 && x.dim(3) == c_in,
         "conv2d: expected input (B, F, T, " + std::to_string(c_in) +
             "), got " + shape_str(x.shape()));
  const int batch = x.dim(0), f_len = x.dim(1), t_len = x.dim(2);
  const int ci = c_in, co = c_out, kf_ = kf, kt_ = kt;
  const size_t spatial = size_t(f_len) * t_len;
  const size_t row_width = size_t(kf_) * kt_ * ci;

  std::vector<double> out(size_t(batch) * spatial * co);
  std::vector<double> patches(spatial * row_width);
  CMapMat wmat(w.data(), static_cast<Eigen::Index>(row_width), co);
  Eigen::Map<const Eigen::RowVectorXd> bias(b.data(), co);
  for (int bi = 0; bi < batch; ++bi) {
    im2col_2d(x.data() + bi * spatial * ci, patches.data(), f_len, t_len, ci,
              kf_, kt_);
    CMapMat pm(patches.data(), static_cast<Eigen::Index>(spatial),
               static_cast<Eigen::Index>(row_width));
    MapMat yi(out.data() + bi * spatial * co,
              static_cast<Eigen::Index>(spatial), co);
    yi.noalias() = pm * wmat;
    yi.rowwise() += bias;
  }

  auto wt = w;
  auto bt = b;
  return make_op(
      {batch, f_len, t_len, co}, std::move(out), {x, wt, bt},
      [batch, f_len, t_len, ci, co, kf_, kt_, spatial, row_width](Node& self) {
        auto& xn = self.parents[0];
        auto& wn = self.parents[1];
        auto& bn = self.parents[2];
        std::vector<double> patches(spatial * row_width);
        std::vector<double> dpatches(spatial * row_width);
        MapMat dw(wn->grad_data(), static_cast<Eigen::Index>(row_width), co);
        Eigen::Map<Eigen::RowVectorXd> db(bn->grad_data(), co);
        CMapMat wmat(wn->values.data(), static_cast<Eigen::Index>(row_width),
                     co);
        for (int bi = 0; bi < batch; ++bi) {
          im2col_2d(xn->values.data() + bi * spatial * ci, patches.data(),
                    f_len, t_len, ci, kf_, kt_);
          CMapMat pm(patches.data(), static_cast<Eigen::Index>(spatial),
                     static_cast<Eigen::Index>(row_width));
          CMapMat dyi(self.grad.data() + bi * spatial * co,
                      static_cast<Eigen::Index>(spatial), co);
          dw.noalias() += pm.transpose() * dyi;
          db += dyi.colwise().sum();
          if (xn->requires_grad) {
            MapMat dpm(dpatches.data(), static_cast<Eigen::Index>(spatial),
                       static_cast<Eigen::Index>(row_width));
            dpm.noalias() = dyi * wmat.transpose();
            col2im_2d(xn->grad_data() + bi * spatial * ci, dpatches.data(),
                      f_len, t_len, ci, kf_, kt_);
          }
        }
      });
}

// -------------------------------------------------------- PointwiseDense

PointwiseDense::PointwiseDense(int c_in_, int c_out_, Rng& rng)
    : c_in(c_in_), c_out(c_out_) {
  w = uniform_tensor({c_in, c_out}, init_bound(c_in), rng);
  b = Tensor::zeros({c_out}, true);
}

Tensor PointwiseDense::forward(const Tensor& x) const {
  expect(x.ndim() >= 2 && x.dim(x.ndim() - 1) == c_in,
         "pointwise_dense: expected trailing axis " + std::to_string(c_in) +
             ", got " + shape_str(x.shape()));
  const size_t rows = x.size() / c_in;
  const int ci = c_in, co = c_out;

  std::vector<double> out(rows * co);
  {
    CMapMat xm(x.data(), static_cast<Eigen::Index>(rows), ci);
    CMapMat wm(w.data(), ci, co);
    MapMat ym(out.data(), static_cast<Eigen::Index>(rows), co);
    ym.noalias() = xm * wm;
    ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data(), co);
  }

  Shape shape = x.shape();
  shape.back() = co;
  auto wt = w;
  auto bt = b;
  return make_op(std::move(shape), std::move(out), {x, wt, bt},
                 [rows, ci, co](Node& self) {
                   auto& xn = self.parents[0];
                   auto& wn = self.parents[1];
                   auto& bn = self.parents[2];
                   CMapMat xm(xn->values.data(),
                              static_cast<Eigen::Index>(rows), ci);
                   CMapMat dym(self.grad.data(),
                               static_cast<Eigen::Index>(rows), co);
                   MapMat dw(wn->grad_data(), ci, co);
                   dw.noalias() += xm.transpose() * dym;
                   Eigen::Map<Eigen::RowVectorXd>(bn->grad_data(), co) +=
                       dym.colwise().sum();
                   if (xn->requires_grad) {
                     CMapMat wm(wn->values.data(), ci, co);
                     MapMat dxm(xn->grad_data(),
                                static_cast<Eigen::Index>(rows), ci);
                     dxm.noalias() += dym * wm.transpose();
                   }
                 });
}

// ------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(int n_features_, Features features_)
    : features(features_), n_features(n_features_) {
  gamma = Tensor::full({n_features}, 1.0, true);
  shift = Tensor::zeros({n_features}, true);
  running_mean = Tensor::zeros({n_features});
  running_var = Tensor::full({n_features}, 1.0);
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  if (features == Features::freq_channels) {
    expect(x.ndim() == 4, "batchnorm(freq): expected a (B, F, T, C) input, got " +
                              shape_str(x.shape()));
    expect(x.dim(1) * x.dim(3) == n_features,
           "batchnorm(freq): expected F*C = " + std::to_string(n_features) +
               ", got input " + shape_str(x.shape()));
  } else {
    expect(x.ndim() >= 2 && x.dim(x.ndim() - 1) == n_features,
           "batchnorm: expected " + std::to_string(n_features) +
               " channels, got input " + shape_str(x.shape()));
  }
  const size_t n = x.size();
  const int nf = n_features;
  const size_t m = n / static_cast<size_t>(nf);
  const int c_last = x.dim(x.ndim() - 1);
  const int t_mid = (features == Features::freq_channels) ? x.dim(2) : 1;
  const int f_dim = (features == Features::freq_channels) ? x.dim(1) : 1;
  const bool per_freq = features == Features::freq_channels;

  auto feature_of = [c_last, t_mid, f_dim, per_freq](size_t i) -> int {
    const int ci = static_cast<int>(i % c_last);
    if (!per_freq) return ci;
    const int fi =
        static_cast<int>((i / (size_t(c_last) * t_mid)) % f_dim);
    return ci + c_last * fi;
  };

  std::vector<double> out(n);

  if (mode == Mode::infer) {
    std::vector<double> scale(nf), offset(nf);
    for (int f = 0; f < nf; ++f) {
      const double invstd = 1.0 / std::sqrt(running_var.data()[f] + eps);
      scale[f] = gamma.data()[f] * invstd;
      offset[f] = shift.data()[f] - running_mean.data()[f] * scale[f];
    }
    for (size_t i = 0; i < n; ++i) {
      out[i] = x.data()[i] * scale[feature_of(i)] + offset[feature_of(i)];
    }
    auto gt = gamma;
    auto st = shift;
    std::vector<double> rm = running_mean.values(), rv = running_var.values();
    const double eps_ = eps;
    return make_op(
        x.shape(), std::move(out), {x, gt, st},
        [feature_of, nf, rm = std::move(rm), rv = std::move(rv),
         eps_](Node& self) {
          auto& xn = self.parents[0];
          auto& gn = self.parents[1];
          auto& sn = self.parents[2];
          std::vector<double> invstd(nf);
          for (int f = 0; f < nf; ++f) invstd[f] = 1.0 / std::sqrt(rv[f] + eps_);
          double* dg = gn->grad_data();
          double* ds = sn->grad_data();
          for (size_t i = 0; i < self.size(); ++i) {
            const int f = feature_of(i);
            const double xhat = (xn->values[i] - rm[f]) * invstd[f];
            dg[f] += self.grad[i] * xhat;
            ds[f] += self.grad[i];
          }
          if (xn->requires_grad) {
            double* dx = xn->grad_data();
            for (size_t i = 0; i < self.size(); ++i) {
              const int f = feature_of(i);
              dx[i] += self.grad[i] * gn->values[f] * invstd[f];
            }
          }
        });
  }

  // Training: batch statistics (biased variance), two-pass for accuracy.
  std::vector<double> mu(nf, 0.0), var(nf, 0.0);
  for (size_t i = 0; i < n; ++i) mu[feature_of(i)] += x.data()[i];
  for (int f = 0; f < nf; ++f) mu[f] /= static_cast<double>(m);
  for (size_t i = 0; i < n; ++i) {
    const double d = x.data()[i] - mu[feature_of(i)];
    var[feature_of(i)] += d * d;
  }
  for (int f = 0; f < nf; ++f) var[f] /= static_cast<double>(m);

  std::vector<double> invstd(nf);
  for (int f = 0; f < nf; ++f) invstd[f] = 1.0 / std::sqrt(var[f] + eps);

  std::vector<double> xhat(n);
  for (size_t i = 0; i < n; ++i) {
    const int f = feature_of(i);
    xhat[i] = (x.data()[i] - mu[f]) * invstd[f];
    out[i] = gamma.data()[f] * xhat[i] + shift.data()[f];
  }

  for (int f = 0; f < nf; ++f) {
    running_mean.data()[f] =
        momentum * running_mean.data()[f] + (1.0 - momentum) * mu[f];
    running_var.data()[f] =
        momentum * running_var.data()[f] + (1.0 - momentum) * var[f];
  }

  auto gt = gamma;
  auto st = shift;
  return make_op(
      x.shape(), std::move(out), {x, gt, st},
      [feature_of, nf, m, xhat = std::move(xhat),
       invstd = std::move(invstd)](Node& self) {
        auto& xn = self.parents[0];
        auto& gn = self.parents[1];
        auto& sn = self.parents[2];
        std::vector<double> sum_dy(nf, 0.0), sum_dy_xhat(nf, 0.0);
        for (size_t i = 0; i < self.size(); ++i) {
          const int f = feature_of(i);
          sum_dy[f] += self.grad[i];
          sum_dy_xhat[f] += self.grad[i] * xhat[i];
        }
        double* dg = gn->grad_data();
        double* ds = sn->grad_data();
        for (int f = 0; f < nf; ++f) {
          dg[f] += sum_dy_xhat[f];
          ds[f] += sum_dy[f];
        }
        if (xn->requires_grad) {
          double* dx = xn->grad_data();
          const double inv_m = 1.0 / static_cast<double>(m);
          for (size_t i = 0; i < self.size(); ++i) {
            const int f = feature_of(i);
            dx[i] += gn->values[f] * invstd[f] *
                     (self.grad[i] - sum_dy[f] * inv_m -
                      xhat[i] * sum_dy_xhat[f] * inv_m);
          }
        }
      });
}

// ----------------------------------------------------------------- Pools

namespace {

Tensor pool_time_axis(const Tensor& x, PoolKind kind, int groups, int t_len,
                      int c, Shape out_shape) {
  expect(t_len % 2 == 0, "pool: time axis must be even, got " +
                             shape_str(x.shape()));
  const int t_out = t_len / 2;
  const size_t n_out = numel(out_shape);
  std::vector<double> out(n_out);
  std::vector<uint8_t> argmax(kind == PoolKind::max ? n_out : 0);
  for (int g = 0; g < groups; ++g) {
    const double* xg = x.data() + size_t(g) * t_len * c;
    double* yg = out.data() + size_t(g) * t_out * c;
    for (int t = 0; t < t_out; ++t) {
      for (int ci = 0; ci < c; ++ci) {
        const double a = xg[(2 * t) * c + ci];
        const double b = xg[(2 * t + 1) * c + ci];
        if (kind == PoolKind::avg) {
          yg[t * c + ci] = 0.5 * (a + b);
        } else {
          const bool second = b > a;
          yg[t * c + ci] = second ? b : a;
          argmax[size_t(g) * t_out * c + size_t(t) * c + ci] = second;
        }
      }
    }
  }
  return make_op(std::move(out_shape), std::move(out), {x},
                 [groups, t_out, c, kind, argmax = std::move(argmax)](
                     Node& self) {
                   auto& xn = self.parents[0];
                   double* dx = xn->grad_data();
                   for (int g = 0; g < groups; ++g) {
                     const double* dyg =
                         self.grad.data() + size_t(g) * t_out * c;
                     double* dxg = dx + size_t(g) * (2 * t_out) * c;
                     for (int t = 0; t < t_out; ++t) {
                       for (int ci = 0; ci < c; ++ci) {
                         const double dy = dyg[t * c + ci];
                         if (kind == PoolKind::avg) {
                           dxg[(2 * t) * c + ci] += 0.5 * dy;
                           dxg[(2 * t + 1) * c + ci] += 0.5 * dy;
                         } else {
                           const int sel = argmax[size_t(g) * t_out * c +
                                                  size_t(t) * c + ci];
                           dxg[(2 * t + sel) * c + ci] += dy;
                         }
                       }
                     }
                   }
                 });
}

}  // namespace

Tensor pool1d(const Tensor& x, PoolKind kind) {
  expect(x.ndim() == 3, "pool1d: expected (B, T, C), got " +
                            shape_str(x.shape()));
  return pool_time_axis(x, kind, x.dim(0), x.dim(1), x.dim(2),
                        {x.dim(0), x.dim(1) / 2, x.dim(2)});
}

Tensor pool2d_time(const Tensor& x, PoolKind kind) {
  expect(x.ndim() == 4, "pool2d_time: expected (B, F, T, C), got " +
                            shape_str(x.shape()));
  return pool_time_axis(x, kind, x.dim(0) * x.dim(1), x.dim(2), x.dim(3),
                        {x.dim(0), x.dim(1), x.dim(2) / 2, x.dim(3)});
}

// ------------------------------------------------------------------ LSTM

Lstm::Lstm(int c_in_, int hidden_, Rng& rng) : c_in(c_in_), hidden(hidden_) {
  w_x = uniform_tensor({c_in, 4 * hidden}, init_bound(c_in), rng);
  w_h = uniform_tensor({hidden, 4 * hidden}, init_bound(hidden), rng);
  std::vector<double> bias_v(4 * hidden, 0.0);
  for (int i = hidden; i < 2 * hidden; ++i) bias_v[i] = 1.0;  // forget gate
  bias = Tensor::from({4 * hidden}, std::move(bias_v), true);
}

Tensor Lstm::forward(const Tensor& x, bool reverse_time) const {
  expect(x.ndim() == 3 && x.dim(2) == c_in,
         "lstm: expected input (B, T, " + std::to_string(c_in) + "), got " +
             shape_str(x.shape()));
  const int batch = x.dim(0), t_len = x.dim(1);
  const int h = hidden, g4 = 4 * hidden, ci = c_in;

  // Input projections for every step in one product.
  const size_t rows = size_t(batch) * t_len;
  std::vector<double> xp(rows * g4);
  {
    CMapMat xm(x.data(), static_cast<Eigen::Index>(rows), ci);
    CMapMat wxm(w_x.data(), ci, g4);
    MapMat xpm(xp.data(), static_cast<Eigen::Index>(rows), g4);
    xpm.noalias() = xm * wxm;
    xpm.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data(), g4);
  }

  std::vector<double> out(rows * size_t(h), 0.0);
  const bool record = grad_enabled() &&
                      (x.requires_grad() || w_x.requires_grad() ||
                       w_h.requires_grad() || bias.requires_grad());
  std::vector<double> gates_cache(record ? rows * size_t(g4) : 0);
  std::vector<double> c_cache(record ? rows * size_t(h) : 0);
  std::vector<double> tanhc_cache(record ? rows * size_t(h) : 0);

  RowMat gates(batch, g4);
  RowMat h_prev = RowMat::Zero(batch, h);
  RowMat c_prev = RowMat::Zero(batch, h);
  CMapMat whm(w_h.data(), h, g4);

  const auto step_stride = Eigen::OuterStride<>(size_t(t_len) * g4);
  const auto out_stride = Eigen::OuterStride<>(size_t(t_len) * h);

  for (int tau = 0; tau < t_len; ++tau) {
    const int t = reverse_time ? t_len - 1 - tau : tau;
    CStrideMap xp_t(xp.data() + size_t(t) * g4, batch, g4, step_stride);
    gates.noalias() = xp_t;
    gates.noalias() += h_prev * whm;
    StrideMap h_t(out.data() + size_t(t) * h, batch, h, out_stride);
    for (int bi = 0; bi < batch; ++bi) {
      for (int j = 0; j < h; ++j) {
        double& gi = gates(bi, j);
        double& gf = gates(bi, h + j);
        double& gg = gates(bi, 2 * h + j);
        double& go = gates(bi, 3 * h + j);
        gi = sigmoid(gi);
        gf = sigmoid(gf);
        gg = std::tanh(gg);
        go = sigmoid(go);
        const double c_new = gf * c_prev(bi, j) + gi * gg;
        const double tc = std::tanh(c_new);
        h_t(bi, j) = go * tc;
        c_prev(bi, j) = c_new;
        if (record) {
          const size_t base = (size_t(bi) * t_len + t);
          c_cache[base * h + j] = c_new;
          tanhc_cache[base * h + j] = tc;
        }
      }
    }
    if (record) {
      for (int bi = 0; bi < batch; ++bi) {
        std::copy(gates.data() + size_t(bi) * g4,
                  gates.data() + size_t(bi) * g4 + g4,
                  gates_cache.data() + (size_t(bi) * t_len + t) * g4);
      }
    }
    h_prev = h_t;
  }

  auto wxt = w_x;
  auto wht = w_h;
  auto bt = bias;
  return make_op(
      {batch, t_len, h}, std::move(out), {x, wxt, wht, bt},
      [batch, t_len, h, g4, ci, reverse_time, gates_cache = std::move(gates_cache),
       c_cache = std::move(c_cache),
       tanhc_cache = std::move(tanhc_cache)](Node& self) {
        auto& xn = self.parents[0];
        auto& wxn = self.parents[1];
        auto& whn = self.parents[2];
        auto& bn = self.parents[3];
        const size_t rows = size_t(batch) * t_len;
        std::vector<double> dgates_flat(rows * size_t(g4), 0.0);

        CMapMat whm(whn->values.data(), h, g4);
        MapMat dwh(whn->grad_data(), h, g4);
        RowMat dh_next = RowMat::Zero(batch, h);
        RowMat dc_next = RowMat::Zero(batch, h);
        RowMat dgates(batch, g4);
        const auto gate_stride = Eigen::OuterStride<>(size_t(t_len) * g4);
        const auto out_stride = Eigen::OuterStride<>(size_t(t_len) * h);

        for (int tau = t_len - 1; tau >= 0; --tau) {
          const int t = reverse_time ? t_len - 1 - tau : tau;
          const int t_prev = reverse_time ? t + 1 : t - 1;
          for (int bi = 0; bi < batch; ++bi) {
            const size_t base = (size_t(bi) * t_len + t);
            const double* gts = gates_cache.data() + base * g4;
            const double* tc = tanhc_cache.data() + base * h;
            const double* c_before =
                tau > 0 ? c_cache.data() + (size_t(bi) * t_len + t_prev) * h
                        : nullptr;
            const double* dy = self.grad.data() + base * h;
            for (int j = 0; j < h; ++j) {
              const double gi = gts[j];
              const double gf = gts[h + j];
              const double gg = gts[2 * h + j];
              const double go = gts[3 * h + j];
              const double dh = dy[j] + dh_next(bi, j);
              const double dgo = dh * tc[j];
              double dc = dc_next(bi, j) + dh * go * (1.0 - tc[j] * tc[j]);
              const double cp = c_before ? c_before[j] : 0.0;
              const double dgi = dc * gg;
              const double dgf = dc * cp;
              const double dgg = dc * gi;
              dc_next(bi, j) = dc * gf;
              dgates(bi, j) = dgi * gi * (1.0 - gi);
              dgates(bi, h + j) = dgf * gf * (1.0 - gf);
              dgates(bi, 2 * h + j) = dgg * (1.0 - gg * gg);
              dgates(bi, 3 * h + j) = dgo * go * (1.0 - go);
            }
          }
          dh_next.noalias() = dgates * whm.transpose();
          if (tau > 0) {
            CStrideMap h_before(self.values.data() + size_t(t_prev) * h, batch,
                                h, out_stride);
            dwh.noalias() += h_before.transpose() * dgates;
          }
          StrideMap dg_t(dgates_flat.data() + size_t(t) * g4, batch, g4,
                         gate_stride);
          dg_t = dgates;
        }

        MapMat dgf(dgates_flat.data(), static_cast<Eigen::Index>(rows), g4);
        Eigen::Map<Eigen::RowVectorXd>(bn->grad_data(), g4) +=
            dgf.colwise().sum();
        CMapMat xm(xn->values.data(), static_cast<Eigen::Index>(rows), ci);
        MapMat dwx(wxn->grad_data(), ci, g4);
        dwx.noalias() += xm.transpose() * dgf;
        if (xn->requires_grad) {
          CMapMat wxm(wxn->values.data(), ci, g4);
          MapMat dxm(xn->grad_data(), static_cast<Eigen::Index>(rows), ci);
          dxm.noalias() += dgf * wxm.transpose();
        }
      });
}

// --------------------------------------------------------------- Dropout

Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng) {
  expect(rate >= 0.0 && rate < 1.0,
         "dropout: rate must be in [0, 1), got " + std::to_string(rate));
  if (mode == Mode::infer || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng.uniform() >= rate ? keep_scale : 0.0;
    out[i] = x.data()[i] * mask[i];
  }
  return make_op(x.shape(), std::move(out), {x},
                 [mask = std::move(mask)](Node& self) {
                   double* dx = self.parents[0]->grad_data();
                   for (size_t i = 0; i < self.size(); ++i) {
                     dx[i] += self.grad[i] * mask[i];
                   }
                 });
}

// ------------------------------------------------------------------ ReLU

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = std::max(0.0, x.data()[i]);
  return make_op(x.shape(), std::move(out), {x}, [](Node& self) {
    double* dx = self.parents[0]->grad_data();
    const auto& xv = self.parents[0]->values;
    for (size_t i = 0; i < self.size(); ++i) {
      if (xv[i] > 0.0) dx[i] += self.grad[i];
    }
  });
}

// --------------------------------------------------------------- Softmax

Tensor softmax(const Tensor& x) {
  expect(x.ndim() >= 1, "softmax: needs at least one axis");
  const int c = x.dim(x.ndim() - 1);
  const size_t rows = x.size() / c;
  std::vector<double> out(x.size());
  for (size_t r = 0; r < rows; ++r) {
    const double* xi = x.data() + r * c;
    double* yi = out.data() + r * c;
    double mx = xi[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, xi[j]);
    double total = 0.0;
    for (int j = 0; j < c; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      total += yi[j];
    }
    for (int j = 0; j < c; ++j) yi[j] /= total;
  }
  return make_op(x.shape(), std::move(out), {x}, [c, rows](Node& self) {
    double* dx = self.parents[0]->grad_data();
    for (size_t r = 0; r < rows; ++r) {
      const double* y = self.values.data() + r * c;
      const double* dy = self.grad.data() + r * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += dy[j] * y[j];
      for (int j = 0; j < c; ++j) dx[r * c + j] += y[j] * (dy[j] - dot);
    }
  });
}

// ---------------------------------------------------------------- Concat

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  expect(a.ndim() == b.ndim(), "concat: rank mismatch " +
                                   shape_str(a.shape()) + " vs " +
                                   shape_str(b.shape()));
  for (int i = 0; i + 1 < a.ndim(); ++i) {
    expect(a.dim(i) == b.dim(i), "concat: shape mismatch " +
                                     shape_str(a.shape()) + " vs " +
                                     shape_str(b.shape()));
  }
  const int ca = a.dim(a.ndim() - 1), cb = b.dim(b.ndim() - 1);
  const size_t rows = a.size() / ca;
  Shape shape = a.shape();
  shape.back() = ca + cb;
  std::vector<double> out(rows * size_t(ca + cb));
  for (size_t r = 0; r < rows; ++r) {
    std::copy(a.data() + r * ca, a.data() + (r + 1) * ca,
              out.data() + r * (ca + cb));
    std::copy(b.data() + r * cb, b.data() + (r + 1) * cb,
              out.data() + r * (ca + cb) + ca);
  }
  return make_op(std::move(shape), std::move(out), {a, b},
                 [rows, ca, cb](Node& self) {
                   auto& an = self.parents[0];
                   auto& bn = self.parents[1];
                   for (size_t r = 0; r < rows; ++r) {
                     const double* dy = self.grad.data() + r * (ca + cb);
                     if (an->requires_grad) {
                       double* da = an->grad_data() + r * ca;
                       for (int j = 0; j < ca; ++j) da[j] += dy[j];
                     }
                     if (bn->requires_grad) {
                       double* db = bn->grad_data() + r * cb;
                       for (int j = 0; j < cb; ++j) db[j] += dy[ca + j];
                     }
                   }
                 });
}

// ----------------------------------------------------------- FlattenFreq

Tensor flatten_freq(const Tensor& x) {
  expect(x.ndim() == 4, "flatten_freq: expected (B, F, T, C), got " +
                            shape_str(x.shape()));
  const int batch = x.dim(0), f_len = x.dim(1), t_len = x.dim(2), c = x.dim(3);
  std::vector<double> out(x.size());
  for (int bi = 0; bi < batch; ++bi) {
    for (int f = 0; f < f_len; ++f) {
      for (int t = 0; t < t_len; ++t) {
        const double* src =
            x.data() + ((size_t(bi) * f_len + f) * t_len + t) * c;
        double* dst = out.data() +
                      (size_t(bi) * t_len + t) * (size_t(f_len) * c) +
                      size_t(f) * c;
        std::copy(src, src + c, dst);
      }
    }
  }
  return make_op({batch, t_len, f_len * c}, std::move(out), {x},
                 [batch, f_len, t_len, c](Node& self) {
                   double* dx = self.parents[0]->grad_data();
                   for (int bi = 0; bi < batch; ++bi) {
                     for (int f = 0; f < f_len; ++f) {
                       for (int t = 0; t < t_len; ++t) {
                         const double* src =
                             self.grad.data() +
                             (size_t(bi) * t_len + t) * (size_t(f_len) * c) +
                             size_t(f) * c;
                         double* dst =
                             dx + ((size_t(bi) * f_len + f) * t_len + t) * c;
                         for (int j = 0; j < c; ++j) dst[j] += src[j];
                       }
                     }
                   }
                 });
}

// --------------------------------------------------------- CrossEntropy

Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
  expect(probs.ndim() >= 2, "cross_entropy: probs must be (..., n_classes)");
  const int c = probs.dim(probs.ndim() - 1);
  const size_t rows = probs.size() / c;
  expect(labels.size() == rows,
         "cross_entropy: " + std::to_string(rows) + " rows but " +
             std::to_string(labels.size()) + " labels");
  constexpr double kClamp = 1e-12;
  double total = 0.0;
  for (size_t r = 0; r < rows; ++r) {
    const int y = labels[r];
    expect(y >= 0 && y < c, "cross_entropy: label out of range");
    total -= std::log(std::max(probs.data()[r * c + y], kClamp));
  }
  const double inv_rows = 1.0 / static_cast<double>(rows);
  return make_op({1}, {total * inv_rows}, {probs},
                 [labels, c, rows, inv_rows](Node& self) {
                   auto& pn = self.parents[0];
                   double* dp = pn->grad_data();
                   const double go = self.grad[0] * inv_rows;
                   for (size_t r = 0; r < rows; ++r) {
                     const double p = pn->values[r * c + labels[r]];
                     if (p >= kClamp) dp[r * c + labels[r]] -= go / p;
                   }
                 });
}

}  // namespace red::ad
