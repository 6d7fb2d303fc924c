#pragma once

// Reference implementations used only by tests. Nothing here calls into the
// library code it is checking.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "leda/autodiff.hpp"
#include "leda/field.hpp"

namespace leda::testing {

inline ad::Tensor random_tensor(std::vector<int> shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  ad::Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& x : t.data()) x = u(rng);
  return t;
}

// out[b][o] = sum_i x[b][i] w[i][o] + bias[o]
inline ad::Tensor naive_dense(const ad::Tensor& x, const ad::Tensor& w, const ad::Tensor& b) {
  const int B = x.dim(0), I = x.dim(1), O = w.dim(1);
  ad::Tensor out({B, O});
  for (int r = 0; r < B; ++r)
    for (int o = 0; o < O; ++o) {
      double acc = b[o];
      for (int i = 0; i < I; ++i) acc += x[r * I + i] * w[i * O + o];
      out[r * O + o] = acc;
    }
  return out;
}

// Direct sliding-window cross-correlation with zero padding (k-1)/2.
inline ad::Tensor naive_conv2d(const ad::Tensor& x, const ad::Tensor& k, const ad::Tensor& b, int stride) {
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int F = k.dim(0), K = k.dim(2), pad = (K - 1) / 2;
  const int Ho = (H + stride - 1) / stride, Wo = (W + stride - 1) / stride;
  ad::Tensor out({B, F, Ho, Wo});
  auto X = [&](int n, int c, int r, int q) { return x[((n * C + c) * H + r) * W + q]; };
  for (int n = 0; n < B; ++n)
    for (int f = 0; f < F; ++f)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          double acc = b[f];
          for (int c = 0; c < C; ++c)
            for (int dy = 0; dy < K; ++dy)
              for (int dx = 0; dx < K; ++dx) {
                const int r = oy * stride + dy - pad, q = ox * stride + dx - pad;
                if (r < 0 || r >= H || q < 0 || q >= W) continue;
                acc += X(n, c, r, q) * k[((f * C + c) * K + dy) * K + dx];
              }
          out[((n * F + f) * Ho + oy) * Wo + ox] = acc;
        }
  return out;
}

// Scatter form of the transposed convolution: every input value spreads its
// kernel footprint over the output it would have been read from.
inline ad::Tensor naive_conv_transpose2d(const ad::Tensor& y, const ad::Tensor& k, const ad::Tensor& b, int stride,
                                         int out_h, int out_w) {
  const int B = y.dim(0), F = y.dim(1), Hi = y.dim(2), Wi = y.dim(3);
  const int C = k.dim(1), K = k.dim(2), pad = (K - 1) / 2;
  ad::Tensor out({B, C, out_h, out_w});
  for (int n = 0; n < B; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < out_h * out_w; ++i) out[(n * C + c) * out_h * out_w + i] = b[c];
  for (int n = 0; n < B; ++n)
    for (int f = 0; f < F; ++f)
      for (int iy = 0; iy < Hi; ++iy)
        for (int ix = 0; ix < Wi; ++ix) {
          const double v = y[((n * F + f) * Hi + iy) * Wi + ix];
          for (int c = 0; c < C; ++c)
            for (int dy = 0; dy < K; ++dy)
              for (int dx = 0; dx < K; ++dx) {
                const int r = iy * stride + dy - pad, q = ix * stride + dx - pad;
                if (r < 0 || r >= out_h || q < 0 || q >= out_w) continue;
                out[((n * C + c) * out_h + r) * out_w + q] += v * k[((f * C + c) * K + dy) * K + dx];
              }
        }
  return out;
}

// Bilinear weights written out term by term: (1-a)(1-b) f00 + (1-a) b f01 + a (1-b) f10 + a b f11.
inline double bilinear_weights(double f00, double f01, double f10, double f11, double a, double b) {
  return (1 - a) * (1 - b) * f00 + (1 - a) * b * f01 + a * (1 - b) * f10 + a * b * f11;
}

inline VectorField constant_field(Grid2 g, double dr, double dc) {
  VectorField f(g);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) {
      f.at(r, c, 0) = dr;
      f.at(r, c, 1) = dc;
    }
  return f;
}

// u(x) = (A - I)(x - center) for A = [[a, b], [c, d]]
inline VectorField affine_field(Grid2 g, double a, double b, double c, double d, double cr, double cc) {
  VectorField f(g);
  for (int r = 0; r < g.height; ++r)
    for (int q = 0; q < g.width; ++q) {
      const double y = r - cr, x = q - cc;
      f.at(r, q, 0) = (a - 1) * y + b * x;
      f.at(r, q, 1) = c * y + (d - 1) * x;
    }
  return f;
}

// Smooth field from a few low-frequency sinusoids, peak magnitude about amp.
inline VectorField smooth_field(Grid2 g, double amp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorField f(g);
  const double pi = std::acos(-1.0);
  for (int comp = 0; comp < 2; ++comp) {
    for (int term = 0; term < 3; ++term) {
      const double ky = (1 + 2 * u(rng)) * pi / g.height, kx = (1 + 2 * u(rng)) * pi / g.width;
      const double ph1 = 2 * pi * u(rng), ph2 = 2 * pi * u(rng), a = amp * (0.2 + 0.4 * u(rng));
      for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c) f.at(r, c, comp) += a * std::sin(ky * r + ph1) * std::cos(kx * c + ph2);
    }
  }
  return f;
}

inline double rms_of(const VectorField& f) {
  double s = 0;
  for (double x : f.data()) s += x * x;
  return std::sqrt(s / static_cast<double>(f.grid().pixels()));
}

}  // namespace leda::testing
