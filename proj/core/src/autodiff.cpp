#include "leda/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "leda/field.hpp"

namespace leda::ad {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeMismatch("tensor dimensions must be positive, got " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw ShapeMismatch("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                        shape_string(shape_));
  }
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeMismatch("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

void Tensor::reshape(std::vector<int> shape) {
  if (shape_numel(shape) != data_.size()) {
    throw ShapeMismatch("reshape: cannot view " + shape_string(shape_) + " as " + shape_string(shape));
  }
  shape_ = std::move(shape);
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1, this};
}

int Tape::check(Var v) const {
  if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw InvalidArgument("variable is not recorded on this tape");
  }
  return v.id;
}

const Tensor& Tape::value(Var v) const { return nodes_[static_cast<std::size_t>(check(v))].value; }

const Tensor& Tape::grad(Var v) { return grad_buffer(check(v)); }

bool Tape::requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(check(v))].requires_grad; }

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.numel() == 0) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

Var Tape::record(Tensor value, std::vector<int> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [&](int i) { return nodes_[static_cast<std::size_t>(i)].requires_grad; });
  if (n.requires_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1, this};
}

void Tape::backward(Var loss) {
  const int root = check(loss);
  if (nodes_[static_cast<std::size_t>(root)].value.numel() != 1) {
    throw ShapeMismatch("backward requires a single-element loss, got " +
                        shape_string(nodes_[static_cast<std::size_t>(root)].value.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad_buffer(root)[0] = 1.0;
  for (int i = root; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.backward || n.grad.numel() == 0) continue;
    n.backward(*this, i);
  }
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}

// Accumulates `g` into the gradient of input `id` when that input needs one.
template <typename F>
void accumulate(Tape& t, int id, F&& f) {
  if (!t.needs_grad_at(id)) return;
  f(t.grad_buffer(id));
}

int conv_out(int n, int stride) { return (n + stride - 1) / stride; }

// cols[(c*k + i)*k + j, (b*Ho + oh)*Wo + ow] = x[b, c, oh*s - p + i, ow*s - p + j]
void im2col(const double* x, int B, int C, int H, int W, int k, int s, int Ho, int Wo, double* cols) {
  const int p = (k - 1) / 2;
  const std::size_t ncol = static_cast<std::size_t>(B) * Ho * Wo;
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        double* row = cols + static_cast<std::size_t>((c * k + i) * k + j) * ncol;
        for (int b = 0; b < B; ++b) {
          const double* xc = x + (static_cast<std::size_t>(b) * C + c) * H * W;
          for (int oh = 0; oh < Ho; ++oh) {
            const int ih = oh * s - p + i;
            double* dst = row + (static_cast<std::size_t>(b) * Ho + oh) * Wo;
            if (ih < 0 || ih >= H) {
              std::fill(dst, dst + Wo, 0.0);
              continue;
            }
            for (int ow = 0; ow < Wo; ++ow) {
              const int iw = ow * s - p + j;
              dst[ow] = (iw >= 0 && iw < W) ? xc[ih * W + iw] : 0.0;
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: x += scatter(cols).
void col2im(const double* cols, int B, int C, int H, int W, int k, int s, int Ho, int Wo, double* x) {
  const int p = (k - 1) / 2;
  const std::size_t ncol = static_cast<std::size_t>(B) * Ho * Wo;
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        const double* row = cols + static_cast<std::size_t>((c * k + i) * k + j) * ncol;
        for (int b = 0; b < B; ++b) {
          double* xc = x + (static_cast<std::size_t>(b) * C + c) * H * W;
          for (int oh = 0; oh < Ho; ++oh) {
            const int ih = oh * s - p + i;
            if (ih < 0 || ih >= H) continue;
            const double* src = row + (static_cast<std::size_t>(b) * Ho + oh) * Wo;
            for (int ow = 0; ow < Wo; ++ow) {
              const int iw = ow * s - p + j;
              if (iw >= 0 && iw < W) xc[ih * W + iw] += src[ow];
            }
          }
        }
      }
    }
  }
}

// [F, B*P] <-> [B, F, P]
void scatter_channels(const double* src, int B, int F, int P, double* dst) {
  for (int f = 0; f < F; ++f)
    for (int b = 0; b < B; ++b)
      std::copy_n(src + (static_cast<std::size_t>(f) * B + b) * P, P, dst + (static_cast<std::size_t>(b) * F + f) * P);
}

void gather_channels(const double* src, int B, int F, int P, double* dst) {
  for (int f = 0; f < F; ++f)
    for (int b = 0; b < B; ++b)
      std::copy_n(src + (static_cast<std::size_t>(b) * F + f) * P, P, dst + (static_cast<std::size_t>(f) * B + b) * P);
}

struct ConvGeom {
  int B, C, H, W, F, k, s, Ho, Wo;
  std::size_t ckk() const { return static_cast<std::size_t>(C) * k * k; }
  std::size_t ncol() const { return static_cast<std::size_t>(B) * Ho * Wo; }
};

// y[B,F,Ho,Wo] (channel-major scratch [F, B*Ho*Wo]) = K . im2col(x)
void conv_apply(const ConvGeom& g, const double* x, const double* kernel, double* out_fp) {
  std::vector<double> cols(g.ckk() * g.ncol());
  im2col(x, g.B, g.C, g.H, g.W, g.k, g.s, g.Ho, g.Wo, cols.data());
  ConstMapMat K(kernel, g.F, static_cast<Eigen::Index>(g.ckk()));
  ConstMapMat X(cols.data(), static_cast<Eigen::Index>(g.ckk()), static_cast<Eigen::Index>(g.ncol()));
  MapMat Y(out_fp, g.F, static_cast<Eigen::Index>(g.ncol()));
  Y.noalias() = K * X;
}

// x += col2im(K^T . y) for channel-major y [F, B*Ho*Wo]
void conv_adjoint(const ConvGeom& g, const double* y_fp, const double* kernel, double* x) {
  std::vector<double> cols(g.ckk() * g.ncol());
  ConstMapMat K(kernel, g.F, static_cast<Eigen::Index>(g.ckk()));
  ConstMapMat Y(y_fp, g.F, static_cast<Eigen::Index>(g.ncol()));
  MapMat X(cols.data(), static_cast<Eigen::Index>(g.ckk()), static_cast<Eigen::Index>(g.ncol()));
  X.noalias() = K.transpose() * Y;
  col2im(cols.data(), g.B, g.C, g.H, g.W, g.k, g.s, g.Ho, g.Wo, x);
}

// dK += y_fp . im2col(x)^T
void conv_kernel_grad(const ConvGeom& g, const double* x, const double* y_fp, double* dkernel) {
  std::vector<double> cols(g.ckk() * g.ncol());
  im2col(x, g.B, g.C, g.H, g.W, g.k, g.s, g.Ho, g.Wo, cols.data());
  ConstMapMat X(cols.data(), static_cast<Eigen::Index>(g.ckk()), static_cast<Eigen::Index>(g.ncol()));
  ConstMapMat Y(y_fp, g.F, static_cast<Eigen::Index>(g.ncol()));
  MapMat dK(dkernel, g.F, static_cast<Eigen::Index>(g.ckk()));
  dK.noalias() += Y * X.transpose();
}

ConvGeom conv_geometry(const Tensor& x, const Tensor& k, int stride, const char* op) {
  require(x.rank() == 4, std::string(op) + ": input must be rank 4, got " + shape_string(x.shape()));
  require(k.rank() == 4, std::string(op) + ": kernel must be rank 4, got " + shape_string(k.shape()));
  require(k.dim(2) == k.dim(3) && k.dim(2) % 2 == 1, std::string(op) + ": kernel must be square and odd");
  if (stride < 1) throw InvalidArgument(std::string(op) + ": stride must be >= 1");
  ConvGeom g{};
  g.k = k.dim(2);
  g.s = stride;
  g.F = k.dim(0);
  g.C = k.dim(1);
  return g;
}

ConvGeom conv2d_geometry(const Tensor& X, const Tensor& K, const Tensor& Bv, int stride) {
  ConvGeom g = conv_geometry(X, K, stride, "conv2d");
  require(X.dim(1) == g.C, "conv2d: input has " + std::to_string(X.dim(1)) + " channels, kernel expects " +
                               std::to_string(g.C));
  require(Bv.rank() == 1 && Bv.dim(0) == g.F, "conv2d: bias must be [F]");
  g.B = X.dim(0);
  g.H = X.dim(2);
  g.W = X.dim(3);
  g.Ho = conv_out(g.H, g.s);
  g.Wo = conv_out(g.W, g.s);
  return g;
}

ConvGeom conv_transpose2d_geometry(const Tensor& X, const Tensor& K, const Tensor& Bv, int stride, int out_h,
                                   int out_w) {
  ConvGeom g = conv_geometry(X, K, stride, "conv_transpose2d");
  require(X.dim(1) == g.F, "conv_transpose2d: input has " + std::to_string(X.dim(1)) +
                               " channels, kernel expects " + std::to_string(g.F));
  require(Bv.rank() == 1 && Bv.dim(0) == g.C, "conv_transpose2d: bias must be [C]");
  g.B = X.dim(0);
  g.H = out_h;
  g.W = out_w;
  g.Ho = X.dim(2);
  g.Wo = X.dim(3);
  require(out_h > 0 && out_w > 0 && conv_out(out_h, g.s) == g.Ho && conv_out(out_w, g.s) == g.Wo,
          "conv_transpose2d: output size inconsistent with input and stride");
  return g;
}

Tensor conv2d_forward(const ConvGeom& g, const Tensor& X, const Tensor& K, const Tensor& Bv) {
  const int P = g.Ho * g.Wo;
  std::vector<double> fp(static_cast<std::size_t>(g.F) * g.ncol());
  conv_apply(g, X.data().data(), K.data().data(), fp.data());
  Tensor out({g.B, g.F, g.Ho, g.Wo});
  scatter_channels(fp.data(), g.B, g.F, P, out.data().data());
  for (int b = 0; b < g.B; ++b)
    for (int f = 0; f < g.F; ++f) {
      double* dst = out.data().data() + (static_cast<std::size_t>(b) * g.F + f) * P;
      for (int p = 0; p < P; ++p) dst[p] += Bv[static_cast<std::size_t>(f)];
    }
  return out;
}

Tensor conv_transpose2d_forward(const ConvGeom& g, const Tensor& X, const Tensor& K, const Tensor& Bv) {
  const int P = g.Ho * g.Wo;
  const int Q = g.H * g.W;
  std::vector<double> xfp(static_cast<std::size_t>(g.F) * g.ncol());
  gather_channels(X.data().data(), g.B, g.F, P, xfp.data());
  Tensor out({g.B, g.C, g.H, g.W});
  conv_adjoint(g, xfp.data(), K.data().data(), out.data().data());
  for (int b = 0; b < g.B; ++b)
    for (int c = 0; c < g.C; ++c) {
      double* dst = out.data().data() + (static_cast<std::size_t>(b) * g.C + c) * Q;
      for (int q = 0; q < Q; ++q) dst[q] += Bv[static_cast<std::size_t>(c)];
    }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward-only kernels

namespace eval {

Tensor dense(const Tensor& X, const Tensor& Wt, const Tensor& Bv) {
  require(X.rank() == 2 && Wt.rank() == 2 && Bv.rank() == 1, "dense: expected x[B,I], w[I,O], b[O]");
  require(X.dim(1) == Wt.dim(0) && Wt.dim(1) == Bv.dim(0),
          "dense: shape mismatch " + shape_string(X.shape()) + " . " + shape_string(Wt.shape()) + " + " +
              shape_string(Bv.shape()));
  const int B = X.dim(0), I = X.dim(1), O = Wt.dim(1);
  Tensor out({B, O});
  ConstMapMat mx(X.data().data(), B, I);
  ConstMapMat mw(Wt.data().data(), I, O);
  MapMat my(out.data().data(), B, O);
  my.noalias() = mx * mw;
  for (int r = 0; r < B; ++r)
    for (int o = 0; o < O; ++o) my(r, o) += Bv[static_cast<std::size_t>(o)];
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias, int stride) {
  return conv2d_forward(conv2d_geometry(x, kernels, bias, stride), x, kernels, bias);
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& kernels, const Tensor& bias, int stride, int out_h,
                        int out_w) {
  return conv_transpose2d_forward(conv_transpose2d_geometry(x, kernels, bias, stride, out_h, out_w), x, kernels,
                                  bias);
}

void activate(Tensor& x, Activation kind) {
  switch (kind) {
    case Activation::LeakyRelu:
      for (double& v : x.data()) v = v > 0.0 ? v : kLeakySlope * v;
      break;
    case Activation::Tanh:
      for (double& v : x.data()) v = std::tanh(v);
      break;
    case Activation::Identity:
      break;
    default:
      throw InvalidArgument("pointwise: unknown activation");
  }
}

}  // namespace eval

// ---------------------------------------------------------------------------
// Ops

Var dense(Tape& t, Var x, Var w, Var b) {
  const int ix = t.check(x), iw = t.check(w), ib = t.check(b);
  const Tensor& X = t.value_at(ix);
  const Tensor& Wt = t.value_at(iw);
  Tensor out = eval::dense(X, Wt, t.value_at(ib));
  const int B = X.dim(0), I = X.dim(1), O = Wt.dim(1);
  return t.record(std::move(out), {ix, iw, ib}, [=](Tape& tp, int self) {
    ConstMapMat g(tp.grad_at(self).data().data(), B, O);
    accumulate(tp, ix, [&](Tensor& gx) {
      MapMat(gx.data().data(), B, I).noalias() += g * ConstMapMat(tp.value_at(iw).data().data(), I, O).transpose();
    });
    accumulate(tp, iw, [&](Tensor& gw) {
      MapMat(gw.data().data(), I, O).noalias() += ConstMapMat(tp.value_at(ix).data().data(), B, I).transpose() * g;
    });
    accumulate(tp, ib, [&](Tensor& gb) {
      for (int r = 0; r < B; ++r)
        for (int o = 0; o < O; ++o) gb[static_cast<std::size_t>(o)] += g(r, o);
    });
  });
}

Var conv2d(Tape& t, Var x, Var kernels, Var bias, int stride) {
  const int ix = t.check(x), ik = t.check(kernels), ib = t.check(bias);
  const Tensor& X = t.value_at(ix);
  const Tensor& K = t.value_at(ik);
  const Tensor& Bv = t.value_at(ib);
  const ConvGeom g = conv2d_geometry(X, K, Bv, stride);
  const int P = g.Ho * g.Wo;
  Tensor out = conv2d_forward(g, X, K, Bv);

  return t.record(std::move(out), {ix, ik, ib}, [=](Tape& tp, int self) {
    const Tensor& gy = tp.grad_at(self);
    std::vector<double> gfp(static_cast<std::size_t>(g.F) * g.ncol());
    gather_channels(gy.data().data(), g.B, g.F, P, gfp.data());
    accumulate(tp, ix, [&](Tensor& gx) { conv_adjoint(g, gfp.data(), tp.value_at(ik).data().data(), gx.data().data()); });
    accumulate(tp, ik, [&](Tensor& gk) {
      conv_kernel_grad(g, tp.value_at(ix).data().data(), gfp.data(), gk.data().data());
    });
    accumulate(tp, ib, [&](Tensor& gb) {
      for (int f = 0; f < g.F; ++f) {
        const double* row = gfp.data() + static_cast<std::size_t>(f) * g.ncol();
        gb[static_cast<std::size_t>(f)] += std::accumulate(row, row + g.ncol(), 0.0);
      }
    });
  });
}

Var conv_transpose2d(Tape& t, Var x, Var kernels, Var bias, int stride, int out_h, int out_w) {
  const int ix = t.check(x), ik = t.check(kernels), ib = t.check(bias);
  const Tensor& X = t.value_at(ix);
  const Tensor& K = t.value_at(ik);
  const Tensor& Bv = t.value_at(ib);
  const ConvGeom g = conv_transpose2d_geometry(X, K, Bv, stride, out_h, out_w);
  const int P = g.Ho * g.Wo;
  const int Q = g.H * g.W;
  Tensor out = conv_transpose2d_forward(g, X, K, Bv);

  return t.record(std::move(out), {ix, ik, ib}, [=](Tape& tp, int self) {
    const Tensor& gy = tp.grad_at(self);
    accumulate(tp, ix, [&](Tensor& gx) {
      std::vector<double> fp(static_cast<std::size_t>(g.F) * g.ncol());
      conv_apply(g, gy.data().data(), tp.value_at(ik).data().data(), fp.data());
      std::vector<double> tmp(gx.numel());
      scatter_channels(fp.data(), g.B, g.F, P, tmp.data());
      for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
    });
    accumulate(tp, ik, [&](Tensor& gk) {
      std::vector<double> fp(static_cast<std::size_t>(g.F) * g.ncol());
      gather_channels(tp.value_at(ix).data().data(), g.B, g.F, P, fp.data());
      conv_kernel_grad(g, gy.data().data(), fp.data(), gk.data().data());
    });
    accumulate(tp, ib, [&](Tensor& gb) {
      for (int b = 0; b < g.B; ++b)
        for (int c = 0; c < g.C; ++c) {
          const double* src = gy.data().data() + (static_cast<std::size_t>(b) * g.C + c) * Q;
          gb[static_cast<std::size_t>(c)] += std::accumulate(src, src + Q, 0.0);
        }
    });
  });
}

Var pointwise(Tape& t, Var x, Activation kind) {
  const int ix = t.check(x);
  Tensor out = t.value_at(ix);
  eval::activate(out, kind);
  return t.record(std::move(out), {ix}, [=](Tape& tp, int self) {
    accumulate(tp, ix, [&](Tensor& gx) {
      const Tensor& g = tp.grad_at(self);
      const Tensor& in = tp.value_at(ix);
      const Tensor& y = tp.value_at(self);
      for (std::size_t i = 0; i < gx.numel(); ++i) {
        double d = 1.0;
        if (kind == Activation::LeakyRelu) d = in[i] > 0.0 ? 1.0 : kLeakySlope;
        if (kind == Activation::Tanh) d = 1.0 - y[i] * y[i];
        gx[i] += g[i] * d;
      }
    });
  });
}

Var warp(Tape& t, Var outer, Var inner) {
  const int io = t.check(outer), ii = t.check(inner);
  const Tensor& O = t.value_at(io);
  const Tensor& I = t.value_at(ii);
  require(O.shape() == I.shape() && O.rank() == 4 && O.dim(1) == 2,
          "warp: expected matching [B,2,H,W] shapes, got " + shape_string(O.shape()) + " and " +
              shape_string(I.shape()));
  const int B = O.dim(0), H = O.dim(2), W = O.dim(3);
  const std::size_t plane = static_cast<std::size_t>(H) * W;

  Tensor out({B, 2, H, W});
  for (int b = 0; b < B; ++b) {
    const double* o0 = O.data().data() + (static_cast<std::size_t>(b) * 2) * plane;
    const double* o1 = o0 + plane;
    const double* i0 = I.data().data() + (static_cast<std::size_t>(b) * 2) * plane;
    const double* i1 = i0 + plane;
    double* y0 = out.data().data() + (static_cast<std::size_t>(b) * 2) * plane;
    double* y1 = y0 + plane;
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        const std::size_t p = static_cast<std::size_t>(r) * W + c;
        const auto sr = detail::axis_stencil(r + i0[p], H);
        const auto sc = detail::axis_stencil(c + i1[p], W);
        const std::size_t a = static_cast<std::size_t>(sr.i0) * W + sc.i0;
        const std::size_t bb = static_cast<std::size_t>(sr.i0) * W + sc.i1;
        const std::size_t cc = static_cast<std::size_t>(sr.i1) * W + sc.i0;
        const std::size_t d = static_cast<std::size_t>(sr.i1) * W + sc.i1;
        y0[p] = i0[p] + detail::bilerp(o0[a], o0[bb], o0[cc], o0[d], sr.frac, sc.frac);
        y1[p] = i1[p] + detail::bilerp(o1[a], o1[bb], o1[cc], o1[d], sr.frac, sc.frac);
      }
    }
  }

  return t.record(std::move(out), {io, ii}, [=](Tape& tp, int self) {
    const Tensor& G = tp.grad_at(self);
    const Tensor& Ov = tp.value_at(io);
    const Tensor& Iv = tp.value_at(ii);
    const bool need_o = tp.needs_grad_at(io);
    const bool need_i = tp.needs_grad_at(ii);
    // Both buffers are fetched up front; io == ii under fan-out.
    Tensor* go = need_o ? &tp.grad_buffer(io) : nullptr;
    Tensor* gi = need_i ? &tp.grad_buffer(ii) : nullptr;
    for (int b = 0; b < B; ++b) {
      const std::size_t base = static_cast<std::size_t>(b) * 2 * plane;
      const double* o0 = Ov.data().data() + base;
      const double* o1 = o0 + plane;
      const double* i0 = Iv.data().data() + base;
      const double* i1 = i0 + plane;
      const double* g0 = G.data().data() + base;
      const double* g1 = g0 + plane;
      for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
          const std::size_t p = static_cast<std::size_t>(r) * W + c;
          const auto sr = detail::axis_stencil(r + i0[p], H);
          const auto sc = detail::axis_stencil(c + i1[p], W);
          const std::size_t a = static_cast<std::size_t>(sr.i0) * W + sc.i0;
          const std::size_t bb = static_cast<std::size_t>(sr.i0) * W + sc.i1;
          const std::size_t cc = static_cast<std::size_t>(sr.i1) * W + sc.i0;
          const std::size_t d = static_cast<std::size_t>(sr.i1) * W + sc.i1;
          const double fr = sr.frac, fc = sc.frac;
          if (go) {
            double* q0 = go->data().data() + base;
            double* q1 = q0 + plane;
            const double w00 = (1.0 - fr) * (1.0 - fc), w01 = (1.0 - fr) * fc;
            const double w10 = fr * (1.0 - fc), w11 = fr * fc;
            q0[a] += w00 * g0[p];
            q0[bb] += w01 * g0[p];
            q0[cc] += w10 * g0[p];
            q0[d] += w11 * g0[p];
            q1[a] += w00 * g1[p];
            q1[bb] += w01 * g1[p];
            q1[cc] += w10 * g1[p];
            q1[d] += w11 * g1[p];
          }
          if (gi) {
            double* q0 = gi->data().data() + base;
            double* q1 = q0 + plane;
            double dq_r = 0.0, dq_c = 0.0;
            if (!sr.clamped) {
              const double top0 = o0[a] + fc * (o0[bb] - o0[a]);
              const double bot0 = o0[cc] + fc * (o0[d] - o0[cc]);
              const double top1 = o1[a] + fc * (o1[bb] - o1[a]);
              const double bot1 = o1[cc] + fc * (o1[d] - o1[cc]);
              dq_r = g0[p] * (bot0 - top0) + g1[p] * (bot1 - top1);
            }
            if (!sc.clamped) {
              const double s0 = (1.0 - fr) * (o0[bb] - o0[a]) + fr * (o0[d] - o0[cc]);
              const double s1 = (1.0 - fr) * (o1[bb] - o1[a]) + fr * (o1[d] - o1[cc]);
              dq_c = g0[p] * s0 + g1[p] * s1;
            }
            q0[p] += g0[p] + dq_r;
            q1[p] += g1[p] + dq_c;
          }
        }
      }
    }
  });
}

Var reshape(Tape& t, Var x, std::vector<int> shape) {
  const int ix = t.check(x);
  const Tensor& X = t.value_at(ix);
  require(shape_numel(shape) == X.numel(),
          "reshape: cannot view " + shape_string(X.shape()) + " as " + shape_string(shape));
  Tensor out(shape, std::vector<double>(X.data().begin(), X.data().end()));
  return t.record(std::move(out), {ix}, [=](Tape& tp, int self) {
    accumulate(tp, ix, [&](Tensor& gx) {
      const Tensor& g = tp.grad_at(self);
      for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g[i];
    });
  });
}

Var slice_rows(Tape& t, Var x, int begin, int end) {
  const int ix = t.check(x);
  const Tensor& X = t.value_at(ix);
  require(X.rank() >= 1 && begin >= 0 && end > begin && end <= X.dim(0),
          "slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
              shape_string(X.shape()));
  const std::size_t row = X.numel() / static_cast<std::size_t>(X.dim(0));
  std::vector<int> shape = X.shape();
  shape[0] = end - begin;
  Tensor out(shape, std::vector<double>(X.data().begin() + static_cast<std::ptrdiff_t>(begin * row),
                                        X.data().begin() + static_cast<std::ptrdiff_t>(end * row)));
  return t.record(std::move(out), {ix}, [=](Tape& tp, int self) {
    accumulate(tp, ix, [&](Tensor& gx) {
      const Tensor& g = tp.grad_at(self);
      for (std::size_t i = 0; i < g.numel(); ++i) gx[begin * row + i] += g[i];
    });
  });
}

Var concat_rows(Tape& t, std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  std::vector<int> shape = t.value(parts[0]).shape();
  shape[0] = 0;
  std::vector<double> data;
  for (const Var& v : parts) {
    const int id = t.check(v);
    const Tensor& X = t.value_at(id);
    std::vector<int> tail(X.shape().begin() + 1, X.shape().end());
    std::vector<int> expect(shape.begin() + 1, shape.end());
    require(tail == expect, "concat_rows: trailing dimensions differ");
    ids.push_back(id);
    offsets.push_back(data.size());
    data.insert(data.end(), X.data().begin(), X.data().end());
    shape[0] += X.dim(0);
  }
  Tensor out(shape, std::move(data));
  return t.record(std::move(out), ids, [=](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      accumulate(tp, ids[k], [&](Tensor& gx) {
        for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g[offsets[k] + i];
      });
    }
  });
}

Var add(Tape& t, Var a, Var b) {
  const int ia = t.check(a), ib = t.check(b);
  require(t.value_at(ia).shape() == t.value_at(ib).shape(), "add: shapes differ");
  Tensor out = t.value_at(ia);
  const Tensor& B = t.value_at(ib);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += B[i];
  return t.record(std::move(out), {ia, ib}, [=](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    for (int id : {ia, ib}) {
      accumulate(tp, id, [&](Tensor& gx) {
        for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g[i];
      });
    }
  });
}

Var scale(Tape& t, Var x, double s) {
  const int ix = t.check(x);
  Tensor out = t.value_at(ix);
  for (double& v : out.data()) v *= s;
  return t.record(std::move(out), {ix}, [=](Tape& tp, int self) {
    accumulate(tp, ix, [&](Tensor& gx) {
      const Tensor& g = tp.grad_at(self);
      for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += s * g[i];
    });
  });
}

Var sum_sq_diff(Tape& t, Var a, Var b) {
  const int ia = t.check(a), ib = t.check(b);
  const Tensor& A = t.value_at(ia);
  const Tensor& B = t.value_at(ib);
  require(A.shape() == B.shape(), "sum_sq_diff: shapes differ");
  double total = 0.0;
  for (std::size_t i = 0; i < A.numel(); ++i) total += (A[i] - B[i]) * (A[i] - B[i]);
  return t.record(Tensor::scalar(total), {ia, ib}, [=](Tape& tp, int self) {
    const double g = tp.grad_at(self)[0];
    const Tensor& Av = tp.value_at(ia);
    const Tensor& Bv = tp.value_at(ib);
    accumulate(tp, ia, [&](Tensor& gx) {
      for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += 2.0 * g * (Av[i] - Bv[i]);
    });
    accumulate(tp, ib, [&](Tensor& gx) {
      for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] -= 2.0 * g * (Av[i] - Bv[i]);
    });
  });
}

Var sum_squares(Tape& t, Var x) {
  const int ix = t.check(x);
  const Tensor& X = t.value_at(ix);
  double total = 0.0;
  for (double v : X.data()) total += v * v;
  return t.record(Tensor::scalar(total), {ix}, [=](Tape& tp, int self) {
    accumulate(tp, ix, [&](Tensor& gx) {
      const double g = tp.grad_at(self)[0];
      const Tensor& Xv = tp.value_at(ix);
      for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += 2.0 * g * Xv[i];
    });
  });
}

Var sum(Tape& t, Var x) {
  const int ix = t.check(x);
  const Tensor& X = t.value_at(ix);
  const double total = std::accumulate(X.data().begin(), X.data().end(), 0.0);
  return t.record(Tensor::scalar(total), {ix}, [=](Tape& tp, int self) {
    accumulate(tp, ix, [&](Tensor& gx) {
      const double g = tp.grad_at(self)[0];
      for (double& v : gx.data()) v += g;
    });
  });
}

Var latent_inverse_consistency(Tape& t, Var z_ab, Var z_ba) {
  const int ia = t.check(z_ab), ib = t.check(z_ba);
  const Tensor& A = t.value_at(ia);
  const Tensor& Bt = t.value_at(ib);
  require(A.shape() == Bt.shape() && A.rank() == 2, "latent_inverse_consistency: expected matching [B,L]");
  const int rows = A.dim(0), L = A.dim(1);
  double total = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double* a = A.data().data() + static_cast<std::size_t>(r) * L;
    const double* b = Bt.data().data() + static_cast<std::size_t>(r) * L;
    double ab = 0.0, aa = 0.0, bb = 0.0, s2 = 0.0;
    for (int i = 0; i < L; ++i) {
      ab += a[i] * b[i];
      aa += a[i] * a[i];
      bb += b[i] * b[i];
      s2 += (a[i] + b[i]) * (a[i] + b[i]);
    }
    const double na = std::sqrt(aa), nb = std::sqrt(bb);
    const double cosine = (na < kDegenerateNorm || nb < kDegenerateNorm) ? 0.0 : ab / (na * nb);
    total += 0.5 * (1.0 + cosine) + s2;
  }
  return t.record(Tensor::scalar(total), {ia, ib}, [=](Tape& tp, int self) {
    const double g = tp.grad_at(self)[0];
    const Tensor& Av = tp.value_at(ia);
    const Tensor& Bv = tp.value_at(ib);
    Tensor* ga = tp.needs_grad_at(ia) ? &tp.grad_buffer(ia) : nullptr;
    Tensor* gb = tp.needs_grad_at(ib) ? &tp.grad_buffer(ib) : nullptr;
    for (int r = 0; r < rows; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * L;
      const double* a = Av.data().data() + off;
      const double* b = Bv.data().data() + off;
      double ab = 0.0, aa = 0.0, bb = 0.0;
      for (int i = 0; i < L; ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
      }
      const double na = std::sqrt(aa), nb = std::sqrt(bb);
      const bool degenerate = na < kDegenerateNorm || nb < kDegenerateNorm;
      const double cosine = degenerate ? 0.0 : ab / (na * nb);
      for (int i = 0; i < L; ++i) {
        const double mag = 2.0 * (a[i] + b[i]);
        double dca = 0.0, dcb = 0.0;
        if (!degenerate) {
          dca = b[i] / (na * nb) - cosine * a[i] / aa;
          dcb = a[i] / (na * nb) - cosine * b[i] / bb;
        }
        if (ga) (*ga)[off + i] += g * (0.5 * dca + mag);
        if (gb) (*gb)[off + i] += g * (0.5 * dcb + mag);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size()) throw ShapeMismatch("adam_step: parameter and gradient counts differ");
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.shape(), 0.0);
      state.v.emplace_back(p.shape(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeMismatch("adam_step: state does not match parameter count");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].shape() != grads[k].shape() || params[k].shape() != state.m[k].shape()) {
      throw ShapeMismatch("adam_step: shape mismatch for parameter " + std::to_string(k));
    }
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    const Tensor& g = grads[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace leda::ad
