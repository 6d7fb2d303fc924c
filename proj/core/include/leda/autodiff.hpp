#pragma once

// Minimal reverse-mode differentiation over dense row-major tensors. The op
// set is closed: exactly what the autoencoder and the square-root solver use.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "leda/error.hpp"

namespace leda::ad {

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

  const std::vector<int>& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t numel() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Value of a single-element tensor.
  double item() const;
  /// Same data, new shape with the same element count.
  void reshape(std::vector<int> shape);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<int>& shape);
std::size_t shape_numel(const std::vector<int>& shape);

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  const Tape* tape = nullptr;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);

  const Tensor& value(Var v) const;
  /// Accumulated gradient; zeros if the node received none.
  const Tensor& grad(Var v);
  bool requires_grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse accumulation from a single-element `loss`. Gradients from a
  /// previous call are cleared first.
  void backward(Var loss);

  // Op implementation surface.
  Var record(Tensor value, std::vector<int> inputs, BackwardFn fn);
  const Tensor& value_at(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor& grad_at(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool needs_grad_at(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  /// Gradient buffer of node `id`, zero-initialized on first access.
  Tensor& grad_buffer(int id);
  int check(Var v) const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<int> inputs;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

/// Free-function form of Tape::backward.
inline void backward(Tape& tape, Var loss) { tape.backward(loss); }

enum class Activation { LeakyRelu, Tanh, Identity };
inline constexpr double kLeakySlope = 0.1;

/// x[B,I] . w[I,O] + b[O]
Var dense(Tape& tape, Var x, Var w, Var b);

/// Cross-correlation with symmetric zero padding (k-1)/2. x[B,C,H,W],
/// k[F,C,k,k] (k odd), b[F] -> [B,F,ceil(H/s),ceil(W/s)].
Var conv2d(Tape& tape, Var x, Var kernels, Var bias, int stride);

/// Exact adjoint of conv2d in its input, plus a bias. x[B,F,H',W'],
/// k[F,C,k,k], b[C] -> [B,C,out_h,out_w] with ceil(out_h/s) == H'.
Var conv_transpose2d(Tape& tape, Var x, Var kernels, Var bias, int stride, int out_h, int out_w);

Var pointwise(Tape& tape, Var x, Activation kind);

/// Forward-only forms of the ops above, for inference without a tape.
namespace eval {
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias, int stride);
Tensor conv_transpose2d(const Tensor& x, const Tensor& kernels, const Tensor& bias, int stride, int out_h, int out_w);
void activate(Tensor& x, Activation kind);
}  // namespace eval

/// Batched field composition: out = inner + sample(outer, x + inner) with
/// clamped bilinear sampling, channel 0 = row, channel 1 = column. Shapes
/// [B,2,H,W]. A clamped axis passes no gradient to the coordinate.
Var warp(Tape& tape, Var outer, Var inner);

Var reshape(Tape& tape, Var x, std::vector<int> shape);
/// Rows [begin, end) along dimension 0.
Var slice_rows(Tape& tape, Var x, int begin, int end);
/// Concatenation along dimension 0.
Var concat_rows(Tape& tape, std::span<const Var> parts);
Var add(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var x, double s);
/// sum((a - b)^2) as a single-element tensor.
Var sum_sq_diff(Tape& tape, Var a, Var b);
Var sum_squares(Tape& tape, Var x);
Var sum(Tape& tape, Var x);

/// Sum over rows of (1 + cos(a_i, b_i)) / 2 + |a_i + b_i|^2 for a,b[B,L].
/// Rows where either norm is below kDegenerateNorm use 0.5 for the cosine
/// term and pass no gradient through it.
Var latent_inverse_consistency(Tape& tape, Var z_ab, Var z_ba);
inline constexpr double kDegenerateNorm = 1e-12;

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

/// Bias-corrected Adam update in place. Moments are allocated on first use.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace leda::ad
