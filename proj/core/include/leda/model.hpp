#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "leda/autodiff.hpp"
#include "leda/field.hpp"

namespace leda {

/// Hyperparameters of the Siamese autoencoder and its training loop.
struct LedaConfig {
  int latent_dim = 32;
  int n_stages = 4;  // roots 2^0 .. 2^n_stages
  double alpha_rec = 1.0;
  double alpha_inv = 0.5;
  double alpha_linv = 0.1;
  double lr = 1e-3;
  int batch_size = 8;
  int epochs = 200;
  std::uint64_t seed = 0;

  friend bool operator==(const LedaConfig&, const LedaConfig&) = default;
};

void validate(const LedaConfig& cfg);

struct LatentVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  friend bool operator==(const LatentVector&, const LatentVector&) = default;
};

LatentVector operator-(const LatentVector& z);
LatentVector operator+(const LatentVector& a, const LatentVector& b);
LatentVector operator*(double s, const LatentVector& z);
double dot(const LatentVector& a, const LatentVector& b);
double norm(const LatentVector& z);
/// Cosine similarity; 0 if either vector is (numerically) zero.
double cosine(const LatentVector& a, const LatentVector& b);

/// A forward field and its inverse.
struct FieldPair {
  DeformationField fwd;
  DeformationField bwd;
};

struct NamedTensor {
  std::string name;
  ad::Tensor value;
};

/// All encoder and decoder weights in a fixed order.
struct ModelParams {
  std::vector<NamedTensor> tensors;

  const ad::Tensor& at(const std::string& name) const;
  ad::Tensor& at(const std::string& name);
  std::size_t count() const;
  friend bool operator==(const ModelParams&, const ModelParams&);
};

/// Names and shapes of every parameter for a grid and configuration.
std::vector<std::pair<std::string, std::vector<int>>> parameter_layout(Grid2 grid, const LedaConfig& cfg);

struct LossBreakdown {
  double rec = 0.0;
  double inv = 0.0;
  double linv = 0.0;
  double total = 0.0;
};

/// Encoder: three stride-2 3x3 convolutions (2->16->32->64, leaky ReLU)
/// and a dense map to the latent. Decoder: dense map to 64 x H/8 x W/8,
/// three stride-2 transposed convolutions (64->32->16->2), linear output.
/// One decoder serves every stage; stage n decodes z / 2^n into the 2^n-th
/// root of the encoded field.
class LedaModel {
 public:
  /// Fresh model with seeded fan-in scaled uniform weights.
  LedaModel(Grid2 grid, LedaConfig cfg);
  LedaModel(Grid2 grid, LedaConfig cfg, ModelParams params);

  const Grid2& grid() const noexcept { return grid_; }
  const LedaConfig& config() const noexcept { return cfg_; }
  const ModelParams& params() const noexcept { return params_; }
  ModelParams& params() noexcept { return params_; }

  LatentVector encode(const DeformationField& phi) const;
  std::vector<LatentVector> encode(std::span<const DeformationField> fields) const;
  /// Decodes z / 2^stage; stage in [0, n_stages].
  DeformationField decode_root(const LatentVector& z, int stage) const;
  /// Every root 2^0 .. 2^n_stages for one latent.
  std::vector<DeformationField> decode_roots(const LatentVector& z) const;
  /// 2^N times the deepest decoded root.
  VectorField infer_log(const DeformationField& phi) const;

 private:
  Grid2 grid_;
  LedaConfig cfg_;
  ModelParams params_;
};

// Loss terms written directly over field_core operations.

/// sum_n mean_pixels |C_{2^n}(roots[n]) - target|^2
double reconstruction_loss(std::span<const DeformationField> roots, const DeformationField& target);
/// sum_n mean_pixels |ab_n o ba_n - id|^2 + |ba_n o ab_n - id|^2
double inverse_loss(std::span<const DeformationField> roots_ab, std::span<const DeformationField> roots_ba);

struct LatentLoss {
  double value = 0.0;
  bool degenerate = false;  // a norm fell below 1e-12; cosine term taken as 0.5
};
/// (1 + cos(z_ab, z_ba)) / 2 + |z_ab + z_ba|^2
LatentLoss loss_linv(const LatentVector& z_ab, const LatentVector& z_ba);

double loss_rec(const LedaModel& model, const FieldPair& pair);
double loss_inv(const LedaModel& model, const FieldPair& pair);
LossBreakdown total_loss(const LedaModel& model, const FieldPair& pair);

/// Mean over `pairs` of the weighted loss, evaluated on a tape. When `grads`
/// is non-null it receives one gradient per parameter tensor, in order.
LossBreakdown loss_and_gradient(const LedaModel& model, std::span<const FieldPair> pairs,
                                std::vector<ad::Tensor>* grads);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double rec = 0.0;
  double inv = 0.0;
  double linv = 0.0;
  double total = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

/// `epoch=<k> rec=<v> inv=<v> linv=<v> total=<v>`
std::string format_progress(const EpochRecord& rec);

struct TrainResult {
  LedaModel model;
  std::vector<EpochRecord> history;
};

using ProgressFn = std::function<void(const EpochRecord&)>;

/// Adam over seeded shuffled mini-batches. Throws TrainingDiverged on a
/// non-finite batch loss.
TrainResult train(std::span<const FieldPair> data, Grid2 grid, const LedaConfig& cfg,
                  const ProgressFn& progress = {});

}  // namespace leda
