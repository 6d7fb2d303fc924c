#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "leda/field.hpp"
#include "leda/group_maps.hpp"
#include "leda/model.hpp"

namespace leda {

/// Mean, orthonormal principal axes (rows, eigenvalue-descending), their
/// variances and the share of total variance each one carries.
struct PcaModel {
  std::vector<double> mean;
  std::vector<std::vector<double>> components;
  std::vector<double> eigenvalues;
  std::vector<double> explained_fraction;

  std::size_t dim() const noexcept { return mean.size(); }
  std::size_t rank() const noexcept { return components.size(); }
};

/// Exact thin SVD of the centered data. Eigenvalues are s^2 / (n - 1).
/// Component signs are fixed so the largest-magnitude entry is positive.
PcaModel pca_fit(std::span<const std::vector<double>> samples, int k);
std::vector<double> pca_project(const PcaModel& model, std::span<const double> x);
std::vector<double> pca_reconstruct(const PcaModel& model, std::span<const double> coords);

/// Flattens a field's (row, col, component) data.
std::vector<double> flatten(const VectorField& f);
VectorField unflatten(std::span<const double> x, Grid2 grid);

using LogFn = std::function<VectorField(const DeformationField&)>;

/// exp of the arithmetic mean of log_fn over `fields`.
DeformationField log_euclidean_mean(std::span<const DeformationField> fields, const LogFn& log_fn,
                                    const ExpConfig& exp_cfg = {});

struct RegressionModel {
  std::vector<double> weights;  // on standardized inputs
  double intercept = 0.0;
  std::vector<double> input_mean;
  std::vector<double> input_scale;
  double train_r = 0.0;
  double test_r = 0.0;
  bool constant_target = false;  // r undefined, reported as 0
  std::size_t n_train = 0;
  std::size_t n_test = 0;

  double predict(std::span<const double> x) const;
};

/// Pearson correlation; 0 when either side has zero variance.
double pearson_r(std::span<const double> a, std::span<const double> b);

/// OLS of targets on standardized latents with a 1e-8 ridge. The split is a
/// seeded permutation; the last round(test_fraction * n) samples are held out.
RegressionModel ols_fit(std::span<const LatentVector> latents, std::span<const double> targets,
                        double test_fraction = 0.2, std::uint64_t seed = 0);

/// Stage-0 decodes of z_start + i * scale * direction, i = 0 .. steps-1.
std::vector<DeformationField> latent_walk(const LedaModel& model, const LatentVector& z_start,
                                          const LatentVector& direction, int steps, double scale);

/// Axes with the largest |weight| (ties to the lower index), each returned as
/// a signed unit latent direction after undoing the standardization.
std::vector<LatentVector> top_regression_directions(const RegressionModel& model, int k);

std::string pca_to_json(const PcaModel& model, int indent = 2);
std::string regression_to_json(const RegressionModel& model, int indent = 2);

}  // namespace leda
