#pragma once

#include <cstdint>
#include <vector>

#include "leda/field.hpp"
#include "leda/group_maps.hpp"
#include "leda/random.hpp"

namespace leda {

/// Synthetic family: v = sum_j a_j v_j over a fixed basis of Gaussian-smoothed
/// white-noise fields; fwd = exp(v), bwd = exp(-v) through the RK4 oracle.
struct SynthConfig {
  Grid2 grid{32, 32};
  int n_pairs = 500;
  double smooth_sigma = 3.0;
  double max_disp = 3.0;
  int n_factors = 4;
  std::vector<double> covariate_weights;  // empty -> default_covariate_weights
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
  int oracle_steps = 256;
};

void validate(const SynthConfig& cfg);

/// 1, -1/2, 1/3, -1/4, ...
std::vector<double> default_covariate_weights(int n_factors);

struct SyntheticPair {
  DeformationField fwd;
  DeformationField bwd;
  VectorField velocity;
  std::vector<double> coeffs;
  double covariate = 0.0;
};

/// Separable truncated Gaussian (radius ceil(3 sigma)) with clamped borders.
VectorField gaussian_smooth(const VectorField& f, double sigma);

/// Builds the basis once and draws pairs by index.
class SyntheticFamily {
 public:
  explicit SyntheticFamily(SynthConfig cfg);

  const SynthConfig& config() const noexcept { return cfg_; }
  const std::vector<VectorField>& basis() const noexcept { return basis_; }

  /// Coefficients are drawn from N(0, 1) and redrawn until max |v| <= max_disp.
  std::vector<double> coefficients(int index) const;
  VectorField velocity(std::span<const double> coeffs) const;
  SyntheticPair pair(int index) const;

 private:
  SynthConfig cfg_;
  std::vector<double> weights_;
  std::vector<VectorField> basis_;
};

SyntheticPair gen_synthetic_pair(const SynthConfig& cfg, int index);

}  // namespace leda
