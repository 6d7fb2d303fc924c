#include "leda/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace leda {

void validate(const SynthConfig& cfg) {
  require_valid(cfg.grid);
  if (cfg.n_pairs < 0) throw InvalidArgument("SynthConfig: n_pairs must be >= 0");
  if (cfg.smooth_sigma < 1.0) throw InvalidArgument("SynthConfig: smooth_sigma must be >= 1");
  if (cfg.max_disp < 0.0 || cfg.max_disp >= std::min(cfg.grid.height, cfg.grid.width) / 4.0) {
    throw InvalidArgument("SynthConfig: max_disp must lie in [0, min(H, W) / 4)");
  }
  if (cfg.n_factors < 1) throw InvalidArgument("SynthConfig: n_factors must be >= 1");
  if (!cfg.covariate_weights.empty() && static_cast<int>(cfg.covariate_weights.size()) != cfg.n_factors) {
    throw InvalidArgument("SynthConfig: covariate_weights must have n_factors entries");
  }
  if (cfg.noise_sigma < 0.0) throw InvalidArgument("SynthConfig: noise_sigma must be >= 0");
  if (cfg.oracle_steps < 16) throw InvalidArgument("SynthConfig: oracle_steps must be >= 16");
}

std::vector<double> default_covariate_weights(int n_factors) {
  std::vector<double> w(static_cast<std::size_t>(n_factors));
  for (int j = 0; j < n_factors; ++j) w[static_cast<std::size_t>(j)] = (j % 2 ? -1.0 : 1.0) / (j + 1);
  return w;
}

VectorField gaussian_smooth(const VectorField& f, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian_smooth: sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * i * i / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  const Grid2& g = f.grid();
  auto clampi = [](int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); };
  VectorField rows(g);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c)
      for (int k = 0; k < 2; ++k) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<std::size_t>(i + radius)] * f.at(r, clampi(c + i, g.width), k);
        rows.at(r, c, k) = acc;
      }
  VectorField out(g);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c)
      for (int k = 0; k < 2; ++k) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<std::size_t>(i + radius)] * rows.at(clampi(r + i, g.height), c, k);
        out.at(r, c, k) = acc;
      }
  return out;
}

namespace {

constexpr std::uint64_t kBasisStream = 0xB0A515;
constexpr std::uint64_t kPairStream = 0x9A125;
constexpr int kMaxRedraws = 256;

}  // namespace

SyntheticFamily::SyntheticFamily(SynthConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  weights_ = cfg_.covariate_weights.empty() ? default_covariate_weights(cfg_.n_factors) : cfg_.covariate_weights;
  const double per_basis = cfg_.max_disp / std::sqrt(static_cast<double>(cfg_.n_factors));
  for (int j = 0; j < cfg_.n_factors; ++j) {
    std::mt19937_64 rng(derive_seed(cfg_.seed, kBasisStream, static_cast<std::uint64_t>(j)));
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorField noise(cfg_.grid);
    for (double& x : noise.data()) x = normal(rng);
    VectorField b = gaussian_smooth(noise, cfg_.smooth_sigma);
    const double peak = max_norm(b);
    basis_.push_back(peak > 0.0 ? scaled(b, per_basis / peak) : VectorField(cfg_.grid));
  }
}

std::vector<double> SyntheticFamily::coefficients(int index) const {
  std::mt19937_64 rng(derive_seed(cfg_.seed, kPairStream, static_cast<std::uint64_t>(index)));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> a(static_cast<std::size_t>(cfg_.n_factors));
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    for (double& x : a) x = normal(rng);
    if (max_norm(velocity(a)) <= cfg_.max_disp) return a;
  }
  // Practically unreachable; shrink the last draw onto the bound.
  const double peak = max_norm(velocity(a));
  for (double& x : a) x *= cfg_.max_disp / peak;
  return a;
}

VectorField SyntheticFamily::velocity(std::span<const double> coeffs) const {
  if (coeffs.size() != basis_.size()) throw InvalidArgument("velocity: expected one coefficient per basis field");
  VectorField v(cfg_.grid);
  for (std::size_t j = 0; j < basis_.size(); ++j) {
    auto vd = v.data();
    auto bd = basis_[j].data();
    for (std::size_t i = 0; i < vd.size(); ++i) vd[i] += coeffs[j] * bd[i];
  }
  return v;
}

SyntheticPair SyntheticFamily::pair(int index) const {
  if (index < 0) throw InvalidArgument("pair index must be >= 0");
  SyntheticPair p;
  p.coeffs = coefficients(index);
  p.velocity = velocity(p.coeffs);
  const ExpConfig ode{6, cfg_.oracle_steps};
  p.fwd = exp_ode_oracle(p.velocity, 1.0, ode);
  p.bwd = exp_ode_oracle(p.velocity, -1.0, ode);

  std::mt19937_64 rng(derive_seed(cfg_.seed, kPairStream ^ 0xC0FA, static_cast<std::uint64_t>(index)));
  std::normal_distribution<double> normal(0.0, 1.0);
  double c = 0.0;
  for (std::size_t j = 0; j < weights_.size(); ++j) c += weights_[j] * p.coeffs[j];
  p.covariate = c + cfg_.noise_sigma * normal(rng);
  return p;
}

SyntheticPair gen_synthetic_pair(const SynthConfig& cfg, int index) { return SyntheticFamily(cfg).pair(index); }

}  // namespace leda
