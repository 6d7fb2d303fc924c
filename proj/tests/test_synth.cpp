#include <cmath>

#include "doctest.h"
#include "leda/synth.hpp"
#include "oracles.hpp"

using namespace leda;

TEST_CASE("synth config validation") {
  SynthConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.max_disp = 8.0;  // not below min(H, W) / 4
  CHECK_THROWS_AS(validate(cfg), InvalidArgument);
  cfg = {};
  cfg.smooth_sigma = 0.5;
  CHECK_THROWS_AS(validate(cfg), InvalidArgument);
}

TEST_CASE("default covariate weights") {
  const auto w = default_covariate_weights(4);
  REQUIRE(w.size() == 4);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == -0.5);
  CHECK(w[2] == doctest::Approx(1.0 / 3));
  CHECK(w[3] == -0.25);
}

TEST_CASE("gaussian smoothing") {
  const Grid2 g{12, 12};
  const VectorField c = testing::constant_field(g, 2.0, -1.0);
  const VectorField s = gaussian_smooth(c, 2.0);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s.data()[i] == doctest::Approx(c.data()[i]).epsilon(1e-12));

  VectorField spike(g);
  spike.at(6, 6, 0) = 1.0;
  const VectorField blurred = gaussian_smooth(spike, 1.0);
  double total = 0.0;
  for (int r = 0; r < g.height; ++r)
    for (int q = 0; q < g.width; ++q) total += blurred.at(r, q, 0);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(blurred.at(6, 5, 0) == doctest::Approx(blurred.at(5, 6, 0)).epsilon(1e-14));
  CHECK(blurred.at(6, 6, 0) > blurred.at(6, 7, 0));
}

TEST_CASE("synthetic pairs") {
  SynthConfig cfg;
  cfg.seed = 7;
  SUBCASE("zero displacement gives the identity") {
    cfg.max_disp = 0.0;
    const SyntheticPair p = gen_synthetic_pair(cfg, 3);
    CHECK(p.fwd == make_identity(cfg.grid));
    CHECK(p.bwd == make_identity(cfg.grid));
  }
  SUBCASE("deterministic per seed and index") {
    const SyntheticPair a = gen_synthetic_pair(cfg, 5), b = gen_synthetic_pair(cfg, 5);
    CHECK(a.fwd == b.fwd);
    CHECK(a.bwd == b.bwd);
    CHECK(a.velocity == b.velocity);
    CHECK(a.coeffs == b.coeffs);
    CHECK(a.covariate == b.covariate);
    CHECK_FALSE(gen_synthetic_pair(cfg, 6).velocity == a.velocity);
  }
  SUBCASE("velocity bounded, fields diffeomorphic and mutually inverse") {
    const SyntheticFamily fam(cfg);
    for (int i = 0; i < 8; ++i) {
      const SyntheticPair p = fam.pair(i);
      CHECK(max_norm(p.velocity) <= cfg.max_disp + 1e-12);
      CHECK(min_jacobian_det(p.fwd) > 0.0);
      CHECK(min_jacobian_det(p.bwd) > 0.0);
      CHECK(inverse_consistency_residual(p.fwd, p.bwd) <= 0.05);
    }
  }
  SUBCASE("covariate follows the coefficients") {
    cfg.noise_sigma = 0.0;
    const SyntheticPair p = gen_synthetic_pair(cfg, 2);
    const auto w = default_covariate_weights(cfg.n_factors);
    double want = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) want += w[j] * p.coeffs[j];
    CHECK(p.covariate == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("velocity is linear in the coefficients") {
    const SyntheticFamily fam(cfg);
    const std::vector<double> a{1, 0, 0, 0}, b{0, 0, 2, 0}, ab{1, 0, 2, 0};
    const VectorField s = sum(fam.velocity(a), fam.velocity(b));
    const VectorField v = fam.velocity(ab);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.data()[i] == doctest::Approx(s.data()[i]).epsilon(1e-12));
  }
}
