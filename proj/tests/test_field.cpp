#include <cmath>
#include <limits>

#include "doctest.h"
#include "leda/field.hpp"
#include "leda/group_maps.hpp"
#include "oracles.hpp"

using namespace leda;
using namespace leda::testing;

TEST_CASE("grid validity") {
  CHECK(Grid2{4, 4}.valid());
  CHECK_FALSE(Grid2{3, 8}.valid());
  CHECK_THROWS_AS(make_identity({2, 5}), InvalidArgument);
  CHECK_THROWS_AS(VectorField(Grid2{4, 4}, std::vector<double>(31)), ShapeMismatch);
}

TEST_CASE("identity") {
  const DeformationField id = make_identity({4, 4});
  CHECK(id.displacement.size() == 32);
  for (double x : id.displacement.data()) CHECK(x == 0.0);
  const ScalarField ld = jacobian_logdet(id);
  for (double x : ld.data()) CHECK(x == 0.0);
}

TEST_CASE("identity laws are bitwise") {
  const Grid2 g{12, 9};
  const DeformationField f{smooth_field(g, 2.0, 11)};
  const DeformationField id = make_identity(g);
  CHECK(compose(id, f) == f);
  CHECK(compose(f, id) == f);
}

TEST_CASE("sampling") {
  const Grid2 g{6, 7};
  const VectorField f = smooth_field(g, 1.5, 3);

  SUBCASE("exact at nodes") {
    for (int r = 0; r < g.height; ++r)
      for (int c = 0; c < g.width; ++c) {
        const Vec2 s = sample(f, r, c);
        CHECK(s[0] == f.at(r, c, 0));
        CHECK(s[1] == f.at(r, c, 1));
      }
  }
  SUBCASE("constants survive clamping") {
    const VectorField k = constant_field(g, 0.7, -1.3);
    const std::vector<Vec2> pts{{-4.0, 2.2}, {2.5, 3.5}, {40.0, -9.0}, {5.999, 6.0}};
    for (const Vec2& v : sample_displacement(k, pts)) {
      CHECK(v[0] == 0.7);
      CHECK(v[1] == -1.3);
    }
  }
  SUBCASE("matches explicit bilinear weights") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ur(0.0, g.height - 1.0), uc(0.0, g.width - 1.0);
    for (int i = 0; i < 50; ++i) {
      const double r = ur(rng), c = uc(rng);
      const int r0 = static_cast<int>(r), c0 = static_cast<int>(c);
      const Vec2 s = sample(f, r, c);
      for (int k = 0; k < 2; ++k) {
        const double want = bilinear_weights(f.at(r0, c0, k), f.at(r0, c0 + 1, k), f.at(r0 + 1, c0, k),
                                             f.at(r0 + 1, c0 + 1, k), r - r0, c - c0);
        CHECK(s[k] == doctest::Approx(want).epsilon(1e-13));
      }
    }
  }
  SUBCASE("cell centre of unit corners") {
    VectorField u(Grid2{4, 4});
    u.at(0, 0, 0) = 1.0;
    u.at(0, 1, 0) = 2.0;
    u.at(1, 0, 0) = 3.0;
    u.at(1, 1, 0) = 6.0;
    CHECK(sample(u, 0.5, 0.5)[0] == doctest::Approx(bilinear_weights(1, 2, 3, 6, 0.5, 0.5)));
  }
  SUBCASE("rejects non-finite coordinates") {
    const std::vector<Vec2> bad{{std::numeric_limits<double>::quiet_NaN(), 1.0}};
    CHECK_THROWS_AS(sample_displacement(f, bad), InvalidArgument);
  }
}

TEST_CASE("composition") {
  const Grid2 g{16, 16};
  SUBCASE("identity with identity") { CHECK(compose(make_identity(g), make_identity(g)) == make_identity(g)); }
  SUBCASE("constant translations add exactly") {
    const DeformationField a{constant_field(g, 1.0, 0.0)};
    const DeformationField b{constant_field(g, 0.25, -0.5)};
    CHECK(compose(a, a).displacement == constant_field(g, 2.0, 0.0));
    CHECK(compose(a, b).displacement == constant_field(g, 1.25, -0.5));
  }
  SUBCASE("affine fields compose to the product map inside") {
    const double s = 1.1, cr = 7.5, cc = 7.5;
    const DeformationField a{affine_field(g, s, 0, 0, s, cr, cc)};
    const DeformationField aa = compose(a, a);
    const VectorField want = affine_field(g, s * s, 0, 0, s * s, cr, cc);
    for (int r = 0; r < g.height; ++r)
      for (int c = 0; c < g.width; ++c) {
        const double pr = r + a.displacement.at(r, c, 0), pc = c + a.displacement.at(r, c, 1);
        if (pr < 0 || pr > g.height - 1 || pc < 0 || pc > g.width - 1) continue;
        CHECK(aa.displacement.at(r, c, 0) == doctest::Approx(want.at(r, c, 0)).epsilon(1e-12));
        CHECK(aa.displacement.at(r, c, 1) == doctest::Approx(want.at(r, c, 1)).epsilon(1e-12));
      }
  }
  SUBCASE("grid mismatch") {
    CHECK_THROWS_AS(compose(make_identity(g), make_identity({8, 8})), GridMismatch);
  }
}

TEST_CASE("self composition") {
  const Grid2 g{20, 20};
  const DeformationField f{smooth_field(g, 0.5, 21)};
  CHECK(self_compose(f, 0) == f);
  CHECK(self_compose(make_identity(g), 5) == make_identity(g));
  const DeformationField f2 = self_compose(f, 1);
  CHECK(self_compose(f, 2) == compose(f2, f2));
  CHECK_THROWS_AS(self_compose(f, -1), InvalidArgument);
}

TEST_CASE("self composition by squaring agrees with sequential composition") {
  // Squaring and the left fold sample at different points, so they differ by
  // interpolation error, which shrinks quickly with the field size.
  const Grid2 g{32, 32};
  auto gap = [&](double amp, int n) {
    const DeformationField f{smooth_field(g, amp, 8)};
    DeformationField seq = f;
    for (int i = 1; i < (1 << n); ++i) seq = compose(f, seq);
    return std::pair{rms_difference(self_compose(f, n).displacement, seq.displacement), rms_of(seq.displacement)};
  };
  CHECK(gap(0.5, 1).first == 0.0);
  for (int n : {2, 3}) {
    CAPTURE(n);
    CHECK(gap(0.01, n).first < 1e-6);
    const auto [d, size] = gap(2.0, n);  // max |u| about 1.15
    CHECK(d < 0.01 * size);
  }
}

TEST_CASE("negate and arithmetic") {
  const Grid2 g{8, 8};
  const VectorField f = smooth_field(g, 1.0, 4);
  CHECK(negate(VectorField(g)) == VectorField(g));
  CHECK(negate(negate(f)) == f);
  CHECK(sum(f, negate(f)) == VectorField(g));
  CHECK(difference(f, f) == VectorField(g));
  CHECK(scaled(f, 2.0) == sum(f, f));
}

TEST_CASE("residual metrics") {
  const Grid2 g{16, 16};
  SUBCASE("identity pair") { CHECK(inverse_consistency_residual(make_identity(g), make_identity(g)) == 0.0); }
  SUBCASE("opposite translations on the interior") {
    const DeformationField p{constant_field(g, 1.5, -0.5)}, m{constant_field(g, -1.5, 0.5)};
    CHECK(inverse_consistency_residual(p, m, 2) == 0.0);
  }
  SUBCASE("rms and max norm") {
    const VectorField c = constant_field(g, 3.0, 4.0);
    CHECK(rms(c) == doctest::Approx(5.0));
    CHECK(max_norm(c) == doctest::Approx(5.0));
    CHECK(rms_difference(c, VectorField(g)) == doctest::Approx(5.0));
    CHECK(relative_l2(scaled(c, 1.1), c) == doctest::Approx(0.1));
  }
}

TEST_CASE("jacobian log-determinant") {
  const Grid2 g{12, 14};
  SUBCASE("uniform scale") {
    const double s = 1.1;
    const ScalarField ld = jacobian_logdet(DeformationField{affine_field(g, s, 0, 0, s, 5.5, 6.5)});
    for (int r = 1; r < g.height - 1; ++r)
      for (int c = 1; c < g.width - 1; ++c) CHECK(ld.at(r, c) == doctest::Approx(2 * std::log(1.1)).epsilon(1e-12));
  }
  SUBCASE("general affine map, every point") {
    const double a = 1.2, b = 0.15, c = -0.1, d = 0.9;
    const ScalarField ld = jacobian_logdet(DeformationField{affine_field(g, a, b, c, d, 3.0, 4.0)});
    const double want = std::log(a * d - b * c);
    for (double x : ld.data()) CHECK(std::abs(x - want) < 1e-12);
  }
  SUBCASE("folds become NaN") {
    const ScalarField ld = jacobian_logdet(DeformationField{affine_field(g, -0.5, 0, 0, 1.0, 6, 6)});
    for (double x : ld.data()) CHECK(std::isnan(x));
    CHECK(min_jacobian_det(DeformationField{affine_field(g, -0.5, 0, 0, 1.0, 6, 6)}) < 0.0);
  }
}

TEST_CASE("jacobian log-determinant against a refined-grid oracle") {
  // u sampled analytically on a grid of spacing 1/2; the coarse central
  // difference should agree with the fine one to discretisation accuracy.
  const Grid2 g{32, 32};
  const double pi = std::acos(-1.0);
  auto ur = [&](double y, double x) { return 0.8 * std::sin(2 * pi * y / 32.0) * std::cos(2 * pi * x / 32.0); };
  auto uc = [&](double y, double x) { return 0.6 * std::cos(2 * pi * y / 32.0 + 0.3) * std::sin(2 * pi * x / 32.0); };
  VectorField u(g);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) {
      u.at(r, c, 0) = ur(r, c);
      u.at(r, c, 1) = uc(r, c);
    }
  const ScalarField ld = jacobian_logdet(DeformationField{u});
  const double h = 0.5;
  double sq = 0.0;
  int n = 0;
  for (int r = 1; r < g.height - 1; ++r)
    for (int c = 1; c < g.width - 1; ++c) {
      const double a = 1 + (ur(r + h, c) - ur(r - h, c)) / (2 * h);
      const double b = (ur(r, c + h) - ur(r, c - h)) / (2 * h);
      const double cc = (uc(r + h, c) - uc(r - h, c)) / (2 * h);
      const double d = 1 + (uc(r, c + h) - uc(r, c - h)) / (2 * h);
      const double e = ld.at(r, c) - std::log(a * d - b * cc);
      sq += e * e;
      ++n;
    }
  CHECK(std::sqrt(sq / n) < 1e-2);
}

TEST_CASE("image warping") {
  const Grid2 g{10, 10};
  ScalarField board(g);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) board.at(r, c) = ((r / 2 + c / 2) % 2) ? 1.0 : 0.0;

  CHECK(warp_image(board, make_identity(g)) == board);
  const ScalarField flat(g, 0.25);
  CHECK(warp_image(flat, DeformationField{smooth_field(g, 2.0, 9)}) == flat);

  const ScalarField shifted = warp_image(board, DeformationField{constant_field(g, 1.0, 0.0)});
  for (int r = 0; r < g.height - 1; ++r)
    for (int c = 0; c < g.width; ++c) CHECK(shifted.at(r, c) == board.at(r + 1, c));
  CHECK_THROWS_AS(warp_image(ScalarField({8, 8}), make_identity(g)), GridMismatch);
}
