#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "leda/io.hpp"
#include "leda/render.hpp"
#include "oracles.hpp"

using namespace leda;
using namespace leda::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "leda_test_io";
  fs::create_directories(d);
  return d / name;
}

std::vector<std::uint8_t> bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

FormatError::Kind kind_of(std::span<const std::uint8_t> b) {
  try {
    decode_field(b);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("no error");
  return FormatError::Kind::Io;
}

}  // namespace

TEST_CASE("LEDF round trip") {
  const VectorField f = smooth_field({6, 9}, 2.0, 1);
  const fs::path p = scratch("f.ledf");
  field_write(p, f);
  CHECK(field_read(p) == f);
  CHECK(fs::file_size(p) == 21 + 6 * 9 * 2 * 8);

  // f32 round trip is exact for values already representable as float
  VectorField g({4, 4});
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = static_cast<float>(0.1 * static_cast<double>(i) - 0.7);
  field_write(p, g, Dtype::F32);
  CHECK(field_read(p) == g);
}

TEST_CASE("LEDF byte layout") {
  const auto b = encode_field(VectorField({4, 4}), Dtype::F32);
  CHECK(b.size() == 4 + 4 + 4 + 4 + 4 + 1 + 4 * 4 * 2 * 4);
  CHECK(std::string(b.begin(), b.begin() + 4) == "LEDF");
  CHECK(b[4] == 1);   // version, little-endian
  CHECK(b[8] == 4);   // H
  CHECK(b[12] == 4);  // W
  CHECK(b[16] == 2);  // channels
  CHECK(b[20] == 0);  // f32

  VectorField one({4, 5});
  one.at(0, 1, 1) = 1.0;
  const auto c = encode_field(one);
  // (row 0, col 1, comp 1) is value index 3; 1.0 = 0x3FF0000000000000
  CHECK(c[21 + 3 * 8 + 7] == 0x3F);
  CHECK(c[21 + 3 * 8 + 6] == 0xF0);
}

TEST_CASE("LEDF corruption") {
  const auto good = encode_field(smooth_field({4, 4}, 1.0, 2));
  auto bad = good;
  bad[0] = 'X';
  CHECK(kind_of(bad) == FormatError::Kind::BadMagic);
  bad = good;
  bad.resize(bad.size() - 1);
  CHECK(kind_of(bad) == FormatError::Kind::Truncated);
  bad = good;
  bad[20] = 7;
  CHECK(kind_of(bad) == FormatError::Kind::UnknownDtype);
  bad = good;
  bad[11] = 0x7F;  // H huge
  CHECK(kind_of(bad) == FormatError::Kind::DimOverflow);
  bad = good;
  bad[16] = 3;
  CHECK(kind_of(bad) == FormatError::Kind::BadChannels);
  bad = good;
  bad[4] = 2;
  CHECK(kind_of(bad) == FormatError::Kind::UnsupportedVersion);
  CHECK(kind_of(std::vector<std::uint8_t>{'L', 'E'}) == FormatError::Kind::BadMagic);
  CHECK_THROWS_AS(field_read(scratch("missing.ledf")), FormatError);
}

TEST_CASE("LEDM checkpoints") {
  const Grid2 g{16, 16};
  LedaConfig c;
  c.latent_dim = 6;
  c.n_stages = 3;
  c.seed = 42;
  c.alpha_inv = 0.25;
  const LedaModel m(g, c);
  const fs::path p = scratch("m.ledm");
  checkpoint_save(p, m);
  const LedaModel back = checkpoint_load(p);
  CHECK(back.config() == c);
  CHECK(back.grid() == g);
  CHECK(back.params() == m.params());
  const DeformationField phi{smooth_field(g, 1.0, 3)};
  CHECK(back.infer_log(phi) == m.infer_log(phi));

  CHECK_THROWS_AS(checkpoint_load(p, Grid2{32, 32}), ConfigMismatch);

  auto raw = bytes_of(p);
  raw[0] = 'Z';
  std::ofstream(scratch("bad.ledm"), std::ios::binary).write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  CHECK_THROWS_AS(checkpoint_load(scratch("bad.ledm")), FormatError);
  raw = bytes_of(p);
  raw.resize(raw.size() - 8);
  std::ofstream(scratch("short.ledm"), std::ios::binary).write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  CHECK_THROWS_AS(checkpoint_load(scratch("short.ledm")), FormatError);
}

TEST_CASE("manifests") {
  const fs::path dir = scratch("ds");
  fs::create_directories(dir);
  const Grid2 g{8, 8};
  field_write(dir / "a_fwd.ledf", smooth_field(g, 1.0, 1));
  field_write(dir / "a_bwd.ledf", smooth_field(g, 1.0, 2));
  DatasetManifest m;
  m.grid = g;
  m.seed = 5;
  ManifestRecord r;
  r.pair_id = 0;
  r.path_fwd = "a_fwd.ledf";
  r.path_bwd = "a_bwd.ledf";
  r.covariates = {{"age", 71.5}, {"nWBV", 0.74}};
  r.factor_coeffs = {0.1, -0.2};
  m.records.push_back(r);

  CHECK(manifest_from_json(manifest_to_json(m)) == m);
  manifest_write(dir / "manifest.json", m);
  CHECK(manifest_read(dir / "manifest.json") == m);
  const auto pairs = load_pairs(dir, m);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].fields.fwd.displacement == smooth_field(g, 1.0, 1));
  CHECK_FALSE(pairs[0].velocity.has_value());

  SUBCASE("missing file") {
    m.records[0].path_bwd = "nope.ledf";
    manifest_write(dir / "broken.json", m);
    CHECK_THROWS_AS(manifest_read(dir / "broken.json"), FormatError);
  }
  SUBCASE("wrong grid") {
    field_write(dir / "small.ledf", VectorField({4, 4}));
    m.records[0].path_fwd = "small.ledf";
    manifest_write(dir / "mixed.json", m);
    CHECK_THROWS_AS(manifest_read(dir / "mixed.json"), GridMismatch);
  }
  SUBCASE("malformed json") { CHECK_THROWS_AS(manifest_from_json("{\"version\": 1"), FormatError); }
}

TEST_CASE("ppm rendering") {
  const Grid2 g{10, 12};
  SUBCASE("identity log-det is white") {
    const RgbImage img = logdet_image(make_identity(g));
    for (std::uint8_t v : img.rgb) CHECK(v == 255);
  }
  SUBCASE("uniform expansion is blue") {
    const RgbImage img = logdet_image(DeformationField{affine_field(g, 1.1, 0, 0, 1.1, 4.5, 5.5)});
    const auto px = img.pixel(5, 5);
    CHECK(px[2] == 255);
    CHECK(px[0] < 128);
    CHECK(px[0] == px[1]);
  }
  SUBCASE("contraction is red, folds are black") {
    const RgbImage img = logdet_image(DeformationField{affine_field(g, 0.9, 0, 0, 0.9, 4.5, 5.5)});
    CHECK(img.pixel(5, 5)[0] == 255);
    CHECK(img.pixel(5, 5)[2] < 128);
    const RgbImage folded = logdet_image(DeformationField{affine_field(g, -0.5, 0, 0, 1.0, 4.5, 5.5)});
    CHECK(folded.pixel(3, 3) == std::array<std::uint8_t, 3>{0, 0, 0});
  }
  SUBCASE("files parse back as P6 with the grid dims") {
    const fs::path p = scratch("ld.ppm"), q = scratch("grid.ppm");
    const DeformationField f{smooth_field(g, 1.0, 4)};
    render_logdet_ppm(p, f);
    render_grid_ppm(q, f, 3);
    for (const auto& path : {p, q}) {
      const RgbImage img = read_ppm(path);
      CHECK(img.height == g.height);
      CHECK(img.width == g.width);
      const auto raw = bytes_of(path);
      CHECK(std::string(raw.begin(), raw.begin() + 2) == "P6");
    }
    CHECK(read_ppm(p).rgb == logdet_image(f).rgb);
  }
  SUBCASE("grid render: identity unwarped, translation shifts") {
    const RgbImage id = grid_image(make_identity(g), 4);
    const ScalarField lines = grid_lines(g, 4);
    for (int r = 0; r < g.height; ++r)
      for (int c = 0; c < g.width; ++c) CHECK(id.pixel(r, c)[0] == (lines.at(r, c) > 0.5 ? 255 : 0));
    const RgbImage sh = grid_image(DeformationField{constant_field(g, 1.0, 0.0)}, 4);
    for (int r = 0; r < g.height - 1; ++r)
      for (int c = 0; c < g.width; ++c) CHECK(sh.pixel(r, c) == id.pixel(r + 1, c));
    CHECK_THROWS_AS(grid_lines(g, 1), InvalidArgument);
  }
  SUBCASE("bad ppm") {
    const std::vector<std::uint8_t> bad{'P', '3', '\n'};
    CHECK_THROWS_AS(decode_ppm(bad), FormatError);
  }
}
