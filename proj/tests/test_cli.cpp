#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "leda/group_maps.hpp"
#include "leda/io.hpp"
#include "leda/render.hpp"
#include "oracles.hpp"

using namespace leda;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::initializer_list<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "leda_test_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}).code == 1);
  const Run r = run({"frobnicate"});
  CHECK(r.code == 1);
  CHECK_FALSE(r.err.empty());
  CHECK(run({"gen", "--out", "x", "--bogus"}).code == 1);
  CHECK(run({"gen"}).code == 1);
  CHECK(run({"gen", "--size", "32by32", "--out", scratch("u").string()}).code == 1);
  CHECK(run({"log", "--method", "magic", "--field", "a", "--out", "b"}).code == 1);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("data errors") {
  const fs::path d = scratch("data_err");
  CHECK(run({"log", "--field", (d / "missing.ledf").string(), "--out", (d / "o.ledf").string()}).code == 2);
  CHECK(run({"train", "--data", d.string(), "--out", (d / "m.ledm").string()}).code == 2);
}

TEST_CASE("gen is deterministic") {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  CHECK(run({"gen", "--seed", "7", "--pairs", "3", "--size", "16x16", "--max-disp", "2", "--out", a.string()}).code == 0);
  CHECK(run({"gen", "--seed", "7", "--pairs", "3", "--size", "16x16", "--max-disp", "2", "--out", b.string()}).code == 0);
  CHECK(read_text(a / "manifest.json") == read_text(b / "manifest.json"));
  for (const char* f : {"pair_00000_fwd.ledf", "pair_00002_bwd.ledf", "pair_00001_vel.ledf"})
    CHECK(field_read(a / f) == field_read(b / f));
  const DatasetManifest m = manifest_read(a / "manifest.json");
  CHECK(m.records.size() == 3);
  CHECK(m.grid == Grid2{16, 16});
  CHECK(m.records[1].covariates.count("c") == 1);
}

TEST_CASE("log and exp") {
  const fs::path d = scratch("logexp");
  field_write(d / "id.ledf", VectorField({8, 8}));
  CHECK(run({"log", "--method", "iss", "--field", (d / "id.ledf").string(), "--out", (d / "l.ledf").string()}).code == 0);
  CHECK(field_read(d / "l.ledf") == VectorField({8, 8}));

  field_write(d / "v.ledf", testing::constant_field({8, 8}, 0.5, -0.25));
  CHECK(run({"exp", "--velocity", (d / "v.ledf").string(), "--out", (d / "e.ledf").string()}).code == 0);
  CHECK(field_read(d / "e.ledf") == testing::constant_field({8, 8}, 0.5, -0.25));
  CHECK(run({"exp", "--velocity", (d / "v.ledf").string(), "--oracle", "--out", (d / "o.ledf").string()}).code == 0);

  // leda needs --model
  field_write(d / "s.ledf", exp_ode_oracle(testing::smooth_field({16, 16}, 2.0, 3), 1.0).displacement);
  CHECK(run({"log", "--field", (d / "s.ledf").string(), "--out", (d / "sl.ledf").string()}).code == 0);
  CHECK(run({"log", "--method", "leda", "--field", (d / "s.ledf").string(), "--out", (d / "x.ledf").string()}).code == 1);
}

TEST_CASE("render") {
  const fs::path d = scratch("render");
  field_write(d / "f.ledf", testing::smooth_field({12, 12}, 1.0, 2));
  const Run r = run({"render", "--field", (d / "f.ledf").string(), "--out-grid", (d / "g.ppm").string(), "--out-logdet",
                     (d / "l.ppm").string()});
  CHECK(r.code == 0);
  CHECK(read_ppm(d / "g.ppm").height == 12);
  CHECK(read_ppm(d / "l.ppm").width == 12);
  CHECK(run({"render", "--field", (d / "f.ledf").string()}).code == 1);
}

TEST_CASE("train, eval, pca, regress, walk end to end") {
  const fs::path d = scratch("pipeline");
  const std::string data = (d / "data").string(), model = (d / "m.ledm").string();
  REQUIRE(run({"gen", "--seed", "1", "--pairs", "24", "--size", "16x16", "--max-disp", "2", "--out", data}).code == 0);

  const Run t1 = run({"train", "--data", data, "--latent", "4", "--stages", "2", "--epochs", "2", "--seed", "3",
                      "--holdout", "4", "--history", (d / "h.txt").string(), "--out", model});
  REQUIRE(t1.code == 0);
  CHECK(t1.out.starts_with("epoch=1 rec="));
  CHECK(read_text(d / "h.txt") == t1.out);
  const Run t2 = run({"train", "--data", data, "--latent", "4", "--stages", "2", "--epochs", "2", "--seed", "3",
                      "--holdout", "4", "--out", (d / "m2.ledm").string()});
  CHECK(t2.out == t1.out);

  const std::string rep = (d / "r.json").string();
  REQUIRE(run({"eval", "--data", data, "--model", model, "--report", rep, "--holdout", "4"}).code == 0);
  const auto j = nlohmann::json::parse(read_text(rep));
  CHECK(j["n_pairs"] == 4);
  CHECK(j.contains("reconstruction"));
  CHECK(j.contains("log_recovery"));
  CHECK_FALSE(j.contains("timing"));
  REQUIRE(run({"eval", "--data", data, "--model", model, "--report", (d / "r2.json").string(), "--holdout", "4"}).code == 0);
  CHECK(read_text(rep) == read_text(d / "r2.json"));
  REQUIRE(run({"eval", "--data", data, "--model", model, "--report", (d / "r3.json").string(), "--timing",
               "--timing-fields", "1", "--n-roots", "2"})
              .code == 0);
  CHECK(nlohmann::json::parse(read_text(d / "r3.json")).contains("timing"));

  const Run pl = run({"pca", "--source", "latents", "--data", data, "--model", model, "--k", "2", "--out",
                      (d / "p.json").string(), "--render", (d / "pca").string()});
  CHECK(pl.code == 0);
  CHECK(fs::exists(d / "pca" / "mode1_stepp2_grid.ppm"));
  CHECK(run({"pca", "--source", "latents", "--data", data, "--k", "2", "--out", (d / "p2.json").string()}).code == 1);
  CHECK(run({"pca", "--source", "logmaps", "--data", data, "--n-roots", "3", "--k", "2", "--out",
             (d / "p3.json").string()})
            .code == 0);

  const Run rg = run({"regress", "--data", data, "--model", model, "--covariate", "c", "--out", (d / "g.json").string(),
                      "--test-fraction", "0.25"});
  CHECK(rg.code == 0);
  CHECK(nlohmann::json::parse(read_text(d / "g.json")).contains("test_r"));
  CHECK(run({"regress", "--data", data, "--model", model, "--covariate", "age", "--out", (d / "g2.json").string()}).code == 2);

  CHECK(run({"walk", "--model", model, "--mode", "random", "--steps", "3", "--scale", "0.5", "--render",
             (d / "walk").string()})
            .code == 0);
  CHECK(fs::exists(d / "walk" / "walk1_step2_logdet.ppm"));
  CHECK(run({"walk", "--model", model, "--mode", "regression-top", "--steps", "2", "--render", (d / "walk2").string(),
             "--data", data, "--k", "2"})
            .code == 0);
  CHECK(run({"walk", "--model", model, "--mode", "regression-top", "--render", (d / "walk3").string()}).code == 1);
}
