#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "leda/group_maps.hpp"
#include "leda/io.hpp"
#include "leda/model.hpp"
#include "leda/random.hpp"
#include "leda/render.hpp"
#include "leda/stats.hpp"
#include "leda/synth.hpp"

namespace leda::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr const char* kManifestName = "manifest.json";
constexpr std::uint64_t kWalkStream = 0x3A1C;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Grid2 parse_size(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw UsageError("--size must look like HxW, got '" + s + "'");
  try {
    std::size_t used_h = 0, used_w = 0;
    const int h = std::stoi(s.substr(0, x), &used_h);
    const int w = std::stoi(s.substr(x + 1), &used_w);
    if (used_h != x || used_w != s.size() - x - 1) throw std::invalid_argument(s);
    return {h, w};
  } catch (const std::logic_error&) {
    throw UsageError("--size must look like HxW, got '" + s + "'");
  }
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Dataset {
  DatasetManifest manifest;
  std::vector<LoadedPair> pairs;
};

Dataset load_dataset(const fs::path& dir) {
  Dataset d;
  d.manifest = manifest_read(dir / kManifestName);
  d.pairs = load_pairs(dir, d.manifest);
  if (d.pairs.empty()) throw FormatError(FormatError::Kind::BadHeader, "dataset has no records");
  return d;
}

// [0, n - holdout) trains, [n - holdout, n) is held out
std::pair<std::size_t, std::size_t> split_bounds(std::size_t n, int holdout) {
  if (holdout < 0 || static_cast<std::size_t>(holdout) >= n) {
    throw UsageError("--holdout must be in [0, " + std::to_string(n) + ")");
  }
  return {0, n - static_cast<std::size_t>(holdout)};
}

void report_nonconvergence(const IssResult& r, std::ostream& err) {
  for (const IssStage& s : r.stages) {
    if (!s.converged) {
      err << "warning: square root stage " << s.stage << " did not converge (residual " << s.residual_rms
          << " after " << s.iterations << " iterations)\n";
    }
  }
}

void render_pair(const fs::path& dir, const std::string& stem, const DeformationField& f) {
  render_grid_ppm(dir / (stem + "_grid.ppm"), f);
  render_logdet_ppm(dir / (stem + "_logdet.ppm"), f);
}

// ---------------------------------------------------------------------------

struct GenOpts {
  std::uint64_t seed = 0;
  int pairs = 500;
  std::string size = "32x32";
  double max_disp = 3.0;
  double sigma = 3.0;
  int factors = 4;
  double noise = 0.1;
  std::string out;
};

int run_gen(const GenOpts& o, std::ostream& out) {
  SynthConfig cfg;
  cfg.grid = parse_size(o.size);
  cfg.n_pairs = o.pairs;
  cfg.max_disp = o.max_disp;
  cfg.smooth_sigma = o.sigma;
  cfg.n_factors = o.factors;
  cfg.noise_sigma = o.noise;
  cfg.seed = o.seed;
  validate(cfg);
  const SyntheticFamily family(cfg);

  const fs::path dir(o.out);
  fs::create_directories(dir);
  DatasetManifest m;
  m.grid = cfg.grid;
  m.seed = cfg.seed;
  for (int i = 0; i < cfg.n_pairs; ++i) {
    const SyntheticPair p = family.pair(i);
    char stem[32];
    std::snprintf(stem, sizeof stem, "pair_%05d", i);
    ManifestRecord r;
    r.pair_id = i;
    r.path_fwd = std::string(stem) + "_fwd.ledf";
    r.path_bwd = std::string(stem) + "_bwd.ledf";
    r.path_gt_velocity = std::string(stem) + "_vel.ledf";
    r.covariates["c"] = p.covariate;
    r.factor_coeffs = p.coeffs;
    field_write(dir / r.path_fwd, p.fwd.displacement);
    field_write(dir / r.path_bwd, p.bwd.displacement);
    field_write(dir / *r.path_gt_velocity, p.velocity);
    m.records.push_back(std::move(r));
  }
  manifest_write(dir / kManifestName, m);
  out << "wrote " << cfg.n_pairs << " pairs to " << dir.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct LogOpts {
  std::string method = "iss";
  std::string field;
  std::string model;
  int n_roots = 6;
  std::string out;
  bool strict = false;
};

int run_log(const LogOpts& o, std::ostream& out, std::ostream& err) {
  const DeformationField phi{field_read(o.field)};
  if (o.method == "leda") {
    if (o.model.empty()) throw UsageError("log --method leda needs --model");
    const LedaModel model = checkpoint_load(o.model, phi.grid());
    field_write(o.out, model.infer_log(phi));
    out << "wrote " << o.out << "\n";
    return kOk;
  }
  IssConfig cfg;
  cfg.n_roots = o.n_roots;
  const IssResult r = iss_log(phi, cfg);
  field_write(o.out, r.log);
  out << "wrote " << o.out << "\n";
  if (!r.converged()) {
    report_nonconvergence(r, err);
    if (o.strict) return kNonConvergence;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct ExpOpts {
  std::string velocity;
  bool oracle = false;
  int squarings = 6;
  int steps = 256;
  std::string out;
};

int run_exp(const ExpOpts& o, std::ostream& out) {
  const VectorField v = field_read(o.velocity);
  ExpConfig cfg;
  cfg.n_squarings = o.squarings;
  cfg.oracle_steps = o.steps;
  const DeformationField phi = o.oracle ? exp_ode_oracle(v, 1.0, cfg) : exp_scaling_squaring(v, cfg);
  field_write(o.out, phi.displacement);
  out << "wrote " << o.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainOpts {
  std::string data;
  LedaConfig cfg;
  int holdout = 0;
  std::string out;
  std::string history;
};

int run_train(const TrainOpts& o, std::ostream& out) {
  const Dataset d = load_dataset(o.data);
  const auto [first, last] = split_bounds(d.pairs.size(), o.holdout);
  std::vector<FieldPair> data;
  for (std::size_t i = first; i < last; ++i) data.push_back(d.pairs[i].fields);

  std::ostringstream history;
  const TrainResult r = train(data, d.manifest.grid, o.cfg, [&](const EpochRecord& rec) {
    const std::string line = format_progress(rec);
    out << line << "\n" << std::flush;
    history << line << "\n";
  });
  checkpoint_save(o.out, r.model);
  if (!o.history.empty()) write_text(o.history, history.str());
  return kOk;
}

// ---------------------------------------------------------------------------

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct EvalOpts {
  std::string data;
  std::string model;
  std::string report;
  int holdout = 0;
  bool timing = false;
  int timing_fields = 5;
  int n_roots = 6;
};

int run_eval(const EvalOpts& o, std::ostream& out, std::ostream& err) {
  const Dataset d = load_dataset(o.data);
  const LedaModel model = checkpoint_load(o.model, d.manifest.grid);
  std::size_t first = 0;
  if (o.holdout > 0) first = split_bounds(d.pairs.size(), o.holdout).second;
  const int N = model.config().n_stages;

  std::vector<double> rec0, stage_gap, cos_z, neg0, log_err, log_cos;
  std::vector<std::vector<double>> icr(static_cast<std::size_t>(N + 1)), neg_stage(static_cast<std::size_t>(N + 1));
  for (std::size_t i = first; i < d.pairs.size(); ++i) {
    const FieldPair& p = d.pairs[i].fields;
    const LatentVector za = model.encode(p.fwd), zb = model.encode(p.bwd);
    const auto ra = model.decode_roots(za), rb = model.decode_roots(zb);
    rec0.push_back(rms_difference(ra[0].displacement, p.fwd.displacement) / rms(p.fwd.displacement));
    rec0.push_back(rms_difference(rb[0].displacement, p.bwd.displacement) / rms(p.bwd.displacement));
    for (int n = 0; n <= N; ++n) {
      const auto k = static_cast<std::size_t>(n);
      icr[k].push_back(inverse_consistency_residual(ra[k], rb[k]));
      const DeformationField neg = self_compose(model.decode_root(-za, n), n);
      neg_stage[k].push_back(rms_difference(neg.displacement, p.bwd.displacement) / rms(p.bwd.displacement));
      if (n > 0) {
        stage_gap.push_back(rms_difference(self_compose(ra[k], n).displacement, ra[0].displacement) /
                            rms(ra[0].displacement));
      }
    }
    cos_z.push_back(cosine(za, zb));
    const VectorField la = scaled(ra.back().displacement, std::ldexp(1.0, N));
    const VectorField lb = scaled(rb.back().displacement, std::ldexp(1.0, N));
    const LatentVector fa{flatten(la)}, fb{flatten(lb)};
    log_cos.push_back(cosine(fa, fb));
    if (d.pairs[i].velocity) log_err.push_back(relative_l2(la, *d.pairs[i].velocity));
  }

  json r;
  r["n_pairs"] = d.pairs.size() - first;
  r["first_pair"] = first;
  r["grid"] = {d.manifest.grid.height, d.manifest.grid.width};
  r["model"] = {{"latent_dim", model.config().latent_dim}, {"n_stages", N}};
  std::vector<double> icr_stage, neg_stage_mean;
  for (int n = 0; n <= N; ++n) {
    icr_stage.push_back(mean(icr[static_cast<std::size_t>(n)]));
    neg_stage_mean.push_back(mean(neg_stage[static_cast<std::size_t>(n)]));
  }
  r["reconstruction"] = {{"stage0_rel_rms_mean", mean(rec0)}, {"stage_lift_rel_gap_mean", mean(stage_gap)}};
  r["inverse_residual"] = {{"mean_over_stages", mean(icr_stage)}, {"per_stage", icr_stage}};
  r["latent_cosine"] = {{"mean", mean(cos_z)}};
  r["negated_latent"] = {{"rel_rms_per_stage", neg_stage_mean},
                         {"rel_rms_max_stage", *std::max_element(neg_stage_mean.begin(), neg_stage_mean.end())}};
  r["log_negation_cosine"] = {{"mean", mean(log_cos)}};
  if (!log_err.empty()) r["log_recovery"] = {{"median_rel_l2", median(log_err)}, {"mean_rel_l2", mean(log_err)}};

  if (o.timing) {
    IssConfig icfg;
    icfg.n_roots = o.n_roots;
    const std::size_t n_time = std::min(d.pairs.size() - first, static_cast<std::size_t>(std::max(1, o.timing_fields)));
    double t_iss = 0.0, t_leda = 0.0;
    bool all_converged = true;
    for (std::size_t i = first; i < first + n_time; ++i) {
      const DeformationField& phi = d.pairs[i].fields.fwd;
      auto t0 = Clock::now();
      const IssResult ir = iss_log(phi, icfg);
      t_iss += seconds_since(t0);
      all_converged = all_converged && ir.converged();
      t0 = Clock::now();
      const VectorField lg = model.infer_log(phi);
      t_leda += seconds_since(t0);
    }
    r["timing"] = {{"fields", n_time},
                   {"iss_seconds_per_field", t_iss / n_time},
                   {"infer_seconds_per_field", t_leda / n_time},
                   {"ratio", t_iss / std::max(t_leda, 1e-12)},
                   {"iss_converged", all_converged}};
  }
  write_text(o.report, r.dump(2) + "\n");
  out << "wrote " << o.report << "\n";
  (void)err;
  return kOk;
}

// ---------------------------------------------------------------------------

struct PcaOpts {
  std::string source = "logmaps";
  std::string data;
  std::string model;
  int k = 3;
  int n_roots = 6;
  std::string out;
  std::string render;
};

int run_pca(const PcaOpts& o, std::ostream& out, std::ostream& err) {
  const Dataset d = load_dataset(o.data);
  std::optional<LedaModel> model;
  if (!o.model.empty()) model = checkpoint_load(o.model, d.manifest.grid);
  if (o.source == "latents" && !model) throw UsageError("pca --source latents needs --model");

  std::vector<std::vector<double>> samples;
  IssConfig icfg;
  icfg.n_roots = o.n_roots;
  for (const LoadedPair& p : d.pairs) {
    if (o.source == "latents") {
      samples.push_back(model->encode(p.fields.fwd).values);
    } else if (model) {
      samples.push_back(flatten(model->infer_log(p.fields.fwd)));
    } else {
      const IssResult r = iss_log(p.fields.fwd, icfg);
      if (!r.converged()) report_nonconvergence(r, err);
      samples.push_back(flatten(r.log));
    }
  }
  const PcaModel pca = pca_fit(samples, o.k);
  json j = json::parse(pca_to_json(pca));
  j["source"] = o.source;
  j["log_method"] = o.source == "latents" ? "none" : (model ? "leda" : "iss");
  write_text(o.out, j.dump(2) + "\n");

  if (!o.render.empty()) {
    fs::create_directories(o.render);
    const int modes = std::min<int>(3, static_cast<int>(pca.rank()));
    for (int m = 0; m < modes; ++m) {
      for (int s = -2; s <= 2; ++s) {
        std::vector<double> coords(pca.rank(), 0.0);
        coords[static_cast<std::size_t>(m)] = s * std::sqrt(pca.eigenvalues[static_cast<std::size_t>(m)]);
        const std::vector<double> x = pca_reconstruct(pca, coords);
        const DeformationField f = o.source == "latents" ? model->decode_root(LatentVector{x}, 0)
                                                          : exp_scaling_squaring(unflatten(x, d.manifest.grid));
        render_pair(o.render, "mode" + std::to_string(m + 1) + "_step" + (s < 0 ? "m" : "p") + std::to_string(std::abs(s)), f);
      }
    }
  }
  out << "wrote " << o.out << "\n";
  for (std::size_t j2 = 0; j2 < pca.rank(); ++j2) {
    out << "component " << j2 + 1 << " eigenvalue=" << pca.eigenvalues[j2]
        << " explained=" << pca.explained_fraction[j2] << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

std::vector<double> covariate_values(const Dataset& d, const std::string& name) {
  std::vector<double> c;
  for (const LoadedPair& p : d.pairs) {
    const auto it = p.record.covariates.find(name);
    if (it == p.record.covariates.end()) {
      throw FormatError(FormatError::Kind::BadHeader, "pair " + std::to_string(p.record.pair_id) + " has no covariate '" + name + "'");
    }
    c.push_back(it->second);
  }
  return c;
}

struct RegressOpts {
  std::string data;
  std::string model;
  std::string covariate = "c";
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  std::string out;
};

int run_regress(const RegressOpts& o, std::ostream& out) {
  const Dataset d = load_dataset(o.data);
  const LedaModel model = checkpoint_load(o.model, d.manifest.grid);
  std::vector<LatentVector> z;
  for (const LoadedPair& p : d.pairs) z.push_back(model.encode(p.fields.fwd));
  const RegressionModel reg = ols_fit(z, covariate_values(d, o.covariate), o.test_fraction, o.seed);
  json j = json::parse(regression_to_json(reg));
  j["covariate"] = o.covariate;
  write_text(o.out, j.dump(2) + "\n");
  out << "wrote " << o.out << "\ntrain_r=" << reg.train_r << " test_r=" << reg.test_r
      << (reg.constant_target ? " (constant target)" : "") << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct WalkOpts {
  std::string model;
  std::string mode = "random";
  int steps = 5;
  double scale = 1.0;
  std::string render;
  std::string data;
  std::string covariate = "c";
  int k = 3;
  std::uint64_t seed = 0;
};

int run_walk(const WalkOpts& o, std::ostream& out) {
  const LedaModel model = checkpoint_load(o.model);
  const auto L = static_cast<std::size_t>(model.config().latent_dim);
  std::optional<Dataset> d;
  if (!o.data.empty()) d = load_dataset(o.data);
  if (o.mode == "regression-top" && !d) throw UsageError("walk --mode regression-top needs --data");

  LatentVector start{std::vector<double>(L, 0.0)};
  std::vector<LatentVector> latents;
  if (d) {
    for (const LoadedPair& p : d->pairs) latents.push_back(model.encode(p.fields.fwd));
    for (std::size_t i = 0; i < latents.size(); ++i) start = start + (1.0 / (i + 1)) * (latents[i] + (-start));
  }

  std::vector<LatentVector> directions;
  if (o.mode == "random") {
    std::mt19937_64 rng(derive_seed(o.seed, kWalkStream, 0));
    std::normal_distribution<double> n01;
    LatentVector dir{std::vector<double>(L)};
    for (double& x : dir.values) x = n01(rng);
    directions.push_back((1.0 / norm(dir)) * dir);
  } else {
    const RegressionModel reg = ols_fit(latents, covariate_values(*d, o.covariate), 0.2, o.seed);
    auto top = top_regression_directions(reg, std::min<int>(o.k, static_cast<int>(L)));
    for (LatentVector& t : top) {
      // step in units of the axis' standard deviation
      for (std::size_t a = 0; a < L; ++a) t[a] *= reg.input_scale[a];
      directions.push_back(t);
    }
  }

  fs::create_directories(o.render);
  for (std::size_t j = 0; j < directions.size(); ++j) {
    const auto fields = latent_walk(model, start, directions[j], o.steps, o.scale);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      render_pair(o.render, "walk" + std::to_string(j + 1) + "_step" + std::to_string(i), fields[i]);
      if (i > 0) {
        out << "direction " << j + 1 << " step " << i
            << " rms_change=" << rms_difference(fields[i].displacement, fields[i - 1].displacement) << "\n";
      }
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct RenderOpts {
  std::string field;
  std::string out_grid;
  std::string out_logdet;
  int line_every = 4;
};

int run_render(const RenderOpts& o, std::ostream& out) {
  if (o.out_grid.empty() && o.out_logdet.empty()) throw UsageError("render needs --out-grid and/or --out-logdet");
  const DeformationField f{field_read(o.field)};
  if (!o.out_grid.empty()) render_grid_ppm(o.out_grid, f, o.line_every);
  if (!o.out_logdet.empty()) render_logdet_ppm(o.out_logdet, f);
  out << "min_jacobian_det=" << min_jacobian_det(f) << "\n";
  return kOk;
}

}  // namespace

int cli_dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deformation-field logarithms, LEDA training and log-Euclidean statistics", "leda"};
  app.require_subcommand(1);

  GenOpts gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic dataset");
  g->add_option("--seed", gen.seed);
  g->add_option("--pairs", gen.pairs)->check(CLI::PositiveNumber);
  g->add_option("--size", gen.size, "HxW");
  g->add_option("--max-disp", gen.max_disp);
  g->add_option("--sigma", gen.sigma);
  g->add_option("--factors", gen.factors)->check(CLI::PositiveNumber);
  g->add_option("--noise", gen.noise);
  g->add_option("--out", gen.out)->required();

  LogOpts lg;
  auto* l = app.add_subcommand("log", "Logarithm of a deformation field");
  l->add_option("--method", lg.method)->check(CLI::IsMember({"iss", "leda"}));
  l->add_option("--field", lg.field)->required();
  l->add_option("--model", lg.model);
  l->add_option("--n-roots", lg.n_roots);
  l->add_option("--out", lg.out)->required();
  l->add_flag("--strict", lg.strict, "Exit 3 if a square root fails to converge");

  ExpOpts ex;
  auto* e = app.add_subcommand("exp", "Exponential of a velocity field");
  e->add_option("--velocity", ex.velocity)->required();
  e->add_flag("--oracle", ex.oracle, "Integrate with RK4 instead of scaling and squaring");
  e->add_option("--squarings", ex.squarings);
  e->add_option("--steps", ex.steps);
  e->add_option("--out", ex.out)->required();

  TrainOpts tr;
  auto* t = app.add_subcommand("train", "Train a LEDA model");
  t->add_option("--data", tr.data)->required();
  t->add_option("--latent", tr.cfg.latent_dim);
  t->add_option("--stages", tr.cfg.n_stages);
  t->add_option("--epochs", tr.cfg.epochs);
  t->add_option("--seed", tr.cfg.seed);
  t->add_option("--batch", tr.cfg.batch_size);
  t->add_option("--lr", tr.cfg.lr);
  t->add_option("--alpha-rec", tr.cfg.alpha_rec);
  t->add_option("--alpha-inv", tr.cfg.alpha_inv);
  t->add_option("--alpha-linv", tr.cfg.alpha_linv);
  t->add_option("--holdout", tr.holdout, "Leave the last N pairs out of training");
  t->add_option("--history", tr.history, "Write the per-epoch loss lines here");
  t->add_option("--out", tr.out)->required();

  EvalOpts ev;
  auto* v = app.add_subcommand("eval", "Evaluate a trained model");
  v->add_option("--data", ev.data)->required();
  v->add_option("--model", ev.model)->required();
  v->add_option("--report", ev.report)->required();
  v->add_option("--holdout", ev.holdout, "Evaluate only the last N pairs");
  v->add_flag("--timing", ev.timing, "Add ISS vs inference wall-clock timing");
  v->add_option("--timing-fields", ev.timing_fields);
  v->add_option("--n-roots", ev.n_roots);

  PcaOpts pc;
  auto* p = app.add_subcommand("pca", "PCA on log maps or latents");
  p->add_option("--source", pc.source)->check(CLI::IsMember({"logmaps", "latents"}));
  p->add_option("--data", pc.data)->required();
  p->add_option("--model", pc.model);
  p->add_option("--k", pc.k)->check(CLI::PositiveNumber);
  p->add_option("--n-roots", pc.n_roots);
  p->add_option("--out", pc.out)->required();
  p->add_option("--render", pc.render);

  RegressOpts rg;
  auto* r = app.add_subcommand("regress", "OLS of a covariate on latents");
  r->add_option("--data", rg.data)->required();
  r->add_option("--model", rg.model)->required();
  r->add_option("--covariate", rg.covariate);
  r->add_option("--test-fraction", rg.test_fraction);
  r->add_option("--seed", rg.seed);
  r->add_option("--out", rg.out)->required();

  WalkOpts wk;
  auto* w = app.add_subcommand("walk", "Render a latent walk");
  w->add_option("--model", wk.model)->required();
  w->add_option("--mode", wk.mode)->check(CLI::IsMember({"random", "regression-top"}));
  w->add_option("--steps", wk.steps)->check(CLI::PositiveNumber);
  w->add_option("--scale", wk.scale);
  w->add_option("--render", wk.render)->required();
  w->add_option("--data", wk.data);
  w->add_option("--covariate", wk.covariate);
  w->add_option("--k", wk.k)->check(CLI::PositiveNumber);
  w->add_option("--seed", wk.seed);

  RenderOpts rd;
  auto* rn = app.add_subcommand("render", "Render grid and log-det images of a field");
  rn->add_option("--field", rd.field)->required();
  rn->add_option("--out-grid", rd.out_grid);
  rn->add_option("--out-logdet", rd.out_logdet);
  rn->add_option("--line-every", rd.line_every);

  std::vector<std::string> argv_store{"leda"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  try {
    if (g->parsed()) return run_gen(gen, out);
    if (l->parsed()) return run_log(lg, out, err);
    if (e->parsed()) return run_exp(ex, out);
    if (t->parsed()) return run_train(tr, out);
    if (v->parsed()) return run_eval(ev, out, err);
    if (p->parsed()) return run_pca(pc, out, err);
    if (r->parsed()) return run_regress(rg, out);
    if (w->parsed()) return run_walk(wk, out);
    if (rn->parsed()) return run_render(rd, out);
  } catch (const UsageError& ex2) {
    err << "error: " << ex2.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& ex2) {
    err << "error: " << ex2.what() << "\n";
    return kUsage;
  } catch (const std::exception& ex2) {
    err << "error: " << ex2.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace leda::cli
