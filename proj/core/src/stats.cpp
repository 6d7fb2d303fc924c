#include "leda/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"
#include "leda/random.hpp"

namespace leda {

namespace {

constexpr double kRidge = 1e-8;
constexpr std::uint64_t kSplitStream = 0x5B117;

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

}  // namespace

PcaModel pca_fit(std::span<const std::vector<double>> samples, int k) {
  const auto n = static_cast<int>(samples.size());
  if (n < 2) throw InvalidArgument("pca_fit: need at least 2 samples");
  const auto p = static_cast<int>(samples.front().size());
  if (k < 1 || k > std::min(n - 1, p)) {
    throw InvalidArgument("pca_fit: k must be in [1, min(n-1, P)] = [1, " + std::to_string(std::min(n - 1, p)) + "]");
  }
  Mat x(n, p);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(samples[static_cast<std::size_t>(i)].size()) != p) throw ShapeMismatch("pca_fit: ragged samples");
    x.row(i) = Eigen::Map<const Vec>(samples[static_cast<std::size_t>(i)].data(), p).transpose();
  }
  // running mean, so repeated rows average to exactly themselves
  Vec mean = Vec::Zero(p);
  for (int i = 0; i < n; ++i) mean += (x.row(i).transpose() - mean) / static_cast<double>(i + 1);
  x.rowwise() -= mean.transpose();

  Eigen::BDCSVD<Mat> svd(x, Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const double total = x.squaredNorm() / (n - 1);

  PcaModel out;
  out.mean.assign(mean.data(), mean.data() + p);
  for (int j = 0; j < k; ++j) {
    Vec axis = svd.matrixV().col(j);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis[arg] < 0) axis = -axis;
    out.components.emplace_back(axis.data(), axis.data() + p);
    double ev = j < s.size() ? s[j] * s[j] / (n - 1) : 0.0;
    if (ev < 1e-10 * std::max(1.0, total)) ev = std::max(ev, 0.0);
    out.eigenvalues.push_back(ev);
    out.explained_fraction.push_back(total > 0.0 ? ev / total : 0.0);
  }
  return out;
}

std::vector<double> pca_project(const PcaModel& model, std::span<const double> x) {
  if (x.size() != model.dim()) throw ShapeMismatch("pca_project: dimension mismatch");
  std::vector<double> coords(model.rank(), 0.0);
  for (std::size_t j = 0; j < model.rank(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - model.mean[i]) * model.components[j][i];
    coords[j] = acc;
  }
  return coords;
}

std::vector<double> pca_reconstruct(const PcaModel& model, std::span<const double> coords) {
  if (coords.size() != model.rank()) throw ShapeMismatch("pca_reconstruct: expected " + std::to_string(model.rank()) + " coordinates");
  std::vector<double> out = model.mean;
  for (std::size_t j = 0; j < coords.size(); ++j)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += coords[j] * model.components[j][i];
  return out;
}

std::vector<double> flatten(const VectorField& f) { return {f.data().begin(), f.data().end()}; }

VectorField unflatten(std::span<const double> x, Grid2 grid) {
  return VectorField(grid, std::vector<double>(x.begin(), x.end()));
}

DeformationField log_euclidean_mean(std::span<const DeformationField> fields, const LogFn& log_fn,
                                    const ExpConfig& exp_cfg) {
  if (fields.empty()) throw InvalidArgument("log_euclidean_mean: no fields");
  const Grid2 g = fields.front().grid();
  VectorField mean(g);
  auto m = mean.data();
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (!(fields[i].grid() == g)) throw GridMismatch("log_euclidean_mean: grids differ");
    const VectorField lg = log_fn(fields[i]);
    auto d = lg.data();
    const double w = 1.0 / static_cast<double>(i + 1);
    for (std::size_t j = 0; j < m.size(); ++j) m[j] += (d[j] - m[j]) * w;
  }
  return exp_scaling_squaring(mean, exp_cfg);
}

double RegressionModel::predict(std::span<const double> x) const {
  if (x.size() != weights.size()) throw ShapeMismatch("predict: latent length mismatch");
  double y = intercept;
  for (std::size_t i = 0; i < x.size(); ++i) y += weights[i] * (x[i] - input_mean[i]) / input_scale[i];
  return y;
}

double pearson_r(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeMismatch("pearson_r: length mismatch");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

RegressionModel ols_fit(std::span<const LatentVector> latents, std::span<const double> targets, double test_fraction,
                        std::uint64_t seed) {
  if (latents.size() != targets.size()) throw ShapeMismatch("ols_fit: latents and targets differ in count");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw InvalidArgument("ols_fit: test_fraction must be in [0, 1)");
  if (latents.empty()) throw InvalidArgument("ols_fit: no samples");
  const std::size_t n = latents.size();
  const std::size_t L = latents.front().size();
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  const std::size_t n_train = n - n_test;
  if (n_train < L + 2) {
    throw InvalidArgument("ols_fit: need at least L + 2 = " + std::to_string(L + 2) + " training samples, have " +
                          std::to_string(n_train));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, kSplitStream, 0));
  std::shuffle(order.begin(), order.end(), rng);

  RegressionModel m;
  m.n_train = n_train;
  m.n_test = n_test;
  m.input_mean.assign(L, 0.0);
  m.input_scale.assign(L, 1.0);
  for (std::size_t i = 0; i < n_train; ++i) {
    const LatentVector& z = latents[order[i]];
    if (z.size() != L) throw ShapeMismatch("ols_fit: latents differ in length");
    for (std::size_t j = 0; j < L; ++j) m.input_mean[j] += z[j] / static_cast<double>(n_train);
  }
  for (std::size_t j = 0; j < L; ++j) {
    double var = 0.0;
    for (std::size_t i = 0; i < n_train; ++i) {
      const double d = latents[order[i]][j] - m.input_mean[j];
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(n_train));
    m.input_scale[j] = sd > 0.0 ? sd : 1.0;
  }

  Mat x(static_cast<Eigen::Index>(n_train), static_cast<Eigen::Index>(L));
  Vec y(static_cast<Eigen::Index>(n_train));
  for (std::size_t i = 0; i < n_train; ++i) {
    const LatentVector& z = latents[order[i]];
    for (std::size_t j = 0; j < L; ++j) x(i, j) = (z[j] - m.input_mean[j]) / m.input_scale[j];
    y[i] = targets[order[i]];
  }
  m.intercept = y.mean();
  Mat gram = x.transpose() * x;
  gram.diagonal().array() += kRidge;
  const Vec w = gram.ldlt().solve(x.transpose() * (y.array() - m.intercept).matrix());
  m.weights.assign(w.data(), w.data() + w.size());

  auto r_over = [&](std::size_t begin, std::size_t end) {
    std::vector<double> pred, truth;
    for (std::size_t i = begin; i < end; ++i) {
      pred.push_back(m.predict(latents[order[i]].values));
      truth.push_back(targets[order[i]]);
    }
    return pred.empty() ? 0.0 : pearson_r(pred, truth);
  };
  const double y_min = *std::min_element(targets.begin(), targets.end());
  const double y_max = *std::max_element(targets.begin(), targets.end());
  m.constant_target = y_min == y_max;
  if (!m.constant_target) {
    m.train_r = r_over(0, n_train);
    m.test_r = r_over(n_train, n);
  }
  return m;
}

std::vector<DeformationField> latent_walk(const LedaModel& model, const LatentVector& z_start,
                                          const LatentVector& direction, int steps, double scale) {
  if (steps < 1) throw InvalidArgument("latent_walk: steps must be >= 1");
  std::vector<DeformationField> out;
  for (int i = 0; i < steps; ++i) out.push_back(model.decode_root(z_start + (i * scale) * direction, 0));
  return out;
}

std::vector<LatentVector> top_regression_directions(const RegressionModel& model, int k) {
  const auto L = static_cast<int>(model.weights.size());
  if (k < 1 || k > L) throw InvalidArgument("top_regression_directions: k must be in [1, L]");
  std::vector<int> idx(static_cast<std::size_t>(L));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::abs(model.weights[static_cast<std::size_t>(a)]) > std::abs(model.weights[static_cast<std::size_t>(b)]);
  });
  std::vector<LatentVector> out;
  for (int j = 0; j < k; ++j) {
    const auto a = static_cast<std::size_t>(idx[static_cast<std::size_t>(j)]);
    LatentVector d{std::vector<double>(static_cast<std::size_t>(L), 0.0)};
    // one standardized unit along axis a is input_scale[a] raw units
    d[a] = model.weights[a] < 0.0 ? -1.0 : 1.0;
    out.push_back(std::move(d));
  }
  return out;
}

std::string pca_to_json(const PcaModel& model, int indent) {
  nlohmann::json j;
  j["mean"] = model.mean;
  j["components"] = model.components;
  j["eigenvalues"] = model.eigenvalues;
  j["explained_fraction"] = model.explained_fraction;
  return j.dump(indent);
}

std::string regression_to_json(const RegressionModel& model, int indent) {
  nlohmann::json j;
  j["weights"] = model.weights;
  j["intercept"] = model.intercept;
  j["train_r"] = model.train_r;
  j["test_r"] = model.test_r;
  j["input_mean"] = model.input_mean;
  j["input_scale"] = model.input_scale;
  j["constant_target"] = model.constant_target;
  j["r_metric"] = "pearson_heldout";
  j["n_train"] = model.n_train;
  j["n_test"] = model.n_test;
  return j.dump(indent);
}

}  // namespace leda
