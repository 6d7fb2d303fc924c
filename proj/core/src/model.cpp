#include "leda/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "leda/random.hpp"
#include "planar.hpp"

namespace leda {

void validate(const LedaConfig& cfg) {
  if (cfg.latent_dim < 1) throw InvalidArgument("LedaConfig: latent_dim must be >= 1");
  if (cfg.n_stages < 0) throw InvalidArgument("LedaConfig: n_stages must be >= 0");
  if (cfg.alpha_rec <= 0.0 || cfg.alpha_inv < 0.0 || cfg.alpha_linv < 0.0) {
    throw InvalidArgument("LedaConfig: loss weights must be >= 0 with alpha_rec > 0");
  }
  if (!(cfg.lr > 0.0)) throw InvalidArgument("LedaConfig: lr must be positive");
  if (cfg.batch_size < 1) throw InvalidArgument("LedaConfig: batch_size must be >= 1");
  if (cfg.epochs < 0) throw InvalidArgument("LedaConfig: epochs must be >= 0");
}

// ---------------------------------------------------------------------------
// LatentVector

LatentVector operator-(const LatentVector& z) { return -1.0 * z; }

LatentVector operator+(const LatentVector& a, const LatentVector& b) {
  if (a.size() != b.size()) throw ShapeMismatch("latent vectors differ in length");
  LatentVector out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

LatentVector operator*(double s, const LatentVector& z) {
  LatentVector out = z;
  for (double& x : out.values) x *= s;
  return out;
}

double dot(const LatentVector& a, const LatentVector& b) {
  if (a.size() != b.size()) throw ShapeMismatch("latent vectors differ in length");
  return std::inner_product(a.values.begin(), a.values.end(), b.values.begin(), 0.0);
}

double norm(const LatentVector& z) { return std::sqrt(dot(z, z)); }

double cosine(const LatentVector& a, const LatentVector& b) {
  const double na = norm(a), nb = norm(b);
  if (na < ad::kDegenerateNorm || nb < ad::kDegenerateNorm) return 0.0;
  return dot(a, b) / (na * nb);
}

// ---------------------------------------------------------------------------
// Parameters

const ad::Tensor& ModelParams::at(const std::string& name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return t.value;
  throw InvalidArgument("no parameter named " + name);
}

ad::Tensor& ModelParams::at(const std::string& name) {
  return const_cast<ad::Tensor&>(static_cast<const ModelParams&>(*this).at(name));
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for (const NamedTensor& t : tensors) n += t.value.numel();
  return n;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].name != b.tensors[i].name || !(a.tensors[i].value == b.tensors[i].value)) return false;
  }
  return true;
}

namespace {

constexpr int kC1 = 16, kC2 = 32, kC3 = 64, kK = 3;
constexpr std::uint64_t kInitStream = 0x1217;
constexpr std::uint64_t kShuffleStream = 0x5F1E;

// Parameter slots in layout order.
enum Slot {
  kEncConv1W, kEncConv1B, kEncConv2W, kEncConv2B, kEncConv3W, kEncConv3B, kEncFcW, kEncFcB,
  kDecFcW, kDecFcB, kDecT1W, kDecT1B, kDecT2W, kDecT2B, kDecT3W, kDecT3B, kSlotCount
};

void require_model_grid(const Grid2& g) {
  require_valid(g);
  if (g.height % 8 != 0 || g.width % 8 != 0) {
    throw InvalidArgument("model grid dimensions must be multiples of 8");
  }
}

}  // namespace

std::vector<std::pair<std::string, std::vector<int>>> parameter_layout(Grid2 grid, const LedaConfig& cfg) {
  require_model_grid(grid);
  const int flat = kC3 * (grid.height / 8) * (grid.width / 8);
  const int L = cfg.latent_dim;
  return {
      {"enc.conv1.weight", {kC1, 2, kK, kK}},   {"enc.conv1.bias", {kC1}},
      {"enc.conv2.weight", {kC2, kC1, kK, kK}}, {"enc.conv2.bias", {kC2}},
      {"enc.conv3.weight", {kC3, kC2, kK, kK}}, {"enc.conv3.bias", {kC3}},
      {"enc.fc.weight", {flat, L}},             {"enc.fc.bias", {L}},
      {"dec.fc.weight", {L, flat}},             {"dec.fc.bias", {flat}},
      {"dec.tconv1.weight", {kC3, kC2, kK, kK}}, {"dec.tconv1.bias", {kC2}},
      {"dec.tconv2.weight", {kC2, kC1, kK, kK}}, {"dec.tconv2.bias", {kC1}},
      {"dec.tconv3.weight", {kC1, 2, kK, kK}},  {"dec.tconv3.bias", {2}},
  };
}

namespace {

// Uniform(-bound, bound) with bound from the layer's fan-in; leaky-rectified
// layers get the rectifier gain, linear outputs do not.
ModelParams init_params(Grid2 grid, const LedaConfig& cfg) {
  const auto layout = parameter_layout(grid, cfg);
  const double rect_gain = 2.0 / (1.0 + ad::kLeakySlope * ad::kLeakySlope);
  const int flat = kC3 * (grid.height / 8) * (grid.width / 8);
  // fan-in per weight slot; transposed convs see k*k/stride^2 taps per input channel
  const double fan_in[kSlotCount] = {2.0 * 9,  0, kC1 * 9.0, 0, kC2 * 9.0, 0, static_cast<double>(flat), 0,
                                     static_cast<double>(cfg.latent_dim), 0, kC3 * 9.0 / 4, 0,
                                     kC2 * 9.0 / 4, 0, kC1 * 9.0 / 4, 0};
  const bool rectified[kSlotCount] = {true, false, true, false, true, false, false, false,
                                      true, false, true, false, true, false, false, false};
  ModelParams p;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    ad::Tensor t(layout[i].second, 0.0);
    if (i % 2 == 0) {
      const double gain = rectified[i] ? rect_gain : 1.0;
      const double bound = std::sqrt(3.0 * gain / fan_in[i]);
      std::mt19937_64 rng(derive_seed(cfg.seed, kInitStream, i));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (double& x : t.data()) x = u(rng);
    }
    p.tensors.push_back({layout[i].first, std::move(t)});
  }
  return p;
}

std::vector<ad::Var> bind(ad::Tape& tape, const ModelParams& p, bool requires_grad) {
  std::vector<ad::Var> vars;
  vars.reserve(p.tensors.size());
  for (const NamedTensor& t : p.tensors) vars.push_back(tape.leaf(t.value, requires_grad));
  return vars;
}

ad::Var encoder(ad::Tape& t, const std::vector<ad::Var>& p, ad::Var x, Grid2 g) {
  using ad::Activation;
  ad::Var h = ad::pointwise(t, ad::conv2d(t, x, p[kEncConv1W], p[kEncConv1B], 2), Activation::LeakyRelu);
  h = ad::pointwise(t, ad::conv2d(t, h, p[kEncConv2W], p[kEncConv2B], 2), Activation::LeakyRelu);
  h = ad::pointwise(t, ad::conv2d(t, h, p[kEncConv3W], p[kEncConv3B], 2), Activation::LeakyRelu);
  const int rows = t.value(h).dim(0);
  h = ad::reshape(t, h, {rows, kC3 * (g.height / 8) * (g.width / 8)});
  return ad::dense(t, h, p[kEncFcW], p[kEncFcB]);
}

ad::Var decoder(ad::Tape& t, const std::vector<ad::Var>& p, ad::Var z, Grid2 g) {
  using ad::Activation;
  const int rows = t.value(z).dim(0);
  ad::Var h = ad::pointwise(t, ad::dense(t, z, p[kDecFcW], p[kDecFcB]), Activation::LeakyRelu);
  h = ad::reshape(t, h, {rows, kC3, g.height / 8, g.width / 8});
  h = ad::pointwise(t, ad::conv_transpose2d(t, h, p[kDecT1W], p[kDecT1B], 2, g.height / 4, g.width / 4),
                    Activation::LeakyRelu);
  h = ad::pointwise(t, ad::conv_transpose2d(t, h, p[kDecT2W], p[kDecT2B], 2, g.height / 2, g.width / 2),
                    Activation::LeakyRelu);
  return ad::conv_transpose2d(t, h, p[kDecT3W], p[kDecT3B], 2, g.height, g.width);
}

// Tape-free forward passes over the stored parameters, same graph as above.
ad::Tensor encoder_eval(const ModelParams& p, ad::Tensor x, Grid2 g) {
  using ad::Activation;
  auto v = [&](Slot s) -> const ad::Tensor& { return p.tensors[s].value; };
  ad::Tensor h = ad::eval::conv2d(x, v(kEncConv1W), v(kEncConv1B), 2);
  ad::eval::activate(h, Activation::LeakyRelu);
  h = ad::eval::conv2d(h, v(kEncConv2W), v(kEncConv2B), 2);
  ad::eval::activate(h, Activation::LeakyRelu);
  h = ad::eval::conv2d(h, v(kEncConv3W), v(kEncConv3B), 2);
  ad::eval::activate(h, Activation::LeakyRelu);
  h.reshape({h.dim(0), kC3 * (g.height / 8) * (g.width / 8)});
  return ad::eval::dense(h, v(kEncFcW), v(kEncFcB));
}

ad::Tensor decoder_eval(const ModelParams& p, const ad::Tensor& z, Grid2 g) {
  using ad::Activation;
  auto v = [&](Slot s) -> const ad::Tensor& { return p.tensors[s].value; };
  ad::Tensor h = ad::eval::dense(z, v(kDecFcW), v(kDecFcB));
  ad::eval::activate(h, Activation::LeakyRelu);
  h.reshape({z.dim(0), kC3, g.height / 8, g.width / 8});
  h = ad::eval::conv_transpose2d(h, v(kDecT1W), v(kDecT1B), 2, g.height / 4, g.width / 4);
  ad::eval::activate(h, Activation::LeakyRelu);
  h = ad::eval::conv_transpose2d(h, v(kDecT2W), v(kDecT2B), 2, g.height / 2, g.width / 2);
  ad::eval::activate(h, Activation::LeakyRelu);
  return ad::eval::conv_transpose2d(h, v(kDecT3W), v(kDecT3B), 2, g.height, g.width);
}

// [n_stages+1 blocks of z * 2^-n] stacked along rows
ad::Var stage_inputs(ad::Tape& t, ad::Var z, int n_stages) {
  std::vector<ad::Var> parts;
  for (int n = 0; n <= n_stages; ++n) parts.push_back(n == 0 ? z : ad::scale(t, z, std::ldexp(1.0, -n)));
  return ad::concat_rows(t, parts);
}

ad::Tensor latent_tensor(std::span<const LatentVector> zs) {
  const int L = static_cast<int>(zs.front().size());
  ad::Tensor t({static_cast<int>(zs.size()), L});
  for (std::size_t i = 0; i < zs.size(); ++i) {
    if (static_cast<int>(zs[i].size()) != L) throw ShapeMismatch("latent vectors differ in length");
    std::copy(zs[i].values.begin(), zs[i].values.end(), t.data().begin() + static_cast<std::ptrdiff_t>(i * L));
  }
  return t;
}

}  // namespace

LedaModel::LedaModel(Grid2 grid, LedaConfig cfg) : grid_(grid), cfg_(cfg) {
  validate(cfg_);
  params_ = init_params(grid_, cfg_);
}

LedaModel::LedaModel(Grid2 grid, LedaConfig cfg, ModelParams params)
    : grid_(grid), cfg_(cfg), params_(std::move(params)) {
  validate(cfg_);
  const auto layout = parameter_layout(grid_, cfg_);
  if (layout.size() != params_.tensors.size()) throw ConfigMismatch("parameter count does not match the model layout");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params_.tensors[i].name != layout[i].first || params_.tensors[i].value.shape() != layout[i].second) {
      throw ConfigMismatch("parameter " + layout[i].first + " expected shape " + ad::shape_string(layout[i].second));
    }
  }
}

std::vector<LatentVector> LedaModel::encode(std::span<const DeformationField> fields) const {
  if (fields.empty()) return {};
  std::vector<const VectorField*> ptrs;
  for (const DeformationField& f : fields) {
    if (!(f.grid() == grid_)) throw GridMismatch("encode: field grid does not match the model");
    ptrs.push_back(&f.displacement);
  }
  const ad::Tensor z = encoder_eval(params_, detail::to_planar(ptrs), grid_);
  const int L = cfg_.latent_dim;
  std::vector<LatentVector> out(fields.size());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    out[i].values.assign(z.data().begin() + static_cast<std::ptrdiff_t>(i * L),
                         z.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * L));
  }
  return out;
}

LatentVector LedaModel::encode(const DeformationField& phi) const {
  return encode(std::span<const DeformationField>(&phi, 1)).front();
}

DeformationField LedaModel::decode_root(const LatentVector& z, int stage) const {
  if (stage < 0 || stage > cfg_.n_stages) {
    throw InvalidArgument("decode_root: stage " + std::to_string(stage) + " outside [0, " +
                          std::to_string(cfg_.n_stages) + "]");
  }
  if (static_cast<int>(z.size()) != cfg_.latent_dim) throw ShapeMismatch("decode_root: latent length mismatch");
  const LatentVector scaled_z = std::ldexp(1.0, -stage) * z;
  const ad::Tensor out = decoder_eval(params_, latent_tensor(std::span<const LatentVector>(&scaled_z, 1)), grid_);
  return DeformationField{detail::field_from_planar(out, 0, grid_)};
}

std::vector<DeformationField> LedaModel::decode_roots(const LatentVector& z) const {
  if (static_cast<int>(z.size()) != cfg_.latent_dim) throw ShapeMismatch("decode_roots: latent length mismatch");
  std::vector<LatentVector> zs;
  for (int n = 0; n <= cfg_.n_stages; ++n) zs.push_back(std::ldexp(1.0, -n) * z);
  const ad::Tensor out = decoder_eval(params_, latent_tensor(zs), grid_);
  std::vector<DeformationField> roots;
  for (int n = 0; n <= cfg_.n_stages; ++n) roots.push_back(DeformationField{detail::field_from_planar(out, n, grid_)});
  return roots;
}

VectorField LedaModel::infer_log(const DeformationField& phi) const {
  const DeformationField root = decode_root(encode(phi), cfg_.n_stages);
  return scaled(root.displacement, std::ldexp(1.0, cfg_.n_stages));
}

// ---------------------------------------------------------------------------
// Losses over field_core

namespace {

double mean_sq_norm(const VectorField& f) {
  double total = 0.0;
  for (double x : f.data()) total += x * x;
  return total / static_cast<double>(f.grid().pixels());
}

}  // namespace

double reconstruction_loss(std::span<const DeformationField> roots, const DeformationField& target) {
  double total = 0.0;
  for (std::size_t n = 0; n < roots.size(); ++n) {
    const DeformationField rebuilt = self_compose(roots[n], static_cast<int>(n));
    total += mean_sq_norm(difference(rebuilt.displacement, target.displacement));
  }
  return total;
}

double inverse_loss(std::span<const DeformationField> roots_ab, std::span<const DeformationField> roots_ba) {
  if (roots_ab.size() != roots_ba.size()) throw InvalidArgument("inverse_loss: stage counts differ");
  double total = 0.0;
  for (std::size_t n = 0; n < roots_ab.size(); ++n) {
    total += mean_sq_norm(compose(roots_ab[n], roots_ba[n]).displacement);
    total += mean_sq_norm(compose(roots_ba[n], roots_ab[n]).displacement);
  }
  return total;
}

LatentLoss loss_linv(const LatentVector& z_ab, const LatentVector& z_ba) {
  const double na = norm(z_ab), nb = norm(z_ba);
  LatentLoss out;
  out.degenerate = na < ad::kDegenerateNorm || nb < ad::kDegenerateNorm;
  const double cos_term = out.degenerate ? 0.5 : 0.5 * (1.0 + dot(z_ab, z_ba) / (na * nb));
  const LatentVector s = z_ab + z_ba;
  out.value = cos_term + dot(s, s);
  return out;
}

double loss_rec(const LedaModel& model, const FieldPair& pair) {
  const auto roots_ab = model.decode_roots(model.encode(pair.fwd));
  const auto roots_ba = model.decode_roots(model.encode(pair.bwd));
  return reconstruction_loss(roots_ab, pair.fwd) + reconstruction_loss(roots_ba, pair.bwd);
}

double loss_inv(const LedaModel& model, const FieldPair& pair) {
  return inverse_loss(model.decode_roots(model.encode(pair.fwd)), model.decode_roots(model.encode(pair.bwd)));
}

LossBreakdown total_loss(const LedaModel& model, const FieldPair& pair) {
  const LatentVector z_ab = model.encode(pair.fwd);
  const LatentVector z_ba = model.encode(pair.bwd);
  const auto roots_ab = model.decode_roots(z_ab);
  const auto roots_ba = model.decode_roots(z_ba);
  const LedaConfig& c = model.config();
  LossBreakdown out;
  out.rec = reconstruction_loss(roots_ab, pair.fwd) + reconstruction_loss(roots_ba, pair.bwd);
  out.inv = inverse_loss(roots_ab, roots_ba);
  out.linv = loss_linv(z_ab, z_ba).value;
  out.total = c.alpha_rec * out.rec + c.alpha_inv * out.inv + c.alpha_linv * out.linv;
  return out;
}

// ---------------------------------------------------------------------------
// Tape route

LossBreakdown loss_and_gradient(const LedaModel& model, std::span<const FieldPair> pairs,
                                std::vector<ad::Tensor>* grads) {
  if (pairs.empty()) throw InvalidArgument("loss_and_gradient: empty batch");
  const Grid2& g = model.grid();
  const LedaConfig& c = model.config();
  const int B = static_cast<int>(pairs.size());
  const int N = c.n_stages;

  std::vector<const VectorField*> inputs;
  for (const FieldPair& p : pairs) {
    if (!(p.fwd.grid() == g) || !(p.bwd.grid() == g)) throw GridMismatch("training pair grid does not match the model");
    inputs.push_back(&p.fwd.displacement);
  }
  for (const FieldPair& p : pairs) inputs.push_back(&p.bwd.displacement);

  ad::Tape tape;
  const auto params = bind(tape, model.params(), grads != nullptr);
  ad::Var x = tape.leaf(detail::to_planar(inputs));  // [2B, 2, H, W]: fwd then bwd
  ad::Var target_ab = ad::slice_rows(tape, x, 0, B);
  ad::Var target_ba = ad::slice_rows(tape, x, B, 2 * B);

  ad::Var z = encoder(tape, params, x, g);
  ad::Var roots = decoder(tape, params, stage_inputs(tape, z, N), g);  // [(N+1)*2B, 2, H, W]

  const double inv_pixels = 1.0 / static_cast<double>(g.pixels());
  std::vector<ad::Var> rec_terms, inv_terms;
  for (int n = 0; n <= N; ++n) {
    ad::Var ab = ad::slice_rows(tape, roots, n * 2 * B, n * 2 * B + B);
    ad::Var ba = ad::slice_rows(tape, roots, n * 2 * B + B, (n + 1) * 2 * B);
    ad::Var cab = ab, cba = ba;
    for (int i = 0; i < n; ++i) {
      cab = ad::warp(tape, cab, cab);
      cba = ad::warp(tape, cba, cba);
    }
    rec_terms.push_back(ad::sum_sq_diff(tape, cab, target_ab));
    rec_terms.push_back(ad::sum_sq_diff(tape, cba, target_ba));
    inv_terms.push_back(ad::sum_squares(tape, ad::warp(tape, ab, ba)));
    inv_terms.push_back(ad::sum_squares(tape, ad::warp(tape, ba, ab)));
  }
  auto add_all = [&](const std::vector<ad::Var>& terms) {
    ad::Var acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = ad::add(tape, acc, terms[i]);
    return acc;
  };
  const double per_pair = 1.0 / B;
  ad::Var rec = ad::scale(tape, add_all(rec_terms), inv_pixels * per_pair);
  ad::Var inv = ad::scale(tape, add_all(inv_terms), inv_pixels * per_pair);
  ad::Var linv = ad::scale(
      tape, ad::latent_inverse_consistency(tape, ad::slice_rows(tape, z, 0, B), ad::slice_rows(tape, z, B, 2 * B)),
      per_pair);
  ad::Var total = ad::add(tape, ad::add(tape, ad::scale(tape, rec, c.alpha_rec), ad::scale(tape, inv, c.alpha_inv)),
                          ad::scale(tape, linv, c.alpha_linv));

  LossBreakdown out{tape.value(rec).item(), tape.value(inv).item(), tape.value(linv).item(),
                    tape.value(total).item()};
  if (grads) {
    tape.backward(total);
    grads->clear();
    for (ad::Var v : params) grads->push_back(tape.grad(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

std::string format_progress(const EpochRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "epoch=%d rec=%.9g inv=%.9g linv=%.9g total=%.9g", r.epoch, r.rec, r.inv, r.linv,
                r.total);
  return buf;
}

TrainResult train(std::span<const FieldPair> data, Grid2 grid, const LedaConfig& cfg, const ProgressFn& progress) {
  validate(cfg);
  if (data.size() < 2) throw InvalidArgument("train: need at least 2 pairs");
  TrainResult result{LedaModel(grid, cfg), {}};
  LedaModel& model = result.model;

  ad::AdamState adam;
  adam.config.lr = cfg.lr;
  std::vector<ad::Tensor> grads;
  std::vector<std::size_t> order(data.size());
  std::vector<FieldPair> batch;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(cfg.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(order[i], order[pick(rng)]);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
      const LossBreakdown l = loss_and_gradient(model, batch, &grads);
      if (!std::isfinite(l.total)) {
        throw TrainingDiverged(epoch, batch_index,
                               "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
      }
      std::vector<ad::Tensor> values;
      values.reserve(model.params().tensors.size());
      for (NamedTensor& t : model.params().tensors) values.push_back(std::move(t.value));
      ad::adam_step(values, grads, adam);
      for (std::size_t i = 0; i < values.size(); ++i) model.params().tensors[i].value = std::move(values[i]);

      const double w = static_cast<double>(end - start);
      rec.rec += w * l.rec;
      rec.inv += w * l.inv;
      rec.linv += w * l.linv;
      rec.total += w * l.total;
    }
    const double k = static_cast<double>(data.size());
    rec.rec /= k;
    rec.inv /= k;
    rec.linv /= k;
    rec.total /= k;
    result.history.push_back(rec);
    if (progress) progress(rec);
  }
  return result;
}

}  // namespace leda
