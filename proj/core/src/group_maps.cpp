#include "leda/group_maps.hpp"

#include <cmath>
#include <string>

#include "leda/autodiff.hpp"
#include "planar.hpp"

namespace leda {

void validate(const ExpConfig& cfg) {
  if (cfg.n_squarings < 0) throw InvalidArgument("ExpConfig: n_squarings must be >= 0");
  if (cfg.oracle_steps < 16) throw InvalidArgument("ExpConfig: oracle_steps must be >= 16");
}

void validate(const IssConfig& cfg) {
  if (cfg.n_roots < 1) throw InvalidArgument("IssConfig: n_roots must be >= 1");
  if (cfg.sqrt_max_iters < 1) throw InvalidArgument("IssConfig: sqrt_max_iters must be >= 1");
  if (!(cfg.sqrt_tol > 0.0 && cfg.sqrt_tol < 1.0)) throw InvalidArgument("IssConfig: sqrt_tol must be in (0, 1)");
  if (!(cfg.step_size > 0.0)) throw InvalidArgument("IssConfig: step_size must be positive");
}

DeformationField exp_scaling_squaring(const VectorField& v, const ExpConfig& cfg) {
  validate(cfg);
  DeformationField small{scaled(v, std::ldexp(1.0, -cfg.n_squarings))};
  return self_compose(small, cfg.n_squarings);
}

DeformationField exp_ode_oracle(const VectorField& v, double t, const ExpConfig& cfg) {
  validate(cfg);
  if (!(t >= -1.0 && t <= 1.0)) throw InvalidArgument("exp_ode_oracle: t must lie in [-1, 1]");
  const Grid2& g = v.grid();
  const double dt = t / cfg.oracle_steps;
  VectorField out(g);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      double pr = r, pc = c;
      for (int s = 0; s < cfg.oracle_steps; ++s) {
        const Vec2 k1 = sample(v, pr, pc);
        const Vec2 k2 = sample(v, pr + 0.5 * dt * k1[0], pc + 0.5 * dt * k1[1]);
        const Vec2 k3 = sample(v, pr + 0.5 * dt * k2[0], pc + 0.5 * dt * k2[1]);
        const Vec2 k4 = sample(v, pr + dt * k3[0], pc + dt * k3[1]);
        pr += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        pc += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
      }
      out.at(r, c, 0) = pr - r;
      out.at(r, c, 1) = pc - c;
    }
  }
  return DeformationField{std::move(out)};
}

namespace {

// Sum of squared residual |psi o psi - phi|^2 and its gradient in psi.
double residual_and_grad(const VectorField& psi, const ad::Tensor& target, VectorField& grad) {
  ad::Tape tape;
  ad::Var u = tape.leaf(detail::to_planar(psi), true);
  ad::Var target_v = tape.leaf(target);
  ad::Var sq = ad::warp(tape, u, u);
  ad::Var loss = ad::sum_sq_diff(tape, sq, target_v);
  tape.backward(loss);
  detail::read_planar(tape.grad(u).data().data(), grad);
  return tape.value(loss).item();
}

double residual_only(const VectorField& psi, const VectorField& phi) {
  const DeformationField p{psi};
  const DeformationField sq = compose(p, p);
  double total = 0.0;
  auto a = sq.displacement.data();
  auto b = phi.data();
  for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
  return total;
}

}  // namespace

SqrtResult sqrt_field(const DeformationField& phi, const IssConfig& cfg) {
  validate(cfg);
  const Grid2& g = phi.grid();
  const double npix = static_cast<double>(g.pixels());
  const ad::Tensor target = detail::to_planar(phi.displacement);

  VectorField psi = scaled(phi.displacement, 0.5);
  VectorField grad(g);
  double loss = residual_and_grad(psi, target, grad);
  double step = cfg.step_size;
  int iters = 0;
  auto rms_of = [&](double sum_sq) { return std::sqrt(sum_sq / npix); };

  while (iters < cfg.sqrt_max_iters && rms_of(loss) > cfg.sqrt_tol && step > 1e-12) {
    ++iters;
    // Descent on 0.5 * sum |r|^2, i.e. the per-pixel objective.
    VectorField trial = psi;
    auto td = trial.data();
    auto gd = grad.data();
    for (std::size_t i = 0; i < td.size(); ++i) td[i] -= step * 0.5 * gd[i];
    const double trial_loss = residual_only(trial, phi.displacement);
    if (std::isfinite(trial_loss) && trial_loss < loss) {
      psi = std::move(trial);
      loss = residual_and_grad(psi, target, grad);
    } else {
      step *= 0.5;
    }
  }

  SqrtResult out;
  out.root = DeformationField{std::move(psi)};
  out.residual_rms = rms_of(loss);
  out.iterations = iters;
  out.converged = out.residual_rms <= 10.0 * cfg.sqrt_tol;
  return out;
}

bool IssResult::converged() const { return first_failed_stage() == 0; }

int IssResult::first_failed_stage() const {
  for (const IssStage& s : stages)
    if (!s.converged) return s.stage;
  return 0;
}

IssResult iss_log(const DeformationField& phi, const IssConfig& cfg) {
  validate(cfg);
  IssResult out;
  DeformationField current = phi;
  for (int k = 1; k <= cfg.n_roots; ++k) {
    SqrtResult s = sqrt_field(current, cfg);
    out.stages.push_back({k, s.residual_rms, s.iterations, s.converged});
    current = std::move(s.root);
    out.roots.push_back(current);
  }
  out.deepest_root = current;
  out.log = scaled(current.displacement, std::ldexp(1.0, cfg.n_roots));
  return out;
}

NegationReport validate_log_negation(const DeformationField& fwd, const DeformationField& bwd,
                                     const DeformationField& root_fwd, const DeformationField& root_bwd, int n_roots,
                                     int margin) {
  if (!(fwd.grid() == bwd.grid() && fwd.grid() == root_fwd.grid() && fwd.grid() == root_bwd.grid())) {
    throw GridMismatch("validate_log_negation: grids differ");
  }
  if (n_roots < 0) throw InvalidArgument("validate_log_negation: n_roots must be >= 0");
  const DeformationField inv_from_fwd = self_compose(DeformationField{negate(root_fwd.displacement)}, n_roots);
  const DeformationField fwd_from_inv = self_compose(DeformationField{negate(root_bwd.displacement)}, n_roots);
  return {rms_difference(inv_from_fwd.displacement, bwd.displacement, margin),
          rms_difference(fwd_from_inv.displacement, fwd.displacement, margin)};
}

}  // namespace leda
