#pragma once

#include <vector>

#include "leda/field.hpp"

namespace leda {

struct ExpConfig {
  int n_squarings = 6;
  int oracle_steps = 256;
};

struct IssConfig {
  int n_roots = 6;
  int sqrt_max_iters = 500;
  double sqrt_tol = 1e-4;  // RMS residual, grid units
  double step_size = 1e-1;
};

void validate(const ExpConfig& cfg);
void validate(const IssConfig& cfg);

/// phi = C_{2^S}(id + v / 2^S).
DeformationField exp_scaling_squaring(const VectorField& v, const ExpConfig& cfg = {});

/// Fixed-step RK4 integration of d phi_t/dt = v(phi_t), phi_0 = id, up to
/// time t in [-1, 1]. v is stationary and sampled with the clamped bilinear
/// kernel.
DeformationField exp_ode_oracle(const VectorField& v, double t, const ExpConfig& cfg = {});

/// Outcome of one square-root solve. `converged` is false when the final
/// residual is above 10x the tolerance; the field is still the best iterate.
struct SqrtResult {
  DeformationField root;
  double residual_rms = 0.0;
  int iterations = 0;
  bool converged = true;
};

/// Gradient descent on mean |psi o psi - phi|^2 over psi's displacement,
/// started at id + u/2. Step halves whenever a trial does not decrease the
/// objective.
SqrtResult sqrt_field(const DeformationField& phi, const IssConfig& cfg = {});

struct IssStage {
  int stage = 0;  // 1-based root index
  double residual_rms = 0.0;
  int iterations = 0;
  bool converged = true;
};

struct IssResult {
  VectorField log;
  DeformationField deepest_root;
  std::vector<DeformationField> roots;  // roots[k] is the 2^(k+1)-th root
  std::vector<IssStage> stages;

  bool converged() const;
  /// First non-converged stage, or 0.
  int first_failed_stage() const;
};

/// log(phi) = 2^N (phi^(1/2^N) - id) by N successive square roots.
IssResult iss_log(const DeformationField& phi, const IssConfig& cfg = {});

struct NegationReport {
  double forward_residual = 0.0;   // C_{2^N}(id - root_fwd) vs bwd
  double backward_residual = 0.0;  // C_{2^N}(id - root_bwd) vs fwd
};

/// Negates each 2^N-th root, self-composes N doublings and measures the RMS
/// displacement residual against the opposite field.
NegationReport validate_log_negation(const DeformationField& fwd, const DeformationField& bwd,
                                     const DeformationField& root_fwd, const DeformationField& root_bwd, int n_roots,
                                     int margin = 0);

}  // namespace leda
