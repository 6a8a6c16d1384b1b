#pragma once

#include <string>

#include "unmix/numerics.hpp"

namespace unmix {

// Weighted point cloud: row i of `points` is the support point of mass
// weights[i]. Weights are nonnegative and sum to 1.
struct DiscreteMeasure {
  Matrix points;   // m x dim
  Vector weights;  // m

  static DiscreteMeasure uniform(Matrix pts);

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
  void validate() const;
};

struct SinkhornConfig {
  double epsilon = 1e-2;      // entropic factor
  int max_iters = 2000;
  double tol = 1e-9;          // L1 marginal violation threshold
  bool squared_cost = false;  // squared Euclidean ground cost (default: plain)
  bool materialize_plan = false;

  void validate() const;
};

struct SinkhornResult {
  double cost = 0.0;  // W_eps(mu, nu) including the eps * KL term
  Vector f, g;        // dual potentials, lengths m and m'
  Matrix plan;        // m x m', only filled when cfg.materialize_plan
  int iters = 0;
  bool converged = false;
};

struct SinkhornDivergenceResult {
  double value = 0.0;
  bool converged = true;  // all three sub-solves converged
  double w_cross = 0.0;   // W_eps(mu, nu)
  double w_self_mu = 0.0; // W_eps(mu, mu)
  double w_self_nu = 0.0; // W_eps(nu, nu)
  int iters_cross = 0, iters_self_mu = 0, iters_self_nu = 0;
};

// Pairwise ground-cost matrix, C_ij = |x_i - y_j|_2 (or its square).
Matrix cost_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                   bool squared = false);

// Entropic optimal transport,
//   W_eps(mu, nu) = min_{plan} <plan, C> + eps * KL(plan | mu (x) nu),
// solved with log-domain Sinkhorn iterations (stabilized log-sum-exp
// updates). Stops once the L1 marginal violation of the current plan drops
// below cfg.tol; otherwise returns converged = false after cfg.max_iters.
// The reported cost is the dual value <mu, f> + <nu, g>, which equals the
// primal value of the (marginal-feasible) converged plan.
//
// When both measures have identical content the solve switches to the
// damped symmetric fixed point f <- (f + T(f)) / 2, which converges faster
// and yields an exactly symmetric plan.
SinkhornResult sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                        const SinkhornConfig& cfg);

// Debiased divergence S_eps = 2 W_eps(mu,nu) - W_eps(mu,mu) - W_eps(nu,nu).
SinkhornDivergenceResult sinkhorn_divergence_full(const DiscreteMeasure& mu,
                                                  const DiscreteMeasure& nu,
                                                  const SinkhornConfig& cfg);
double sinkhorn_divergence(const DiscreteMeasure& mu,
                           const DiscreteMeasure& nu,
                           const SinkhornConfig& cfg);

// Gradient of S_eps with respect to mu.points (weights fixed, nu constant).
// Uses the envelope theorem on the converged plans:
//   dW/dx_i = sum_j plan_ij (x_i - y_j) / |x_i - y_j|,
// with a zero contribution whenever the distance vanishes; the self term
// W_eps(mu,mu) is differentiated through both argument slots, giving a
// factor 2 by plan symmetry.
Matrix sinkhorn_divergence_grad(const DiscreteMeasure& mu,
                                const DiscreteMeasure& nu,
                                const SinkhornConfig& cfg);

// Value and gradient from one set of solves (what the trainer consumes).
struct DivergenceWithGrad {
  double value = 0.0;
  Matrix grad;  // m x dim
  bool converged = true;
  double w_cross = 0.0, w_self_mu = 0.0, w_self_nu = 0.0;
};
DivergenceWithGrad sinkhorn_divergence_with_grad(const DiscreteMeasure& mu,
                                                 const DiscreteMeasure& nu,
                                                 const SinkhornConfig& cfg,
                                                 bool need_w_self_nu = true);

// CSV point-cloud reader for the CLI: one point per row, comma-separated
// coordinates, uniform weights.
DiscreteMeasure load_point_cloud(const std::string& path);

}  // namespace unmix
