#include "unmix/sinkhorn.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "csv_detail.hpp"

namespace unmix {

namespace {

constexpr double kWeightSumTol = 1e-12;

// f_i = -eps * LSE_j( (g_j + eps*logw_j - C_ij) / eps ), stabilized by the
// row maximum. Writes into `out`; `work` is an m x m' scratch matrix.
void lse_rows(const Matrix& cost, double eps, const Vector& g,
              const Vector& logw, Matrix& work, Vector& out) {
  work = (-cost).rowwise() + (g + eps * logw).transpose();
  work /= eps;
  const Vector rmax = work.rowwise().maxCoeff();
  out = -eps * (rmax.array() +
                ((work.colwise() - rmax).array().exp().rowwise().sum()).log())
                   .matrix();
}

void lse_cols(const Matrix& cost, double eps, const Vector& f,
              const Vector& logw, Matrix& work, Vector& out) {
  work = (-cost).colwise() + (f + eps * logw);
  work /= eps;
  const Eigen::RowVectorXd cmax = work.colwise().maxCoeff();
  const Eigen::RowVectorXd sums =
      (work.rowwise() - cmax).array().exp().colwise().sum();
  out = (-eps * (cmax.array() + sums.array().log())).matrix().transpose();
}

Matrix plan_from_potentials(const Matrix& cost, double eps, const Vector& f,
                            const Vector& g, const Vector& logmu,
                            const Vector& lognu) {
  Matrix logp = (-cost).rowwise() + (g + eps * lognu).transpose();
  logp.colwise() += (f + eps * logmu);
  logp /= eps;
  return logp.array().exp().matrix();
}

// L1 violation of the row marginals implied by consecutive potentials:
// row i of plan(f_prev, g) sums to w_i * exp((f_prev_i - f_next_i)/eps).
double row_violation(const Vector& f_prev, const Vector& f_next, double eps,
                     const Vector& w) {
  return (w.array() * ((f_prev - f_next).array() / eps).exp() - w.array())
      .abs()
      .sum();
}

SinkhornResult solve_general(const Matrix& cost, const Vector& wmu,
                             const Vector& wnu, const SinkhornConfig& cfg) {
  const Index m = cost.rows();
  const Index mp = cost.cols();
  const Vector logmu = wmu.array().log();
  const Vector lognu = wnu.array().log();

  Matrix work(m, mp);
  Vector f(m), g(mp), f_next(m);
  g.setZero();
  lse_rows(cost, cfg.epsilon, g, lognu, work, f);

  SinkhornResult res;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    lse_cols(cost, cfg.epsilon, f, logmu, work, g);
    lse_rows(cost, cfg.epsilon, g, lognu, work, f_next);
    const double err = row_violation(f, f_next, cfg.epsilon, wmu);
    f.swap(f_next);
    res.iters = it;
    if (err < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.f = std::move(f);
  res.g = std::move(g);
  res.cost = wmu.dot(res.f) + wnu.dot(res.g);
  if (cfg.materialize_plan) {
    res.plan =
        plan_from_potentials(cost, cfg.epsilon, res.f, res.g, logmu, lognu);
  }
  return res;
}

// Self-transport W_eps(mu, mu): damped fixed point f <- (f + T(f)) / 2 on
// the single symmetric potential. Converges to the f = g solution of the
// general problem, so the plan is exactly symmetric.
SinkhornResult solve_symmetric(const Matrix& cost, const Vector& w,
                               const SinkhornConfig& cfg) {
  const Index m = cost.rows();
  const Vector logw = w.array().log();

  Matrix work(m, m);
  Vector f(m), t(m);
  f.setZero();
  lse_rows(cost, cfg.epsilon, f, logw, work, t);

  SinkhornResult res;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    f = 0.5 * (f + t);
    lse_rows(cost, cfg.epsilon, f, logw, work, t);
    const double err = row_violation(f, t, cfg.epsilon, w);
    res.iters = it;
    if (err < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.f = f;
  res.g = std::move(f);
  res.cost = 2.0 * w.dot(res.g);
  if (cfg.materialize_plan) {
    res.plan =
        plan_from_potentials(cost, cfg.epsilon, res.f, res.g, logw, logw);
  }
  return res;
}

bool same_measure(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  return a.points.rows() == b.points.rows() &&
         a.points.cols() == b.points.cols() &&
         a.points.cwiseEqual(b.points).all() &&
         a.weights.cwiseEqual(b.weights).all();
}

// Envelope-theorem gradient of W_eps with respect to mu's support points,
// summed over the given plan; `self_slots` doubles the contribution for the
// self-transport term (both argument slots carry the same points).
Matrix plan_point_grad(const Matrix& plan, const Matrix& xs, const Matrix& ys,
                       const Matrix& cost, bool squared_cost,
                       bool self_slots) {
  const Index m = xs.rows();
  const Index mp = ys.rows();
  Matrix grad = Matrix::Zero(m, xs.cols());
  Vector scale(mp);
  for (Index i = 0; i < m; ++i) {
    if (squared_cost) {
      // d/dx |x - y|^2 = 2 (x - y)
      scale = 2.0 * plan.row(i).transpose();
    } else {
      for (Index j = 0; j < mp; ++j) {
        const double d = cost(i, j);
        scale[j] = d > 0.0 ? plan(i, j) / d : 0.0;
      }
    }
    grad.row(i) =
        scale.transpose() * ((-ys).rowwise() + xs.row(i)).matrix();
  }
  if (self_slots) grad *= 2.0;
  return grad;
}

}  // namespace

DiscreteMeasure DiscreteMeasure::uniform(Matrix pts) {
  if (pts.rows() < 1) {
    throw std::invalid_argument("DiscreteMeasure: need at least one point");
  }
  DiscreteMeasure m;
  m.weights =
      Vector::Constant(pts.rows(), 1.0 / static_cast<double>(pts.rows()));
  m.points = std::move(pts);
  return m;
}

void DiscreteMeasure::validate() const {
  if (points.rows() < 1) {
    throw std::invalid_argument("DiscreteMeasure: need at least one point");
  }
  if (weights.size() != points.rows()) {
    throw std::invalid_argument("DiscreteMeasure: weights/points mismatch");
  }
  if ((weights.array() < 0.0).any()) {
    throw std::invalid_argument("DiscreteMeasure: negative weight");
  }
  if (std::abs(weights.sum() - 1.0) > kWeightSumTol) {
    throw std::invalid_argument("DiscreteMeasure: weights must sum to 1");
  }
  if (!points.allFinite()) {
    throw std::invalid_argument("DiscreteMeasure: non-finite point");
  }
}

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("SinkhornConfig: epsilon must be > 0");
  }
  if (!(tol > 0.0)) {
    throw std::invalid_argument("SinkhornConfig: tol must be > 0");
  }
  if (max_iters < 1) {
    throw std::invalid_argument("SinkhornConfig: max_iters must be >= 1");
  }
}

Matrix cost_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                   bool squared) {
  if (mu.dim() != nu.dim()) {
    std::ostringstream msg;
    msg << "cost_matrix: point dimensions differ, " << mu.dim() << " vs "
        << nu.dim();
    throw std::invalid_argument(msg.str());
  }
  const Index m = mu.size();
  const Index mp = nu.size();
  Matrix cost(m, mp);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < mp; ++j) {
      // Difference-vector norm; no |x|^2 + |y|^2 - 2<x,y> expansion, which
      // cancels catastrophically for near-equal points.
      const double d = (mu.points.row(i) - nu.points.row(j)).norm();
      cost(i, j) = squared ? d * d : d;
    }
  }
  return cost;
}

SinkhornResult sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                        const SinkhornConfig& cfg) {
  mu.validate();
  nu.validate();
  cfg.validate();
  const Matrix cost = cost_matrix(mu, nu, cfg.squared_cost);
  if (!cost.allFinite()) {
    throw std::runtime_error("sinkhorn: non-finite cost entries");
  }
  if (same_measure(mu, nu)) {
    return solve_symmetric(cost, mu.weights, cfg);
  }
  return solve_general(cost, mu.weights, nu.weights, cfg);
}

SinkhornDivergenceResult sinkhorn_divergence_full(const DiscreteMeasure& mu,
                                                  const DiscreteMeasure& nu,
                                                  const SinkhornConfig& cfg) {
  mu.validate();
  nu.validate();
  cfg.validate();
  SinkhornConfig sub = cfg;
  sub.materialize_plan = false;

  const Matrix cost_cross = cost_matrix(mu, nu, cfg.squared_cost);
  if (!cost_cross.allFinite()) {
    throw std::runtime_error("sinkhorn_divergence: non-finite cost entries");
  }
  const SinkhornResult cross =
      same_measure(mu, nu)
          ? solve_symmetric(cost_cross, mu.weights, sub)
          : solve_general(cost_cross, mu.weights, nu.weights, sub);
  const SinkhornResult self_mu =
      solve_symmetric(cost_matrix(mu, mu, cfg.squared_cost), mu.weights, sub);
  const SinkhornResult self_nu =
      solve_symmetric(cost_matrix(nu, nu, cfg.squared_cost), nu.weights, sub);

  SinkhornDivergenceResult res;
  res.w_cross = cross.cost;
  res.w_self_mu = self_mu.cost;
  res.w_self_nu = self_nu.cost;
  res.iters_cross = cross.iters;
  res.iters_self_mu = self_mu.iters;
  res.iters_self_nu = self_nu.iters;
  res.converged = cross.converged && self_mu.converged && self_nu.converged;
  res.value = 2.0 * cross.cost - self_mu.cost - self_nu.cost;
  if (res.value < -10.0 * cfg.tol) {
    std::ostringstream msg;
    msg << "sinkhorn_divergence: value " << res.value
        << " below -10*tol; solver inconsistency";
    throw std::runtime_error(msg.str());
  }
  return res;
}

double sinkhorn_divergence(const DiscreteMeasure& mu,
                           const DiscreteMeasure& nu,
                           const SinkhornConfig& cfg) {
  return sinkhorn_divergence_full(mu, nu, cfg).value;
}

DivergenceWithGrad sinkhorn_divergence_with_grad(const DiscreteMeasure& mu,
                                                 const DiscreteMeasure& nu,
                                                 const SinkhornConfig& cfg,
                                                 bool need_w_self_nu) {
  mu.validate();
  nu.validate();
  cfg.validate();
  SinkhornConfig sub = cfg;
  sub.materialize_plan = true;

  const Matrix cost_cross = cost_matrix(mu, nu, cfg.squared_cost);
  if (!cost_cross.allFinite()) {
    throw std::runtime_error("sinkhorn_divergence: non-finite cost entries");
  }
  const SinkhornResult cross =
      same_measure(mu, nu)
          ? solve_symmetric(cost_cross, mu.weights, sub)
          : solve_general(cost_cross, mu.weights, nu.weights, sub);
  const Matrix cost_self = cost_matrix(mu, mu, cfg.squared_cost);
  const SinkhornResult self_mu = solve_symmetric(cost_self, mu.weights, sub);

  DivergenceWithGrad res;
  res.w_cross = cross.cost;
  res.w_self_mu = self_mu.cost;
  res.converged = cross.converged && self_mu.converged;
  if (need_w_self_nu) {
    SinkhornConfig nosub = cfg;
    nosub.materialize_plan = false;
    const SinkhornResult self_nu = solve_symmetric(
        cost_matrix(nu, nu, cfg.squared_cost), nu.weights, nosub);
    res.w_self_nu = self_nu.cost;
    res.converged = res.converged && self_nu.converged;
    res.value = 2.0 * cross.cost - self_mu.cost - self_nu.cost;
  } else {
    res.value = 2.0 * cross.cost - self_mu.cost;
  }

  const Matrix grad_cross = plan_point_grad(
      cross.plan, mu.points, nu.points, cost_cross, cfg.squared_cost, false);
  const Matrix grad_self = plan_point_grad(
      self_mu.plan, mu.points, mu.points, cost_self, cfg.squared_cost, true);
  res.grad = 2.0 * grad_cross - grad_self;
  return res;
}

Matrix sinkhorn_divergence_grad(const DiscreteMeasure& mu,
                                const DiscreteMeasure& nu,
                                const SinkhornConfig& cfg) {
  return sinkhorn_divergence_with_grad(mu, nu, cfg, false).grad;
}

DiscreteMeasure load_point_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_point_cloud: cannot open " + path);
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& cell : cells) {
      row.push_back(
          detail::parse_cell(cell, path + ":" + std::to_string(lineno)));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": row has " + std::to_string(row.size()) +
                               " columns, expected " +
                               std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw std::runtime_error("load_point_cloud: " + path + " is empty");
  }
  Matrix pts(static_cast<Index>(rows.size()),
             static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < pts.rows(); ++i) {
    for (Index j = 0; j < pts.cols(); ++j) {
      pts(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return DiscreteMeasure::uniform(std::move(pts));
}

}  // namespace unmix
