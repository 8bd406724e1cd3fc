#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

namespace snd {

// Separable convex quadratic program in standard form:
//   min 0.5 v'diag(q)v + c'v   s.t.   A v = b,   v_i >= 0 for i with nonneg[i]
// (q >= 0; variables with nonneg[i] == 0 are free). Solved by a Mehrotra
// predictor-corrector interior-point method on the normal equations
// A (diag(q) + D)^{-1} A' with a sparse Cholesky factorization.
struct QpProblem {
  Eigen::SparseMatrix<double> A;  // m x n, full row rank expected
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd qdiag;    // empty means linear objective
  std::vector<char> nonneg;  // empty means all variables are nonnegative
};

struct QpSettings {
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  double gap_tol = 1e-10;
  int max_iter = 120;
  bool trace = false;  // per-iteration diagnostics on stderr
};

enum class QpStatus { Optimal, IterationLimit, NumericalFailure };

struct QpResult {
  QpStatus status = QpStatus::NumericalFailure;
  Eigen::VectorXd v;       // primal
  Eigen::VectorXd lambda;  // equality multipliers
  Eigen::VectorXd w;       // reduced costs (zero on free variables)
  double objective = std::numeric_limits<double>::quiet_NaN();
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

namespace detail {

inline double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& dx, const std::vector<int>& barrier) {
  double step = 1.0;
  for (int i : barrier)
    if (dx[i] < 0.0) step = std::min(step, -x[i] / dx[i]);
  return step;
}

}  // namespace detail

inline QpResult solve_qp(const QpProblem& prob, const QpSettings& settings = {}) {
  using SpMat = Eigen::SparseMatrix<double>;
  const Eigen::Index n = prob.A.cols();
  const Eigen::Index m = prob.A.rows();
  const bool has_q = prob.qdiag.size() > 0;

  std::vector<int> barrier;
  barrier.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    if (prob.nonneg.empty() || prob.nonneg[static_cast<std::size_t>(i)]) barrier.push_back(static_cast<int>(i));
  const double nb = std::max<std::size_t>(1, barrier.size());

  QpResult res;
  if (n == 0) {  // nothing to decide; feasible iff b == 0
    res.v.resize(0);
    res.w.resize(0);
    res.lambda = Eigen::VectorXd::Zero(m);
    res.objective = 0.0;
    res.primal_residual = m ? prob.b.lpNorm<Eigen::Infinity>() : 0.0;
    res.dual_residual = 0.0;
    res.gap = 0.0;
    res.status = res.primal_residual <= settings.primal_tol ? QpStatus::Optimal : QpStatus::NumericalFailure;
    return res;
  }

  const double bnorm = m ? prob.b.lpNorm<Eigen::Infinity>() : 0.0;
  const double cnorm = prob.c.lpNorm<Eigen::Infinity>();
  const double scale = std::max({1.0, bnorm, cnorm});

  const SpMat At = prob.A.transpose();
  Eigen::VectorXd qd = has_q ? prob.qdiag : Eigen::VectorXd::Zero(n);

  // Normal-equations matrix with a mutable diagonal scaling theta.
  Eigen::VectorXd theta(n);
  SpMat M(m, m);
  {
    theta.setOnes();
    SpMat Ath = prob.A * theta.asDiagonal();
    M = (Ath * At).pruned();
  }
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> chol;
  chol.analyzePattern(M);

  const double dual_reg = 1e-12 * scale;
  auto refactor = [&]() {
    SpMat Ath = prob.A * theta.asDiagonal();
    M = (Ath * At).pruned();
    for (Eigen::Index i = 0; i < m; ++i) M.coeffRef(i, i) += dual_reg;
    chol.factorize(M);
    if (settings.trace && chol.info() == Eigen::Success) {
      const auto& D = chol.vectorD();
      std::fprintf(stderr, "        pivots: min %8.2e max %8.2e theta: min %8.2e max %8.2e\n", D.minCoeff(),
                   D.maxCoeff(), theta.minCoeff(), theta.maxCoeff());
    }
    return chol.info() == Eigen::Success;
  };

  // Solves M x = rhs with iterative refinement.
  auto msolve = [&](const Eigen::VectorXd& rhs) {
    Eigen::VectorXd x = chol.solve(rhs);
    for (int pass = 0; pass < 2; ++pass) {
      Eigen::VectorXd r = rhs - M.selfadjointView<Eigen::Lower>() * x;
      const double rn = r.lpNorm<Eigen::Infinity>();
      if (!(rn > 1e-13 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))) break;
      x += chol.solve(r);
    }
    return x;
  };

  // Starting point: least-squares primal/dual estimates, shifted interior.
  if (!refactor()) {
    res.status = QpStatus::NumericalFailure;
    return res;
  }
  Eigen::VectorXd v = At * msolve(prob.b);
  Eigen::VectorXd lambda = msolve(prob.A * prob.c);
  Eigen::VectorXd w = prob.c - At * lambda;
  {
    double vmin = 0.0, wmin = 0.0;
    for (int i : barrier) {
      vmin = std::min(vmin, v[i]);
      wmin = std::min(wmin, w[i]);
    }
    double dv = -1.5 * vmin, dw = -1.5 * wmin;
    double dot = 0.0, sv = 0.0, sw = 0.0;
    for (int i : barrier) {
      dot += (v[i] + dv) * (w[i] + dw);
      sv += v[i] + dv;
      sw += w[i] + dw;
    }
    const double dv2 = sw > 0 ? 0.5 * dot / sw : 0.0;
    const double dw2 = sv > 0 ? 0.5 * dot / sv : 0.0;
    const double v_shift = dv + std::max({dv2, 1.0, 1e-3 * bnorm});
    const double w_shift = dw + std::max({dw2, 1.0, 1e-3 * cnorm});
    for (int i : barrier) {
      v[i] += v_shift;
      w[i] += w_shift;
    }
    for (Eigen::Index i = 0; i < n; ++i)
      if (!prob.nonneg.empty() && !prob.nonneg[static_cast<std::size_t>(i)]) w[i] = 0.0;
  }

  auto objective = [&](const Eigen::VectorXd& x) {
    double obj = prob.c.dot(x);
    if (has_q) obj += 0.5 * x.dot(qd.cwiseProduct(x));
    return obj;
  };

  QpStatus status = QpStatus::IterationLimit;
  int iter = 0;
  Eigen::VectorXd best_v = v, best_lambda = lambda, best_w = w;
  double best_err = std::numeric_limits<double>::infinity();
  std::vector<double> err_history;
  for (; iter < settings.max_iter; ++iter) {
    Eigen::VectorXd rp = prob.b - prob.A * v;
    Eigen::VectorXd rd = prob.c - w - At * lambda;
    if (has_q) rd += qd.cwiseProduct(v);
    double mu = 0.0;
    for (int i : barrier) mu += v[i] * w[i];
    mu /= nb;

    const double prim_obj = objective(v);
    const double dual_obj = prob.b.dot(lambda) - (has_q ? 0.5 * v.dot(qd.cwiseProduct(v)) : 0.0);
    res.primal_residual = rp.lpNorm<Eigen::Infinity>() / (1.0 + bnorm);
    res.dual_residual = rd.lpNorm<Eigen::Infinity>() / (1.0 + cnorm);
    res.gap = std::abs(prim_obj - dual_obj) / (1.0 + std::abs(prim_obj));
    if (settings.trace)
      std::fprintf(stderr, "ipm %3d: rp %9.2e rd %9.2e gap %9.2e mu %9.2e obj %.8e\n", iter, res.primal_residual,
                   res.dual_residual, res.gap, mu, prim_obj);
    if (!std::isfinite(res.primal_residual) || !std::isfinite(res.dual_residual) || !std::isfinite(mu)) {
      status = QpStatus::NumericalFailure;
      break;
    }
    const double err = res.primal_residual + res.dual_residual + std::min(res.gap, mu / scale);
    if (err < best_err) {
      best_err = err;
      best_v = v;
      best_lambda = lambda;
      best_w = w;
    }
    if (res.primal_residual <= settings.primal_tol && res.dual_residual <= settings.dual_tol &&
        (res.gap <= settings.gap_tol || mu <= settings.gap_tol * scale)) {
      status = QpStatus::Optimal;
      break;
    }
    // numerical floor reached: stop once the error stops contracting
    err_history.push_back(err);
    if (err_history.size() >= 12 &&
        best_err > 0.7 * err_history[err_history.size() - 12])
      break;

    for (Eigen::Index i = 0; i < n; ++i) theta[i] = 1.0 / (qd[i] + 1e-11);
    for (int i : barrier) theta[i] = 1.0 / (qd[i] + std::clamp(w[i] / v[i], 1e-10, 1e10));
    if (!refactor()) {
      status = QpStatus::NumericalFailure;
      break;
    }

    // predictor (sigma = 0)
    Eigen::VectorXd g = -rd;  // g := -r_d + V^{-1} r_c with r_c = -VWe
    for (int i : barrier) g[i] -= w[i];
    Eigen::VectorXd dv_aff = theta.cwiseProduct(g + At * msolve(rp - prob.A * theta.cwiseProduct(g)));
    Eigen::VectorXd dw_aff = Eigen::VectorXd::Zero(n);
    for (int i : barrier) dw_aff[i] = -w[i] - w[i] * dv_aff[i] / v[i];

    const double ap_aff = detail::max_step(v, dv_aff, barrier);
    const double ad_aff = detail::max_step(w, dw_aff, barrier);
    double mu_aff = 0.0;
    for (int i : barrier) mu_aff += (v[i] + ap_aff * dv_aff[i]) * (w[i] + ad_aff * dw_aff[i]);
    mu_aff /= nb;
    double sigma = mu > 0 ? std::pow(mu_aff / mu, 3) : 0.0;
    sigma = std::clamp(sigma, 0.0, 1.0);

    // corrector (same factorization); affine products are capped so a poor
    // predictor cannot derail the search direction
    g = -rd;
    Eigen::VectorXd corr = Eigen::VectorXd::Zero(n);
    for (int i : barrier)
      corr[i] = sigma * mu - std::clamp(dv_aff[i] * dw_aff[i], -1e2 * mu, 1e2 * mu);
    for (int i : barrier) g[i] += corr[i] / v[i] - w[i];
    Eigen::VectorXd dl = msolve(rp - prob.A * theta.cwiseProduct(g));
    Eigen::VectorXd dv = theta.cwiseProduct(g + At * dl);
    Eigen::VectorXd dw = Eigen::VectorXd::Zero(n);
    for (int i : barrier) dw[i] = (corr[i] - v[i] * w[i] - w[i] * dv[i]) / v[i];

    const double tau = iter < 40 ? 0.995 : 0.9995;
    double ap = tau * detail::max_step(v, dv, barrier);
    double ad = tau * detail::max_step(w, dw, barrier);
    if (has_q) ap = ad = std::min(ap, ad);  // coupled residual update under Q
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    // retreat when the step would let complementarity run away
    for (int guard = 0; guard < 30; ++guard) {
      double mu_new = 0.0;
      for (int i : barrier) mu_new += (v[i] + ap * dv[i]) * (w[i] + ad * dw[i]);
      mu_new /= nb;
      if (mu_new <= std::max(10.0 * mu, mu + scale)) break;
      ap *= 0.5;
      ad *= 0.5;
    }
    if (settings.trace)
      std::fprintf(stderr, "        ap %8.2e ad %8.2e |dv| %8.2e |dl| %8.2e |dw| %8.2e sigma %8.2e\n", ap, ad,
                   dv.lpNorm<Eigen::Infinity>(), dl.lpNorm<Eigen::Infinity>(), dw.lpNorm<Eigen::Infinity>(), sigma);
    if (ap < 1e-14 && ad < 1e-14) break;
    v += ap * dv;
    lambda += ad * dl;
    w += ad * dw;
  }

  if (status != QpStatus::Optimal) {
    v = best_v;
    lambda = best_lambda;
    w = best_w;
    Eigen::VectorXd rp = prob.b - prob.A * v;
    Eigen::VectorXd rd = prob.c - w - At * lambda;
    if (has_q) rd += qd.cwiseProduct(v);
    const double prim_obj = objective(v);
    const double dual_obj = prob.b.dot(lambda) - (has_q ? 0.5 * v.dot(qd.cwiseProduct(v)) : 0.0);
    res.primal_residual = rp.lpNorm<Eigen::Infinity>() / (1.0 + bnorm);
    res.dual_residual = rd.lpNorm<Eigen::Infinity>() / (1.0 + cnorm);
    res.gap = std::abs(prim_obj - dual_obj) / (1.0 + std::abs(prim_obj));
    if (res.primal_residual <= settings.primal_tol && res.dual_residual <= settings.dual_tol &&
        res.gap <= settings.gap_tol)
      status = QpStatus::Optimal;
  }

  res.v = v;
  res.lambda = lambda;
  res.w = w;
  res.objective = objective(v);
  res.iterations = iter;
  res.status = status;
  return res;
}

}  // namespace snd
