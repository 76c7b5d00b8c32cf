#include "ecodrive/qp.hpp"

#include "ecodrive/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace ecodrive {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct IpmState
{
  VectorXd z, y, lambda, s;
  int iterations{0};
  bool converged{false};
  double cond{0};
};

double inf_norm(const VectorXd & v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double step_to_boundary(const VectorXd & v, const VectorXd & dv)
{
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0) { a = std::min(a, -v(i) / dv(i)); }
  }
  return a;
}

IpmState interior_point(const MatrixXd & H, const VectorXd & c, const MatrixXd & A, const VectorXd & b,
  const MatrixXd & G, const VectorXd & h, double tol, int max_iter, const VectorXd & z0)
{
  const Eigen::Index n = c.size(), p = b.size(), m = h.size();
  IpmState st;
  st.z = z0.size() == n ? z0 : VectorXd::Zero(n);
  st.y = VectorXd::Zero(p);
  st.s = VectorXd::Ones(m);
  if (m > 0) {
    const VectorXd gap = h - G * st.z;
    for (Eigen::Index i = 0; i < m; ++i) { st.s(i) = std::max(gap(i), 1e-2); }
  }
  // Centered start: every s_i lambda_i = 1.
  st.lambda = st.s.cwiseInverse();

  const double scale_d = 1.0 + inf_norm(c);
  const double scale_p = 1.0 + std::max(inf_norm(b), inf_norm(h));
  const double reg = 1e-12;

  // Near the solution the scaled KKT system can lose the last digits and
  // drift; the best iterate seen is kept for that case.
  IpmState best;
  double best_merit = std::numeric_limits<double>::infinity();

  MatrixXd K(n + p, n + p);
  for (st.iterations = 0; st.iterations < max_iter; ++st.iterations) {
    const VectorXd rd = H * st.z + c + A.transpose() * st.y + G.transpose() * st.lambda;
    const VectorXd rp = A * st.z - b;
    const VectorXd ri = G * st.z + st.s - h;
    const double mu = m > 0 ? st.s.dot(st.lambda) / static_cast<double>(m) : 0.0;
    if (inf_norm(rd) <= tol * scale_d && inf_norm(rp) <= tol * scale_p && inf_norm(ri) <= tol * scale_p &&
        mu <= tol * 1e-1) {
      st.converged = true;
      break;
    }
    const double merit = std::max({inf_norm(rd) / scale_d, inf_norm(rp) / scale_p, inf_norm(ri) / scale_p, mu});
    if (merit < best_merit) {
      best_merit = merit;
      best = st;
    }

    const VectorXd w = st.lambda.cwiseQuotient(st.s);
    K.setZero();
    K.topLeftCorner(n, n) = H + G.transpose() * w.asDiagonal() * G;
    K.topLeftCorner(n, n).diagonal().array() += reg;
    K.topRightCorner(n, p) = A.transpose();
    K.bottomLeftCorner(p, n) = A;
    K.bottomRightCorner(p, p).diagonal().setConstant(-reg);
    const Eigen::PartialPivLU<MatrixXd> lu(K);

    // Solves for (dz, dy, dlambda, ds) given the complementarity residual rc.
    auto direction = [&](const VectorXd & rc, VectorXd & dz, VectorXd & dy, VectorXd & dl, VectorXd & ds) {
      VectorXd rhs(n + p);
      rhs.head(n) = -rd + G.transpose() * (rc - st.lambda.cwiseProduct(ri)).cwiseQuotient(st.s);
      rhs.tail(p) = -rp;
      VectorXd sol = lu.solve(rhs);
      sol += lu.solve(rhs - K * sol);
      dz = sol.head(n);
      dy = sol.tail(p);
      ds = -ri - G * dz;
      dl = (-rc - st.lambda.cwiseProduct(ds)).cwiseQuotient(st.s);
    };

    VectorXd dz, dy, dl, ds;
    if (m == 0) {
      direction(VectorXd(), dz, dy, dl, ds);
      st.z += dz;
      st.y += dy;
      continue;
    }

    direction(st.s.cwiseProduct(st.lambda), dz, dy, dl, ds);
    const double a_aff = std::min(step_to_boundary(st.s, ds), step_to_boundary(st.lambda, dl));
    const double mu_aff = (st.s + a_aff * ds).dot(st.lambda + a_aff * dl) / static_cast<double>(m);
    const double sigma = std::pow(mu_aff / mu, 3);

    const VectorXd rc = st.s.cwiseProduct(st.lambda) + ds.cwiseProduct(dl) - VectorXd::Constant(m, sigma * mu);
    direction(rc, dz, dy, dl, ds);
    const double a = std::min(1.0, 0.995 * std::min(step_to_boundary(st.s, ds), step_to_boundary(st.lambda, dl)));
    st.z += a * dz;
    st.y += a * dy;
    st.lambda += a * dl;
    st.s += a * ds;
    st.cond = 1.0 / std::max(1e-300, lu.rcond());
  }
  if (!st.converged && best_merit < std::numeric_limits<double>::infinity()) {
    const int iterations = st.iterations;
    const double cond = st.cond;
    st = best;
    st.iterations = iterations;
    st.cond = cond;
  }
  return st;
}

}  // namespace

namespace {

/**
 * Re-solves the equality-constrained QP on the rows the interior point left
 * active (lambda above slack), then corrects the guess a few times: drop the
 * most negative multiplier or add the most violated row. A tiny proximal
 * term with iterative refinement copes with degenerate active sets.
 */
bool polish(const QpProblem & p, const VectorXd & row_scale, QpResult & r)
{
  const Eigen::Index n = p.size(), ne = p.b.size(), m = p.h.size();
  const MatrixXd G = row_scale.asDiagonal() * p.G;
  const VectorXd h = row_scale.cwiseProduct(p.h);
  const VectorXd slack0 = h - G * r.z;
  const VectorXd lam0 = r.lambda.cwiseQuotient(row_scale);
  std::vector<bool> active(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) { active[static_cast<std::size_t>(i)] = lam0(i) > slack0(i); }

  const double delta = 1e-9;
  const double start = kkt_residuals(p, r).max();
  VectorXd z = r.z, y = r.y, lam = lam0;
  for (int round = 0; round < 20; ++round) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (active[static_cast<std::size_t>(i)]) { act.push_back(i); }
    }
    const Eigen::Index na = static_cast<Eigen::Index>(act.size()), k = n + ne + na;
    MatrixXd K = MatrixXd::Zero(k, k);
    VectorXd rhs(k), x(k);
    K.topLeftCorner(n, n) = p.H;
    rhs.head(n) = -p.c;
    x.head(n) = z;
    if (ne) {
      K.block(n, 0, ne, n) = p.A;
      K.block(0, n, n, ne) = p.A.transpose();
      rhs.segment(n, ne) = p.b;
      x.segment(n, ne) = y;
    }
    for (Eigen::Index j = 0; j < na; ++j) {
      const Eigen::Index i = act[static_cast<std::size_t>(j)];
      K.row(n + ne + j).head(n) = G.row(i);
      K.col(n + ne + j).head(n) = G.row(i).transpose();
      rhs(n + ne + j) = h(i);
      x(n + ne + j) = lam(i);
    }
    MatrixXd Kreg = K;
    Kreg.topLeftCorner(n, n).diagonal().array() += delta;
    Kreg.bottomRightCorner(ne + na, ne + na).diagonal().array() -= delta;
    const Eigen::PartialPivLU<MatrixXd> lu(Kreg);
    for (int it = 0; it < 10; ++it) { x += lu.solve(rhs - K * x); }
    if (!x.allFinite()) { return false; }

    z = x.head(n);
    if (ne) { y = x.segment(n, ne); }
    lam.setZero();
    Eigen::Index worst_dual = -1;
    double most_negative = -1e-12;
    for (Eigen::Index j = 0; j < na; ++j) {
      const Eigen::Index i = act[static_cast<std::size_t>(j)];
      lam(i) = x(n + ne + j);
      if (lam(i) < most_negative) {
        most_negative = lam(i);
        worst_dual = i;
      }
    }
    if (worst_dual >= 0) {
      active[static_cast<std::size_t>(worst_dual)] = false;
      continue;
    }
    const VectorXd slack = h - G * z;
    Eigen::Index worst_primal = -1;
    double most_violated = -1e-12;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!active[static_cast<std::size_t>(i)] && slack(i) < most_violated) {
        most_violated = slack(i);
        worst_primal = i;
      }
    }
    if (worst_primal < 0) { break; }
    active[static_cast<std::size_t>(worst_primal)] = true;
  }

  QpResult cand = r;
  cand.z = z;
  cand.y = y;
  cand.lambda = row_scale.cwiseProduct(lam.cwiseMax(0.0));
  cand.objective = 0.5 * z.dot(p.H * z) + p.c.dot(z);
  if (kkt_residuals(p, cand).max() >= start) { return false; }
  r = cand;
  return true;
}

}  // namespace

double KktResiduals::max() const
{
  return std::max({stationarity, primal_eq, primal_ineq, dual_sign, complementarity});
}

KktResiduals kkt_residuals(const QpProblem & p, const QpResult & r)
{
  KktResiduals k;
  VectorXd g = p.H * r.z + p.c;
  if (p.b.size()) { g += p.A.transpose() * r.y; }
  if (p.h.size()) { g += p.G.transpose() * r.lambda; }
  k.stationarity = inf_norm(g);
  if (p.b.size()) { k.primal_eq = inf_norm(p.A * r.z - p.b); }
  if (p.h.size()) {
    const VectorXd slack = p.h - p.G * r.z;
    k.primal_ineq = std::max(0.0, -slack.minCoeff());
    k.dual_sign = std::max(0.0, -r.lambda.minCoeff());
    k.complementarity = inf_norm(slack.cwiseProduct(r.lambda));
  }
  return k;
}

QpResult solve_qp(const QpProblem & p, const QpOptions & opt)
{
  const Eigen::Index n = p.size(), ne = p.b.size(), m = p.h.size();
  if (p.H.rows() != n || p.H.cols() != n || (ne && p.A.cols() != n) || p.A.rows() != ne ||
      (m && p.G.cols() != n) || p.G.rows() != m) {
    throw Error("qp dimension mismatch");
  }
  QpResult res;

  // Unit-norm inequality rows; multipliers are mapped back at the end.
  VectorXd row_scale = VectorXd::Ones(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double nr = p.G.row(i).norm();
    if (nr > 0) { row_scale(i) = 1.0 / nr; }
  }
  const MatrixXd G = row_scale.asDiagonal() * p.G;
  const VectorXd h = row_scale.cwiseProduct(p.h);

  VectorXd z0;
  if (m > 0) {
    // Phase 1 over (z, t): min t  s.t.  A z = b,  G z - t <= h,  -t <= 1.
    MatrixXd H1 = MatrixXd::Zero(n + 1, n + 1);
    H1.topLeftCorner(n, n).diagonal().setConstant(1e-8);
    VectorXd c1 = VectorXd::Zero(n + 1);
    c1(n) = 1.0;
    MatrixXd A1 = MatrixXd::Zero(ne, n + 1);
    if (ne) { A1.leftCols(n) = p.A; }
    MatrixXd G1 = MatrixXd::Zero(m + 1, n + 1);
    G1.topLeftCorner(m, n) = G;
    G1.col(n).setConstant(-1.0);
    VectorXd h1(m + 1);
    h1 << h, 1.0;
    const IpmState ph1 = interior_point(H1, c1, A1, p.b, G1, h1, opt.tol, opt.max_iter, {});
    res.iterations += ph1.iterations;
    const double t = ph1.z(n);
    if (t > opt.infeasible_tol * (1.0 + inf_norm(h))) {
      res.status = QpStatus::Infeasible;
      const VectorXd lam = row_scale.cwiseProduct(ph1.lambda.head(m));
      const double w = lam.sum();
      res.farkas_ineq = lam / w;
      res.farkas_eq = ph1.y / w;
      return res;
    }
    // A strictly interior phase-1 point is a good phase-2 start.
    if (t < 0) { z0 = ph1.z.head(n); }
  }

  const IpmState st = interior_point(p.H, p.c, p.A, p.b, G, h, opt.tol, opt.max_iter, z0);
  res.iterations += st.iterations;
  res.z = st.z;
  res.y = st.y;
  res.lambda = row_scale.cwiseProduct(st.lambda);
  res.status = QpStatus::Optimal;
  res.objective = 0.5 * st.z.dot(p.H * st.z) + p.c.dot(st.z);
  if (m > 0) { polish(p, row_scale, res); }
  if (kkt_residuals(p, res).max() > 1e-6) {
    std::ostringstream os;
    os << "qp numerical breakdown after " << st.iterations << " iterations (kkt residual "
       << kkt_residuals(p, res).max() << ", kkt condition ~" << st.cond << ")";
    throw Error(os.str());
  }
  return res;
}

}  // namespace ecodrive
