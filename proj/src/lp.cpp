#include "ecodrive/lp.hpp"

#include "ecodrive/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ecodrive {

namespace {

class Simplex
{
public:
  Simplex(Eigen::MatrixXd A, Eigen::VectorXd b, double tol) : A_(std::move(A)), b_(std::move(b)), tol_(tol)
  {
    m_ = A_.rows();
    n_ = A_.cols();
    sign_.resize(m_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      sign_(i) = 1.0;
      if (b_(i) < 0) {
        sign_(i) = -1.0;
        A_.row(i) *= -1.0;
        b_(i) *= -1.0;
      }
    }
    // Columns n_ .. n_+m_-1 are artificials.
    basis_.resize(static_cast<std::size_t>(m_));
    for (Eigen::Index i = 0; i < m_; ++i) { basis_[static_cast<std::size_t>(i)] = n_ + i; }
    Binv_ = Eigen::MatrixXd::Identity(m_, m_);
    xB_ = b_;
  }

  Eigen::VectorXd column(Eigen::Index j) const
  {
    if (j < n_) { return A_.col(j); }
    return Eigen::VectorXd::Unit(m_, j - n_);
  }

  // Returns false if unbounded.
  bool optimize(const Eigen::VectorXd & cost, bool allow_artificial, int max_iter, int & iters)
  {
    int degenerate = 0;
    while (true) {
      if (++iters > max_iter) { throw Error("simplex iteration limit reached"); }
      if (iters % 64 == 0) { refactor(); }
      Eigen::VectorXd cB(m_);
      for (Eigen::Index i = 0; i < m_; ++i) { cB(i) = cost(basis_[static_cast<std::size_t>(i)]); }
      y_ = Binv_.transpose() * cB;

      const bool bland = degenerate > 50;
      const Eigen::Index ncols = allow_artificial ? n_ + m_ : n_;
      Eigen::Index enter = -1;
      double best = -tol_;
      std::vector<char> in_basis(static_cast<std::size_t>(n_ + m_), 0);
      for (auto j : basis_) { in_basis[static_cast<std::size_t>(j)] = 1; }
      const Eigen::VectorXd dA = cost.head(n_).transpose() - y_.transpose() * A_;
      for (Eigen::Index j = 0; j < ncols; ++j) {
        if (in_basis[static_cast<std::size_t>(j)]) { continue; }
        const double d = j < n_ ? dA(j) : cost(j) - y_(j - n_);
        if (d < best) {
          enter = j;
          if (bland) { break; }
          best = d;
        }
      }
      if (enter < 0) { return true; }

      const Eigen::VectorXd dir = Binv_ * column(enter);
      Eigen::Index leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (dir(i) <= tol_) { continue; }
        const double r = std::max(0.0, xB_(i)) / dir(i);
        if (r < ratio - 1e-12 ||
            (r <= ratio + 1e-12 && leave >= 0 &&
             (bland ? basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]
                    : dir(i) > dir(leave)))) {
          ratio = r;
          leave = i;
        }
      }
      if (leave < 0) { return false; }
      degenerate = ratio <= 1e-12 ? degenerate + 1 : 0;
      pivot(leave, enter, dir);
    }
  }

  // Pivot basic artificials out where a structural column can replace them.
  void expel_artificials()
  {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (basis_[static_cast<std::size_t>(i)] < n_) { continue; }
      const Eigen::RowVectorXd row = Binv_.row(i) * A_;
      Eigen::Index best = -1;
      double mag = 1e-7;
      for (Eigen::Index j = 0; j < n_; ++j) {
        if (std::find(basis_.begin(), basis_.end(), j) != basis_.end()) { continue; }
        if (std::abs(row(j)) > mag) {
          mag = std::abs(row(j));
          best = j;
        }
      }
      if (best >= 0) { pivot(i, best, Binv_ * column(best)); }
    }
  }

  Eigen::VectorXd solution() const
  {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Eigen::Index j = basis_[static_cast<std::size_t>(i)];
      if (j < n_) { x(j) = std::max(0.0, xB_(i)); }
    }
    return x;
  }

  double artificial_sum() const
  {
    double s = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (basis_[static_cast<std::size_t>(i)] >= n_) { s += std::abs(xB_(i)); }
    }
    return s;
  }

  Eigen::VectorXd duals() const { return y_.cwiseProduct(sign_); }
  Eigen::Index rows() const { return m_; }
  Eigen::Index cols() const { return n_; }
  double b_scale() const { return std::max(1.0, b_.cwiseAbs().maxCoeff()); }

private:
  void pivot(Eigen::Index leave, Eigen::Index enter, const Eigen::VectorXd & dir)
  {
    const double p = dir(leave);
    const double step = xB_(leave) / p;
    xB_ -= step * dir;
    xB_(leave) = step;
    const Eigen::RowVectorXd prow = Binv_.row(leave) / p;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (i != leave) { Binv_.row(i) -= dir(i) * prow; }
    }
    Binv_.row(leave) = prow;
    basis_[static_cast<std::size_t>(leave)] = enter;
  }

  void refactor()
  {
    Eigen::MatrixXd B(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) { B.col(i) = column(basis_[static_cast<std::size_t>(i)]); }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    Binv_ = lu.inverse();
    xB_ = Binv_ * b_;
  }

  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
  Eigen::VectorXd sign_;
  double tol_;
  Eigen::Index m_{0}, n_{0};
  std::vector<Eigen::Index> basis_;
  Eigen::MatrixXd Binv_;
  Eigen::VectorXd xB_;
  Eigen::VectorXd y_;
};

}  // namespace

LpResult solve_lp(const LpProblem & p, double tol, int max_iter)
{
  const Eigen::Index n = p.c.size();
  const Eigen::Index me = p.A_eq.rows();
  const Eigen::Index mu = p.A_ub.rows();
  if ((me > 0 && p.A_eq.cols() != n) || (mu > 0 && p.A_ub.cols() != n) || p.b_eq.size() != me ||
      p.b_ub.size() != mu) {
    throw Error("lp dimension mismatch");
  }

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(me + mu, n + mu);
  Eigen::VectorXd b(me + mu);
  if (me > 0) { A.topLeftCorner(me, n) = p.A_eq; }
  if (mu > 0) {
    A.bottomLeftCorner(mu, n) = p.A_ub;
    A.bottomRightCorner(mu, mu).setIdentity();
  }
  b << p.b_eq, p.b_ub;

  LpResult res;
  if (me + mu == 0) {
    res.x = Eigen::VectorXd::Zero(n);
    res.status = (p.c.array() < 0).any() ? LpStatus::Unbounded : LpStatus::Optimal;
    return res;
  }

  Simplex s(A, b, tol);
  const Eigen::Index N = n + mu, m = me + mu;
  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(N + m);
  phase1.tail(m).setOnes();
  s.optimize(phase1, true, max_iter, res.iterations);
  if (s.artificial_sum() > 1e-7 * s.b_scale()) {
    res.status = LpStatus::Infeasible;
    return res;
  }
  s.expel_artificials();

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(N + m);
  phase2.head(n) = p.c;
  if (!s.optimize(phase2, false, max_iter, res.iterations)) {
    res.status = LpStatus::Unbounded;
    return res;
  }
  const Eigen::VectorXd x = s.solution();
  res.status = LpStatus::Optimal;
  res.x = x.head(n);
  res.objective = p.c.dot(res.x);
  res.y = s.duals();
  return res;
}

}  // namespace ecodrive
