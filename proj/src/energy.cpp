#include "ecodrive/energy.hpp"

#include "ecodrive/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace ecodrive {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
const char * const kMonomials[6] = {"v^2", "v*u", "v", "u^2", "u", "1"};

// Isometric coordinates of a symmetric 3x3 matrix: <P, zz^T> = g(z) . q(P)
// and ||P||_F = ||q(P)||.
Eigen::Matrix<double, 6, 1> features(double v, double u)
{
  Eigen::Matrix<double, 6, 1> g;
  g << v * v, kSqrt2 * v * u, kSqrt2 * v, u * u, kSqrt2 * u, 1.0;
  return g;
}

Eigen::Matrix3d unpack(const Eigen::Matrix<double, 6, 1> & q)
{
  Eigen::Matrix3d P;
  P << q(0), q(1) / kSqrt2, q(2) / kSqrt2,
       q(1) / kSqrt2, q(3), q(4) / kSqrt2,
       q(2) / kSqrt2, q(4) / kSqrt2, q(5);
  return P;
}

Eigen::Matrix<double, 6, 1> pack(const Eigen::Matrix3d & P)
{
  Eigen::Matrix<double, 6, 1> q;
  q << P(0, 0), kSqrt2 * P(0, 1), kSqrt2 * P(0, 2), P(1, 1), kSqrt2 * P(1, 2), P(2, 2);
  return q;
}

Eigen::Matrix<double, 6, 1> project_psd(const Eigen::Matrix<double, 6, 1> & q)
{
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(unpack(q));
  const Eigen::Vector3d lam = es.eigenvalues().cwiseMax(0.0);
  return pack(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
}

double rms(std::span<const EnergySample> xs, double EnergySample::*field)
{
  double acc = 0.0;
  for (const auto & x : xs) { acc += x.*field * (x.*field); }
  const double r = std::sqrt(acc / static_cast<double>(xs.size()));
  return r > 0.0 ? r : 1.0;
}

}  // namespace

EnergyModel<double> default_energy_model()
{
  EnergyModel<double> m;
  m.P << 0.08, 0.10, 0.0,
         0.10, 1.50, 0.0,
         0.0,  0.0,  0.20;
  return m;
}

double min_eigenvalue(const Eigen::Matrix3d & P)
{
  const Eigen::Matrix3d S = 0.5 * (P + P.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(S, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

EnergyFit fit_energy_model(std::span<const EnergySample> samples, double tol, int max_iter)
{
  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
  if (n < 6) {
    throw Error("insufficient excitation: " + std::to_string(n) + " samples cannot determine 6 monomials");
  }

  // Work with v and u scaled to unit RMS; congruence preserves PSD-ness.
  const double sv = rms(samples, &EnergySample::v);
  const double su = rms(samples, &EnergySample::u);
  const Eigen::Vector3d scale(sv, su, 1.0);

  Eigen::MatrixXd G(n, 6);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto & s = samples[static_cast<std::size_t>(i)];
    G.row(i) = features(s.v / sv, s.u / su).transpose();
    y(i) = s.dE;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeThinV);
  const auto & sig = svd.singularValues();
  const double cutoff = 1e-10 * std::max(1.0, sig(0));
  std::string weak;
  for (int j = 0; j < 6; ++j) {
    if (sig(j) > cutoff) { continue; }
    Eigen::Index idx = 0;
    svd.matrixV().col(j).cwiseAbs().maxCoeff(&idx);
    weak += weak.empty() ? "" : ", ";
    weak += kMonomials[idx];
  }
  if (!weak.empty()) { throw Error("insufficient excitation: missing monomial directions {" + weak + "}"); }

  const Eigen::Matrix<double, 6, 6> H = G.transpose() * G;
  const Eigen::Matrix<double, 6, 1> c = G.transpose() * y;
  Eigen::Matrix<double, 6, 1> q = H.ldlt().solve(c);

  EnergyFit fit;
  if (min_eigenvalue(unpack(q)) < -1e-12 * std::max(1.0, q.norm())) {
    // Accelerated projected gradient with restart on the PSD cone.
    fit.projected = true;
    const double lip = Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>>(H, Eigen::EigenvaluesOnly)
                         .eigenvalues()
                         .maxCoeff();
    auto obj = [&](const Eigen::Matrix<double, 6, 1> & p) { return 0.5 * p.dot(H * p) - c.dot(p); };
    q = project_psd(q);
    Eigen::Matrix<double, 6, 1> yk = q;
    double t = 1.0;
    double f_prev = obj(q);
    for (fit.iterations = 1; fit.iterations <= max_iter; ++fit.iterations) {
      const Eigen::Matrix<double, 6, 1> next = project_psd(yk - (H * yk - c) / lip);
      const double f_next = obj(next);
      const double step = (next - q).norm();
      if (f_next > f_prev) {
        yk = q;
        t = 1.0;
        continue;
      }
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      yk = next + ((t - 1.0) / t_next) * (next - q);
      q = next;
      t = t_next;
      f_prev = f_next;
      if (step <= tol) { break; }
    }
  }

  const Eigen::Matrix3d Ps = unpack(q);
  fit.model.P = Ps.cwiseQuotient(scale * scale.transpose());

  double sq = 0.0, pred_total = 0.0, total = 0.0;
  for (const auto & s : samples) {
    const double pred = stage_cost(fit.model, s.v, s.u);
    sq += (pred - s.dE) * (pred - s.dE);
    pred_total += pred;
    total += s.dE;
  }
  fit.rms_residual = std::sqrt(sq / static_cast<double>(n));
  fit.total_rel_error = total != 0.0 ? (pred_total - total) / total : 0.0;
  return fit;
}

}  // namespace ecodrive
