#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace ecodrive {

/// Quadratic stage cost over the basis [v, u, 1]; kJ per step.
template <typename Scalar = double>
struct EnergyModel
{
  Eigen::Matrix<Scalar, 3, 3> P = Eigen::Matrix<Scalar, 3, 3>::Zero();
};

template <typename Scalar>
Scalar stage_cost(const EnergyModel<Scalar> & m, Scalar v, Scalar u)
{
  const Eigen::Matrix<Scalar, 3, 1> z(v, u, Scalar(1));
  return z.dot(m.P * z);
}

/// Ground-truth model used by the simulator.
EnergyModel<double> default_energy_model();

inline double true_energy(const EnergyModel<double> & truth, double v, double u) { return stage_cost(truth, v, u); }

/// Smallest eigenvalue of the symmetric part.
double min_eigenvalue(const Eigen::Matrix3d & P);

struct EnergySample
{
  double v{0};
  double u{0};
  double dE{0};
};

struct EnergyFit
{
  EnergyModel<double> model;
  double rms_residual{0};
  /// (predicted total - sampled total) / sampled total.
  double total_rel_error{0};
  /// Whether the unconstrained fit had to be pulled into the PSD cone.
  bool projected{false};
  int iterations{0};
};

/**
 * Least-squares fit of a PSD P. Throws "insufficient excitation" when the
 * six monomials {v^2, vu, v, u^2, u, 1} are not independent over the samples.
 */
EnergyFit fit_energy_model(std::span<const EnergySample> samples, double tol = 1e-10, int max_iter = 200000);

}  // namespace ecodrive
