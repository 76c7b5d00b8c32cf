#pragma once

#include "ecodrive/energy.hpp"
#include "ecodrive/envelope.hpp"
#include "ecodrive/geometry.hpp"
#include "ecodrive/plant.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ecodrive {

/// One closed-loop sample. States are estimates, stored relative to the light
/// ahead (s - s_tl), so a single dataset serves every segment.
struct DataPair
{
  Point2 x;
  double u{0};
  int iter{0};
  int scenario{0};
};

struct Dataset
{
  std::vector<DataPair> pairs;
  /// Bumped on every change; caches key on it.
  std::uint64_t version{0};

  std::size_t size() const { return pairs.size(); }
};

/// Appends feasible pairs, dropping duplicates within 1e-9. Throws on an infeasible pair.
Dataset augment(const Dataset & d, std::span<const DataPair> traj, const Limits & lim);

/// Robustness settings shared by the set and value recursions.
struct RobustModel
{
  SystemMatrices<double> sys = SystemMatrices<double>::zoh();
  Limits limits;
  double L{0.05};
  SInterval W{-3, 3};

  /// Half-width of the one-step lumped noise support, 2 L max|W|.
  double step_erosion() const { return 2.0 * L * W.max_abs(); }
};

enum class TargetKind { BeforeLight, AfterLight };

const char * to_string(TargetKind k);

/// {s <= s_tl} or {s >= s_tl}.
ConvexRegion2 light_target(TargetKind kind, double s_tl);

struct ControllableSet
{
  int t{0};
  ConvexRegion2 region;
  TargetKind kind{TargetKind::AfterLight};
  double s_tl{0};
};

/**
 * Data-driven robust controllable sets R_0 .. R_t_max for a target. Stage i
 * keeps the data states whose nominal successor lies in R_{i-1} eroded by
 * the one-step noise (successors must also respect the speed box), then
 * takes their hull. Once the qualifying set stops changing the remaining
 * stages repeat.
 *
 * With `absorbing`, a successor that robustly enters the target also
 * qualifies at every stage. Positions never decrease, so for the after-light
 * target "in the target after t steps" and "within t steps" coincide for the
 * vehicle, while the data only record a few steps past each light; the
 * absorbing form keeps those states and makes the sequence nested.
 */
class SetSequence
{
public:
  SetSequence(const Dataset & d, const ConvexRegion2 & target, const RobustModel & model, int t_max,
    bool absorbing = false);

  const ConvexRegion2 & operator[](int t) const;
  int t_max() const { return static_cast<int>(R_.size()) - 1; }
  /// True when the last stages repeat, so every later stage equals the last one.
  bool settled() const;
  /// Indices of the pairs whose successor qualified at stage t (t >= 1).
  const std::vector<int> & qualifying(int t) const;

private:
  bool absorbing_;
  ConvexRegion2 entry_;
  std::vector<ConvexRegion2> R_;
  std::vector<std::vector<int>> members_;
};

ControllableSet robust_controllable_set(const Dataset & d, int t, TargetKind kind, double s_tl, const RobustModel & model);

struct VerifyReport
{
  int checked{0};
  int passed{0};
  std::vector<Point2> counterexamples;
};

/**
 * Certifies points of R_t constructively: convex weights over the data
 * reproduce the point, and the weighted successor lies in R_{t-1} eroded by
 * the noise; then recurses from a noisy successor down to t = 0. Samples are
 * the vertices plus random convex combinations.
 */
VerifyReport verify_controllable(const SetSequence & seq, const Dataset & d, const RobustModel & model, int t,
  int samples, Rng & rng);

/// Single-point certificate; throws if x is not in R_t.
bool certify_point(const SetSequence & seq, const Dataset & d, const RobustModel & model, int t, const Point2 & x,
  Rng & rng);

struct CostToGoTable
{
  double s_tl{0};
  /// One entry per data pair; J is +inf where the pair never reached the target.
  std::vector<ValuePoint> points;
  ValueEnvelope envelope;
  int iterations{0};
};

/// 0 past the light, otherwise the lower envelope of the finite values (+inf outside).
double evaluate_V(const CostToGoTable & table, const Point2 & x);

/// Reference evaluation through the convex-weights LP.
double evaluate_V_lp(const CostToGoTable & table, const Point2 & x);

struct CostToGoOptions
{
  double tol{1e-6};
  int max_iter{200};
  /// Called after iteration k with the values for reaching the target within k steps.
  std::function<void(int, const CostToGoTable &)> on_iterate;
};

/**
 * Value recursion over the data: J_j = l(x_j, u_j) + mean over noise of
 * V_k(successor + n) for pairs whose successor lies in R_k eroded by the
 * noise, +inf otherwise. Noise samples are fixed across iterations.
 */
CostToGoTable cost_to_go(const Dataset & d, double s_tl, const RobustModel & model, const EnergyModel<double> & energy,
  std::span<const double> noise, const CostToGoOptions & opt = {});

/// Keeps the envelope support only; values on the hull of what remains are unchanged.
CostToGoTable prune_value_points(const CostToGoTable & table);

/// Rebuilds the envelope from table.points (after deserialization).
void rebuild_envelope(CostToGoTable & table);

}  // namespace ecodrive
