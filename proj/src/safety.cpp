#include "swarmnet/safety.hpp"

#include <random>
#include <stdexcept>
#include <string>

namespace swarmnet
{

void validate_cloud(const PointCloud& cloud, Eigen::Index cap)
{
  if (cloud.rows() > cap)
    throw std::invalid_argument("point cloud has " + std::to_string(cloud.rows()) +
                                " points, cap is " + std::to_string(cap));
  if (!cloud.allFinite()) throw std::invalid_argument("point cloud has non-finite coordinates");
}

SafetyVerdict classify_trajectory(const SplineTrajectory& traj, const PointCloud& cloud,
                                  const SafetyProfile& profile)
{
  SafetyVerdict verdict;
  if (cloud.rows() == 0) return verdict;

  const MinvoSegments segs = bspline_to_minvo(traj);
  const double span = traj.tf - traj.t0;
  for (int s = 0; s < static_cast<int>(segs.simplices.size()); ++s)
  {
    const Simplex& simplex = segs.simplices[s];
    const double threshold = 2.0 * profile.radius((segs.intervals[s].first - traj.t0) / span);
    const Vector3 lo = simplex.colwise().minCoeff().transpose();
    const Vector3 hi = simplex.colwise().maxCoeff().transpose();
    for (Eigen::Index i = 0; i < cloud.rows(); ++i)
    {
      const Vector3 p = cloud.row(i).transpose();
      // box distance is a lower bound on the simplex distance
      const double lower = (p - p.cwiseMax(lo).cwiseMin(hi)).norm();
      if (lower - threshold >= verdict.margin) continue;
      const double m = point_to_simplex_distance<double>(p, simplex) - threshold;
      if (m < verdict.margin)
      {
        verdict.margin = m;
        verdict.witness_segment = s;
        verdict.witness_point = i;
      }
    }
  }
  verdict.safe = verdict.margin > 0.0;
  return verdict;
}

bool is_trajectory_safe(const SplineTrajectory& traj, const PointCloud& cloud, const SafetyProfile& profile)
{
  if (cloud.rows() == 0) return true;
  const MinvoSegments segs = bspline_to_minvo(traj);
  const double span = traj.tf - traj.t0;
  for (int s = 0; s < static_cast<int>(segs.simplices.size()); ++s)
  {
    const Simplex& simplex = segs.simplices[s];
    const double threshold = 2.0 * profile.radius((segs.intervals[s].first - traj.t0) / span);
    const Vector3 lo = simplex.colwise().minCoeff().transpose();
    const Vector3 hi = simplex.colwise().maxCoeff().transpose();
    for (Eigen::Index i = 0; i < cloud.rows(); ++i)
    {
      const Vector3 p = cloud.row(i).transpose();
      if ((p - p.cwiseMax(lo).cwiseMin(hi)).norm() > threshold) continue;
      if (point_to_simplex_distance<double>(p, simplex) <= threshold) return false;
    }
  }
  return true;
}

SplineTrajectory sample_random_trajectory(const InitialState& x0, const Limits& limits,
                                          double horizon, std::uint64_t rng_seed)
{
  return sample_random_trajectory(x0, limits, horizon, rng_seed, Vector3::Zero(), 1.0);
}

SplineTrajectory sample_random_trajectory(const InitialState& x0, const Limits& limits, double horizon,
                                          std::uint64_t rng_seed, const Vector3& drift, double spread)
{
  if (!limits.valid()) throw std::invalid_argument("sample_random_trajectory: limits must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("sample_random_trajectory: horizon must be positive");

  const KnotVector knots = build_clamped_knots(0.0, horizon, kPlannerCps);
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  ControlPoints cps(kPlannerCps, 3);
  for (int k = 0; k < kPlannerCps; ++k)
  {
    const double greville =
        (knots.knots[k + 1] + knots.knots[k + 2] + knots.knots[k + 3]) / 3.0;
    for (int axis = 0; axis < 3; ++axis) cps(k, axis) = (drift(axis) + spread * unit(rng) * limits.v_max(axis)) * greville;
  }

  const QpProblem prob = assemble(flatten_cps(cps), x0, limits, std::nullopt, knots);
  const QpSolution sol = solve(prob);
  if (sol.status != QpStatus::optimal)
    throw std::runtime_error("sample_random_trajectory: projection infeasible for the given x0");

  SplineTrajectory traj;
  traj.cps = unflatten_cps(sol.q);
  traj.knots = knots;
  traj.t0 = 0.0;
  traj.tf = horizon;
  return traj;
}

}  // namespace swarmnet
