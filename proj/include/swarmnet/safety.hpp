#pragma once

#include "swarmnet/geometry.hpp"
#include "swarmnet/minvo.hpp"
#include "swarmnet/qp.hpp"
#include "swarmnet/trajectory.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

namespace swarmnet
{

/// Hit points relative to the sensing agent, one per row (m).
using PointCloud = Eigen::Matrix<double, Eigen::Dynamic, 3>;

inline constexpr Eigen::Index kDefaultCloudCap = 1500;

/// Throws std::invalid_argument when the cloud exceeds the cap or holds
/// non-finite coordinates.
void validate_cloud(const PointCloud& cloud, Eigen::Index cap = kDefaultCloudCap);

/// Agent radius shrinking linearly from d0 at the start of the trajectory to
/// zero at its end.
struct SafetyProfile
{
  double d0 = 0.15;

  /// Radius at normalized trajectory time s in [0, 1].
  double radius(double s) const
  {
    const double c = s < 0.0 ? 0.0 : (s > 1.0 ? 1.0 : s);
    return d0 * (1.0 - c);
  }
};

struct SafetyVerdict
{
  bool safe = true;
  /// min over (segment, point) of distance - 2 d; +infinity for an empty cloud.
  double margin = std::numeric_limits<double>::infinity();
  int witness_segment = -1;
  Eigen::Index witness_point = -1;
};

/// Safe-set membership of a trajectory against a point cloud: every MINVO
/// segment simplex must keep more than 2 d(s) from every point, with d taken
/// at the segment's start fraction.
SafetyVerdict classify_trajectory(const SplineTrajectory& traj, const PointCloud& cloud,
                                  const SafetyProfile& profile);

/// Same decision as classify_trajectory(...).safe, stopping at the first
/// offending point.
bool is_trajectory_safe(const SplineTrajectory& traj, const PointCloud& cloud, const SafetyProfile& profile);

/// Random trajectory projected onto the initial-condition and actuation
/// constraints. Control point k is drawn uniformly in the box reachable at
/// its Greville time, +-v_max * tau_k. Throws std::runtime_error if the
/// projection is infeasible (inconsistent x0).
SplineTrajectory sample_random_trajectory(const InitialState& x0, const Limits& limits,
                                          double horizon, std::uint64_t rng_seed);

/// Drifted variant: control point k is drawn in tau_k * (drift + spread *
/// U(-v_max, v_max)) before the same projection.
SplineTrajectory sample_random_trajectory(const InitialState& x0, const Limits& limits, double horizon,
                                          std::uint64_t rng_seed, const Vector3& drift, double spread);

}  // namespace swarmnet
