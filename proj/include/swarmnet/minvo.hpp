#pragma once

#include "swarmnet/trajectory.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace swarmnet
{

/// Four vertices of a tetrahedron, one per row.
using Simplex = Eigen::Matrix<double, 4, 3>;
using VelocityCps = Eigen::Matrix<double, 3, 3>;
using AccelerationCps = Eigen::Matrix<double, 2, 3>;

/// MINVO basis of the given degree (1, 2 or 3) on u in [0, 1].
/// Row i holds the power-basis coefficients (u^0 .. u^degree) of basis
/// polynomial i. The basis polynomials are non-negative on [0, 1] and sum
/// to one, so a curve is a convex combination of its MINVO control points.
Eigen::MatrixXd minvo_basis(int degree);

struct MinvoSegments
{
  std::vector<Simplex> simplices;
  std::vector<std::pair<double, double>> intervals;
};

/// Linear maps from B-spline control points (one axis) to stacked MINVO
/// control points: (degree + 1) rows per segment for position, degree rows
/// for velocity, degree - 1 rows for acceleration.
Eigen::MatrixXd minvo_position_map(const KnotVector& knots);
Eigen::MatrixXd minvo_velocity_map(const KnotVector& knots);
Eigen::MatrixXd minvo_acceleration_map(const KnotVector& knots);

MinvoSegments bspline_to_minvo(const SplineTrajectory& traj);

/// Velocity MINVO control points per segment (m/s).
std::vector<VelocityCps> h_v(const SplineTrajectory& traj);
/// Acceleration MINVO control points per segment (m/s^2).
std::vector<AccelerationCps> h_a(const SplineTrajectory& traj);

/// Evaluates sum_i vertices.row(i) * lambda_i(u) for a MINVO basis whose
/// degree is vertices.rows() - 1.
Vector3 eval_minvo(const Eigen::Matrix<double, Eigen::Dynamic, 3>& vertices, double u);

}  // namespace swarmnet
