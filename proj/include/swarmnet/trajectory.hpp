#pragma once

#include <Eigen/Dense>

#include <vector>

namespace swarmnet
{

/// Number of control points per axis of a planner trajectory.
inline constexpr int kPlannerCps = 10;
/// Spline degree. Only cubic splines are supported.
inline constexpr int kSplineDegree = 3;

using Vector3 = Eigen::Vector3d;
/// Control points, one row per point, columns x, y, z.
using ControlPoints = Eigen::Matrix<double, Eigen::Dynamic, 3>;

struct KnotVector
{
  std::vector<double> knots;
  int degree = kSplineDegree;

  int numControlPoints() const { return static_cast<int>(knots.size()) - degree - 1; }
  int numSegments() const { return numControlPoints() - degree; }
  /// Knot interval [knots[seg + degree], knots[seg + degree + 1]] of a segment.
  double segmentStart(int seg) const { return knots[seg + degree]; }
  double segmentEnd(int seg) const { return knots[seg + degree + 1]; }
};

/// Clamped knots with uniform interior spacing. Throws std::invalid_argument.
KnotVector build_clamped_knots(double t0, double tf, int n_cp, int degree = kSplineDegree);

/// Clamped cubic B-spline over [t0, tf], control points in the ego frame.
struct SplineTrajectory
{
  ControlPoints cps;
  KnotVector knots;
  double t0 = 0.0;
  double tf = 1.0;

  int numSegments() const { return knots.numSegments(); }
};

/// Builds a trajectory with uniform clamped knots. Throws std::invalid_argument
/// when the span is empty or there are fewer than degree + 1 control points.
SplineTrajectory make_trajectory(const ControlPoints& cps, double t0, double tf);

/// Position (deriv 0), velocity (1) or acceleration (2) at time t.
/// Throws std::domain_error when t is outside [t0, tf], std::invalid_argument
/// for unsupported derivative orders.
Vector3 eval_spline(const SplineTrajectory& traj, double t, int deriv = 0);

/// Same as eval_spline but clamps t into the time span. Past the end the
/// curve holds its final position with zero derivatives.
Vector3 eval_spline_clamped(const SplineTrajectory& traj, double t, int deriv = 0);

/// Index of the segment whose knot interval contains t.
int find_segment(const KnotVector& knots, double t);

/// Linear map from control points to the control points of the derivative
/// spline: rows = n_cp - 1, cols = n_cp.
Eigen::MatrixXd derivative_cp_map(const KnotVector& knots);

/// Knot vector of the derivative spline (first and last knot dropped).
KnotVector derivative_knots(const KnotVector& knots);

/// Power-basis coefficients of one segment in local parameter u in [0, 1].
/// Returns B with (degree+1) rows (u^0 .. u^degree) and (degree+1) columns
/// for the active control points seg .. seg+degree.
Eigen::MatrixXd segment_power_basis(const KnotVector& knots, int seg);

/// Copy of the trajectory with every control point shifted.
SplineTrajectory translated(const SplineTrajectory& traj, const Vector3& offset);

/// Flattens control points row-major: [x0 y0 z0 x1 y1 z1 ...].
Eigen::VectorXd flatten_cps(const ControlPoints& cps);
ControlPoints unflatten_cps(const Eigen::VectorXd& q);

}  // namespace swarmnet
