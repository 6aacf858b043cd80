#include "swarmnet/minvo.hpp"

#include <cmath>
#include <stdexcept>

namespace swarmnet
{

namespace
{

// Degree-3 MINVO basis on [0, 1], descending powers (u^3, u^2, u, 1) per row.
constexpr double kMinvo3[4][4] = {
    {-3.4416308968564117698, 6.9895481477801393311, -4.4622887507045296829, 0.91437149978080234369},
    {6.6792587327074839365, -11.845989901556746915, 5.2523596690684613009, 0.0},
    {-6.6792587327074839365, 8.1917862965657040064, -1.5981560640774179483, 0.085628500219197656307},
    {3.4416308968564117698, -3.3353445427890959785, 0.80808514571348655231, 0.0},
};

Eigen::MatrixXd make_minvo_basis(int degree)
{
  Eigen::MatrixXd a(degree + 1, degree + 1);
  switch (degree)
  {
    case 1:
      // 1 - u, u
      a << 1.0, -1.0,
           0.0, 1.0;
      break;
    case 2:
    {
      const double s3 = std::sqrt(3.0);
      a << (2.0 + s3) / 4.0, -(3.0 + s3) / 2.0, 1.5,
           0.0, 3.0, -3.0,
           (2.0 - s3) / 4.0, -(3.0 - s3) / 2.0, 1.5;
      break;
    }
    case 3:
      for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k) a(i, k) = kMinvo3[i][3 - k];
      break;
    default:
      throw std::invalid_argument("minvo_basis: degree must be 1, 2 or 3");
  }
  return a;
}

// (A^T)^{-1}: maps power coefficients to MINVO control points.
const Eigen::MatrixXd& power_to_minvo(int degree)
{
  static const Eigen::MatrixXd maps[3] = {
      make_minvo_basis(1).transpose().inverse(),
      make_minvo_basis(2).transpose().inverse(),
      make_minvo_basis(3).transpose().inverse(),
  };
  return maps[degree - 1];
}

// Stacks, for each segment, the MINVO control points of the spline given by
// `knots` as a linear function of its own control points.
Eigen::MatrixXd stacked_minvo_map(const KnotVector& knots)
{
  const int p = knots.degree;
  const int n_seg = knots.numSegments();
  const int n_cp = knots.numControlPoints();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero((p + 1) * n_seg, n_cp);
  for (int seg = 0; seg < n_seg; ++seg)
    out.block(seg * (p + 1), seg, p + 1, p + 1) = power_to_minvo(p) * segment_power_basis(knots, seg);
  return out;
}

}  // namespace

Eigen::MatrixXd minvo_basis(int degree) { return make_minvo_basis(degree); }

Eigen::MatrixXd minvo_position_map(const KnotVector& knots) { return stacked_minvo_map(knots); }

Eigen::MatrixXd minvo_velocity_map(const KnotVector& knots)
{
  return stacked_minvo_map(derivative_knots(knots)) * derivative_cp_map(knots);
}

Eigen::MatrixXd minvo_acceleration_map(const KnotVector& knots)
{
  const KnotVector vel_knots = derivative_knots(knots);
  return stacked_minvo_map(derivative_knots(vel_knots)) * derivative_cp_map(vel_knots) *
         derivative_cp_map(knots);
}

MinvoSegments bspline_to_minvo(const SplineTrajectory& traj)
{
  const Eigen::MatrixXd verts = minvo_position_map(traj.knots) * traj.cps;
  MinvoSegments out;
  const int n_seg = traj.numSegments();
  out.simplices.reserve(n_seg);
  out.intervals.reserve(n_seg);
  for (int seg = 0; seg < n_seg; ++seg)
  {
    out.simplices.emplace_back(verts.middleRows<4>(4 * seg));
    out.intervals.emplace_back(traj.knots.segmentStart(seg), traj.knots.segmentEnd(seg));
  }
  return out;
}

std::vector<VelocityCps> h_v(const SplineTrajectory& traj)
{
  const Eigen::MatrixXd verts = minvo_velocity_map(traj.knots) * traj.cps;
  std::vector<VelocityCps> out;
  for (int seg = 0; seg < traj.numSegments(); ++seg) out.emplace_back(verts.middleRows<3>(3 * seg));
  return out;
}

std::vector<AccelerationCps> h_a(const SplineTrajectory& traj)
{
  const Eigen::MatrixXd verts = minvo_acceleration_map(traj.knots) * traj.cps;
  std::vector<AccelerationCps> out;
  for (int seg = 0; seg < traj.numSegments(); ++seg)
    out.emplace_back(verts.middleRows<2>(2 * seg));
  return out;
}

Vector3 eval_minvo(const Eigen::Matrix<double, Eigen::Dynamic, 3>& vertices, double u)
{
  const int degree = static_cast<int>(vertices.rows()) - 1;
  const Eigen::MatrixXd basis = minvo_basis(degree);
  Eigen::VectorXd powers(degree + 1);
  powers(0) = 1.0;
  for (int k = 1; k <= degree; ++k) powers(k) = powers(k - 1) * u;
  const Eigen::VectorXd lambda = basis * powers;
  return vertices.transpose() * lambda;
}

}  // namespace swarmnet
