#include "swarmnet/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace swarmnet
{

KnotVector build_clamped_knots(double t0, double tf, int n_cp, int degree)
{
  if (!(tf > t0) || !std::isfinite(t0) || !std::isfinite(tf))
    throw std::invalid_argument("build_clamped_knots: need tf > t0");
  if (degree < 1)
    throw std::invalid_argument("build_clamped_knots: degree must be positive");
  if (n_cp < degree + 1)
    throw std::invalid_argument("build_clamped_knots: need n_cp >= degree + 1, got " +
                                std::to_string(n_cp));

  KnotVector kv;
  kv.degree = degree;
  const int n_seg = n_cp - degree;
  kv.knots.reserve(n_cp + degree + 1);
  for (int i = 0; i < degree; ++i) kv.knots.push_back(t0);
  for (int i = 0; i <= n_seg; ++i)
  {
    // endpoints exact, interior uniform
    if (i == 0)
      kv.knots.push_back(t0);
    else if (i == n_seg)
      kv.knots.push_back(tf);
    else
      kv.knots.push_back(t0 + (tf - t0) * static_cast<double>(i) / n_seg);
  }
  for (int i = 0; i < degree; ++i) kv.knots.push_back(tf);
  return kv;
}

SplineTrajectory make_trajectory(const ControlPoints& cps, double t0, double tf)
{
  SplineTrajectory traj;
  traj.knots = build_clamped_knots(t0, tf, static_cast<int>(cps.rows()), kSplineDegree);
  traj.cps = cps;
  traj.t0 = t0;
  traj.tf = tf;
  return traj;
}

int find_segment(const KnotVector& knots, double t)
{
  const int n_seg = knots.numSegments();
  for (int seg = 0; seg < n_seg - 1; ++seg)
    if (t < knots.segmentEnd(seg)) return seg;
  return n_seg - 1;
}

KnotVector derivative_knots(const KnotVector& knots)
{
  KnotVector out;
  out.degree = knots.degree - 1;
  out.knots.assign(knots.knots.begin() + 1, knots.knots.end() - 1);
  return out;
}

Eigen::MatrixXd derivative_cp_map(const KnotVector& knots)
{
  const int n = knots.numControlPoints();
  const int p = knots.degree;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n - 1, n);
  for (int i = 0; i < n - 1; ++i)
  {
    const double span = knots.knots[i + p + 1] - knots.knots[i + 1];
    if (span <= 0.0) continue;
    d(i, i) = -p / span;
    d(i, i + 1) = p / span;
  }
  return d;
}

namespace
{

// Polynomial in u, ascending powers, fixed capacity degree + 1.
using Poly = Eigen::VectorXd;

Poly mul_linear(const Poly& a, double c0, double c1)
{
  Poly out = Poly::Zero(a.size());
  for (int k = 0; k < a.size(); ++k)
  {
    out(k) += c0 * a(k);
    if (k + 1 < a.size()) out(k + 1) += c1 * a(k);
  }
  return out;
}

}  // namespace

Eigen::MatrixXd segment_power_basis(const KnotVector& knots, int seg)
{
  const int p = knots.degree;
  const auto& k = knots.knots;
  const int span = seg + p;
  const double a = k[span];
  const double delta = k[span + 1] - a;
  if (!(delta > 0.0)) throw std::invalid_argument("segment_power_basis: empty segment");

  // Cox-de Boor on polynomials of u, where t = a + delta * u.
  // basis[j] holds N_{span - level + j, level}.
  std::vector<Poly> basis(1, Poly::Zero(p + 1));
  basis[0](0) = 1.0;
  for (int level = 1; level <= p; ++level)
  {
    std::vector<Poly> next(level + 1, Poly::Zero(p + 1));
    for (int j = 0; j <= level; ++j)
    {
      const int i = span - level + j;
      // left term: (t - k_i) / (k_{i+level} - k_i) * N_{i, level-1}
      if (j >= 1)
      {
        const double den = k[i + level] - k[i];
        if (den > 0.0) next[j] += mul_linear(basis[j - 1], (a - k[i]) / den, delta / den);
      }
      // right term: (k_{i+level+1} - t) / (k_{i+level+1} - k_{i+1}) * N_{i+1, level-1}
      if (j < level)
      {
        const double den = k[i + level + 1] - k[i + 1];
        if (den > 0.0)
          next[j] += mul_linear(basis[j], (k[i + level + 1] - a) / den, -delta / den);
      }
    }
    basis = std::move(next);
  }

  Eigen::MatrixXd out(p + 1, p + 1);
  for (int j = 0; j <= p; ++j) out.col(j) = basis[j];
  return out;
}

namespace
{

Vector3 eval_power(const Eigen::MatrixXd& basis, const ControlPoints& active, double u)
{
  const Eigen::MatrixXd coeffs = basis * active;  // rows: powers
  Vector3 out = coeffs.row(coeffs.rows() - 1).transpose();
  for (int k = static_cast<int>(coeffs.rows()) - 2; k >= 0; --k)
    out = out * u + coeffs.row(k).transpose();
  return out;
}

Vector3 eval_in_span(const SplineTrajectory& traj, double t, int deriv)
{
  if (deriv < 0 || deriv > 2) throw std::invalid_argument("eval_spline: deriv must be 0, 1 or 2");

  KnotVector knots = traj.knots;
  ControlPoints cps = traj.cps;
  for (int d = 0; d < deriv; ++d)
  {
    cps = derivative_cp_map(knots) * cps;
    knots = derivative_knots(knots);
  }
  if (knots.degree == 0) return cps.row(find_segment(knots, t)).transpose();

  const int seg = find_segment(knots, t);
  const double a = knots.segmentStart(seg);
  const double u = (t - a) / (knots.segmentEnd(seg) - a);
  const int p = knots.degree;
  return eval_power(segment_power_basis(knots, seg), cps.middleRows(seg, p + 1), u);
}

}  // namespace

Vector3 eval_spline(const SplineTrajectory& traj, double t, int deriv)
{
  if (!(t >= traj.t0 && t <= traj.tf))
    throw std::domain_error("eval_spline: t=" + std::to_string(t) + " outside [" +
                            std::to_string(traj.t0) + ", " + std::to_string(traj.tf) + "]");
  return eval_in_span(traj, t, deriv);
}

Vector3 eval_spline_clamped(const SplineTrajectory& traj, double t, int deriv)
{
  if (t >= traj.tf)
  {
    if (deriv == 0) return traj.cps.row(traj.cps.rows() - 1).transpose();
    if (deriv < 0 || deriv > 2)
      throw std::invalid_argument("eval_spline: deriv must be 0, 1 or 2");
    return Vector3::Zero();
  }
  return eval_in_span(traj, std::max(t, traj.t0), deriv);
}

SplineTrajectory translated(const SplineTrajectory& traj, const Vector3& offset)
{
  SplineTrajectory out = traj;
  out.cps.rowwise() += offset.transpose();
  return out;
}

Eigen::VectorXd flatten_cps(const ControlPoints& cps)
{
  Eigen::VectorXd q(cps.rows() * 3);
  for (Eigen::Index i = 0; i < cps.rows(); ++i) q.segment<3>(3 * i) = cps.row(i).transpose();
  return q;
}

ControlPoints unflatten_cps(const Eigen::VectorXd& q)
{
  if (q.size() % 3 != 0) throw std::invalid_argument("unflatten_cps: size not a multiple of 3");
  ControlPoints cps(q.size() / 3, 3);
  for (Eigen::Index i = 0; i < cps.rows(); ++i) cps.row(i) = q.segment<3>(3 * i).transpose();
  return cps;
}

}  // namespace swarmnet
