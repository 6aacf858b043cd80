#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace swarmnet
{

/// Closest point on segment [a, b] to p. Handles a == b.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> closest_point_on_segment(const Eigen::Matrix<Scalar, 3, 1>& p,
                                                     const Eigen::Matrix<Scalar, 3, 1>& a,
                                                     const Eigen::Matrix<Scalar, 3, 1>& b)
{
  const Eigen::Matrix<Scalar, 3, 1> ab = b - a;
  const Scalar len2 = ab.squaredNorm();
  if (len2 <= Scalar(0)) return a;
  Scalar t = (p - a).dot(ab) / len2;
  t = t < Scalar(0) ? Scalar(0) : (t > Scalar(1) ? Scalar(1) : t);
  return a + t * ab;
}

/// Closest point on triangle (a, b, c) to p using Voronoi region tests.
/// Degenerate (zero-area) triangles fall back to their edges.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> closest_point_on_triangle(const Eigen::Matrix<Scalar, 3, 1>& p,
                                                      const Eigen::Matrix<Scalar, 3, 1>& a,
                                                      const Eigen::Matrix<Scalar, 3, 1>& b,
                                                      const Eigen::Matrix<Scalar, 3, 1>& c)
{
  using Vec = Eigen::Matrix<Scalar, 3, 1>;
  const Vec ab = b - a;
  const Vec ac = c - a;
  const Scalar scale = ab.squaredNorm() + ac.squaredNorm() + (c - b).squaredNorm();
  const Scalar area2 = ab.cross(ac).squaredNorm();
  if (!(area2 > Scalar(1e-24) * scale * scale))
  {
    const Vec c0 = closest_point_on_segment<Scalar>(p, a, b);
    const Vec c1 = closest_point_on_segment<Scalar>(p, b, c);
    const Vec c2 = closest_point_on_segment<Scalar>(p, a, c);
    const Scalar d0 = (p - c0).squaredNorm();
    const Scalar d1 = (p - c1).squaredNorm();
    const Scalar d2 = (p - c2).squaredNorm();
    if (d0 <= d1 && d0 <= d2) return c0;
    return d1 <= d2 ? c1 : c2;
  }

  const Vec ap = p - a;
  const Scalar d1 = ab.dot(ap);
  const Scalar d2 = ac.dot(ap);
  if (d1 <= Scalar(0) && d2 <= Scalar(0)) return a;

  const Vec bp = p - b;
  const Scalar d3 = ab.dot(bp);
  const Scalar d4 = ac.dot(bp);
  if (d3 >= Scalar(0) && d4 <= d3) return b;

  const Scalar vc = d1 * d4 - d3 * d2;
  if (vc <= Scalar(0) && d1 >= Scalar(0) && d3 <= Scalar(0)) return a + (d1 / (d1 - d3)) * ab;

  const Vec cp = p - c;
  const Scalar d5 = ab.dot(cp);
  const Scalar d6 = ac.dot(cp);
  if (d6 >= Scalar(0) && d5 <= d6) return c;

  const Scalar vb = d5 * d2 - d1 * d6;
  if (vb <= Scalar(0) && d2 >= Scalar(0) && d6 <= Scalar(0)) return a + (d2 / (d2 - d6)) * ac;

  const Scalar va = d3 * d6 - d5 * d4;
  if (va <= Scalar(0) && (d4 - d3) >= Scalar(0) && (d5 - d6) >= Scalar(0))
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const Scalar denom = Scalar(1) / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

/// Euclidean distance from p to the closed tetrahedron with vertices in the
/// rows of `simplex`; zero inside. Flat, collinear and point simplices are
/// handled through their faces.
template <typename Scalar>
Scalar point_to_simplex_distance(const Eigen::Matrix<Scalar, 3, 1>& p,
                                 const Eigen::Matrix<Scalar, 4, 3>& simplex)
{
  using Vec = Eigen::Matrix<Scalar, 3, 1>;
  const Vec v[4] = {simplex.row(0).transpose(), simplex.row(1).transpose(),
                    simplex.row(2).transpose(), simplex.row(3).transpose()};

  const Vec e1 = v[1] - v[0];
  const Vec e2 = v[2] - v[0];
  const Vec e3 = v[3] - v[0];
  const Scalar vol = e1.dot(e2.cross(e3));
  const Scalar scale = e1.norm() + e2.norm() + e3.norm();
  if (std::abs(vol) > Scalar(1e-12) * scale * scale * scale)
  {
    // Signed sub-volumes: p is inside when all share the sign of vol.
    const Vec q = p - v[0];
    const Scalar s1 = q.dot(e2.cross(e3));
    const Scalar s2 = e1.dot(q.cross(e3));
    const Scalar s3 = e1.dot(e2.cross(q));
    const Scalar s0 = vol - s1 - s2 - s3;
    const auto same = [vol](Scalar s) { return vol > Scalar(0) ? s >= Scalar(0) : s <= Scalar(0); };
    if (same(s0) && same(s1) && same(s2) && same(s3)) return Scalar(0);
  }

  static constexpr int faces[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (const auto& f : faces)
  {
    const Vec c = closest_point_on_triangle<Scalar>(p, v[f[0]], v[f[1]], v[f[2]]);
    best = std::min(best, (p - c).squaredNorm());
  }
  return std::sqrt(best);
}

/// Distance from p to an axis-aligned box (zero inside).
template <typename Scalar>
Scalar point_to_box_distance(const Eigen::Matrix<Scalar, 3, 1>& p,
                             const Eigen::Matrix<Scalar, 3, 1>& center,
                             const Eigen::Matrix<Scalar, 3, 1>& half_extents)
{
  const Eigen::Matrix<Scalar, 3, 1> d =
      ((p - center).cwiseAbs() - half_extents).cwiseMax(Scalar(0));
  return d.norm();
}

}  // namespace swarmnet
