#pragma once

#include "swarmnet/safety.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace swarmnet
{

/// Min-max normalisation to [0, 1]; a constant vector maps to 0.5.
Eigen::VectorXd minmax_normalize(const Eigen::VectorXd& values);

/// Gradient-free point saliency from the per-block average maps h_1..h_P:
/// s = h_P, then s = h_i * s (elementwise) and renormalise for i = P-1..1.
/// With a single map the loop never runs and h_1 is normalised directly so
/// the result still lies in [0, 1]. Throws std::invalid_argument on an empty
/// list or maps of unequal length.
Eigen::VectorXd pointbackprop(const std::vector<Eigen::VectorXd>& maps);

/// One `x y z s` line per point.
void write_saliency(std::ostream& out, const PointCloud& cloud, const Eigen::VectorXd& saliency);
void write_saliency(const std::filesystem::path& path, const PointCloud& cloud, const Eigen::VectorXd& saliency);

/// Reads `x y z` lines (blank lines and '#' comments skipped). Throws
/// std::runtime_error naming the first malformed line.
PointCloud read_scan(std::istream& in);
PointCloud read_scan(const std::filesystem::path& path);

}  // namespace swarmnet
