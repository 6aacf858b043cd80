#include "swarmnet/saliency.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

namespace swarmnet
{

Eigen::VectorXd minmax_normalize(const Eigen::VectorXd& values)
{
  if (values.size() == 0) return values;
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  if (!(hi > lo)) return Eigen::VectorXd::Constant(values.size(), 0.5);
  return (values.array() - lo) / (hi - lo);
}

Eigen::VectorXd pointbackprop(const std::vector<Eigen::VectorXd>& maps)
{
  if (maps.empty()) throw std::invalid_argument("pointbackprop: no intermediate maps");
  const Eigen::Index m = maps.front().size();
  for (const auto& h : maps)
    if (h.size() != m) throw std::invalid_argument("pointbackprop: maps differ in length");

  if (maps.size() == 1) return minmax_normalize(maps.front());
  Eigen::VectorXd s = maps.back();
  for (std::size_t i = maps.size() - 1; i-- > 0;) s = minmax_normalize(maps[i].cwiseProduct(s));
  return s;
}

void write_saliency(std::ostream& out, const PointCloud& cloud, const Eigen::VectorXd& saliency)
{
  if (cloud.rows() != saliency.size()) throw std::invalid_argument("write_saliency: length mismatch");
  out << std::setprecision(9);
  for (Eigen::Index i = 0; i < cloud.rows(); ++i)
    out << cloud(i, 0) << ' ' << cloud(i, 1) << ' ' << cloud(i, 2) << ' ' << saliency(i) << '\n';
}

void write_saliency(const std::filesystem::path& path, const PointCloud& cloud, const Eigen::VectorXd& saliency)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_saliency(out, cloud, saliency);
}

PointCloud read_scan(std::istream& in)
{
  std::vector<Vector3> points;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line))
  {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    Vector3 p;
    std::string extra;
    if (!(fields >> p.x() >> p.y() >> p.z()) || (fields >> extra) || !p.allFinite())
      throw std::runtime_error("scan line " + std::to_string(line_no) + ": expected three finite numbers");
    points.push_back(p);
  }
  PointCloud cloud(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) cloud.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  return cloud;
}

PointCloud read_scan(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_scan(in);
}

}  // namespace swarmnet
