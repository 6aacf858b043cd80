#include "swarmnet/network.hpp"

#include <stdexcept>

namespace swarmnet
{

NormalizedInputs normalize_inputs(const PointCloud& scan, const Eigen::Quaterniond& quat,
                                  const Vector3& velocity, const Vector3& acceleration,
                                  const Vector3& goal_offset, double range, const Limits& limits)
{
  if (!(range > 0.0)) throw std::invalid_argument("normalize_inputs: range must be positive");
  if (!limits.valid()) throw std::invalid_argument("normalize_inputs: limits must be positive");
  const double qn = quat.norm();
  if (!(qn > 0.0) || !std::isfinite(qn)) throw std::invalid_argument("normalize_inputs: zero-norm quaternion");
  const Eigen::Quaterniond q = quat.normalized();
  const Eigen::Matrix3d rot = q.toRotationMatrix();

  NormalizedInputs out;
  out.range = range;
  out.cloud = (scan * rot.transpose()) / range;

  Vector3 goal = goal_offset;
  const double dist = goal.norm();
  if (dist > range) goal *= range / dist;

  out.localization << q.w(), q.x(), q.y(), q.z(), velocity.cwiseQuotient(limits.v_max).transpose(),
      acceleration.cwiseQuotient(limits.a_max).transpose(), (goal / range).transpose();
  return out;
}

Network::Network(const WeightStore& weights, NetworkConfig config, double point_adjacency_radius)
    : config_(std::move(config)), point_radius_(point_adjacency_radius)
{
  validate_weights(weights, config_);
  if (!(point_radius_ > 0.0)) throw std::invalid_argument("Network: point adjacency radius must be positive");

  for (std::size_t b = 0; b < config_.pointnet_widths.size(); ++b)
  {
    const std::string prefix = "pointnet." + std::to_string(b) + ".";
    nn::PointNetBlock<double> block;
    block.transform = weights.matrix<double>(prefix + "transform");
    block.conv.weight = weights.matrix<double>(prefix + "weight");
    block.conv.bias = weights.row<double>(prefix + "bias");
    pointnet_.push_back(std::move(block));
  }

  dmon_.assign.weight = weights.matrix<double>("dmon.weight");
  dmon_.assign.bias = weights.row<double>("dmon.bias");
  dmon_.project = weights.row<double>("dmon.proj");
  dmon_.project_bias = weights.row<double>("dmon.proj_bias")(0);

  const int n_traj = static_cast<int>(config_.trajectory_widths.size());
  for (int l = 0; l < config_.numGnnLayers(); ++l)
  {
    const std::string prefix = "gnn." + std::to_string(l) + ".";
    nn::GnnLayer<double> layer;
    layer.encoder.weight = weights.matrix<double>(prefix + "encoder.weight");
    layer.encoder.bias = weights.row<double>(prefix + "encoder.bias");
    layer.decoder.weight = weights.matrix<double>(prefix + "decoder.weight");
    layer.decoder.bias = Eigen::RowVectorXd::Zero(layer.decoder.weight.cols());
    layer.attention = weights.matrix<double>(prefix + "attention");
    for (int k = 0; k <= config_.taps; ++k) layer.taps.push_back(weights.matrix<double>(prefix + "tap." + std::to_string(k)));
    // the trajectory branch ends in a linear layer so q* can take either sign
    layer.activate = l != n_traj - 1;
    layers_.push_back(std::move(layer));
  }

  collision_head_.weight = weights.matrix<double>("collision_head.weight");
  collision_head_.bias = weights.row<double>("collision_head.bias");
}

AgentEncoding Network::encode(const NormalizedInputs& inputs) const
{
  validate_cloud(inputs.cloud * inputs.range);
  const Eigen::MatrixXd cloud = inputs.cloud;
  const auto pn = nn::pointnet_forward<double>(cloud, pointnet_);

  AgentEncoding enc;
  enc.maps = pn.maps;
  enc.range = inputs.range;

  Eigen::RowVectorXd clusters;
  if (cloud.rows() == 0)
  {
    clusters = Eigen::RowVectorXd::Constant(config_.n_clusters, 1.0 / config_.n_clusters);
  }
  else
  {
    const auto adjacency = nn::build_point_adjacency<double>(cloud, point_radius_);
    clusters = nn::dmon_forward<double>(pn.features, adjacency, dmon_).cluster_vector.transpose();
  }
  const Eigen::RowVectorXd pooled = nn::global_max_pool<double>(pn.features);

  enc.trajectory_input.resize(clusters.size() + kLocalizationDim);
  enc.trajectory_input << clusters, inputs.localization;
  enc.collision_input.resize(pooled.size() + kLocalizationDim);
  enc.collision_input << pooled, inputs.localization;
  return enc;
}

BranchOutputs Network::finish(const AgentEncoding& encoding, const Eigen::RowVectorXd& trajectory,
                              const Eigen::RowVectorXd& collision) const
{
  BranchOutputs out;
  out.q_star = trajectory.transpose() * encoding.range;
  out.g = collision_head_(collision).transpose();
  out.maps = encoding.maps;
  return out;
}

std::vector<BranchOutputs> Network::forward_all(const std::vector<NormalizedInputs>& inputs,
                                                const Eigen::MatrixXd& adjacency) const
{
  const auto n = static_cast<Eigen::Index>(inputs.size());
  if (adjacency.rows() != n || adjacency.cols() != n)
    throw std::invalid_argument("forward_all: adjacency does not match the agent count");

  std::vector<AgentEncoding> enc;
  enc.reserve(inputs.size());
  for (const auto& in : inputs) enc.push_back(encode(in));
  if (n == 0) return {};

  Eigen::MatrixXd traj(n, enc[0].trajectory_input.size());
  Eigen::MatrixXd coll(n, enc[0].collision_input.size());
  for (Eigen::Index i = 0; i < n; ++i)
  {
    traj.row(i) = enc[i].trajectory_input;
    coll.row(i) = enc[i].collision_input;
  }
  for (int l = 0; l < numLayers(); ++l)
  {
    Eigen::MatrixXd& x = isTrajectoryLayer(l) ? traj : coll;
    x = nn::gnn_ed_layer<double>(x, adjacency, layers_[l]);
  }

  std::vector<BranchOutputs> out;
  out.reserve(inputs.size());
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(finish(enc[i], traj.row(i), coll.row(i)));
  return out;
}

NodeOutputs Network::forward_node(const AgentEncoding& encoding,
                                  const std::vector<std::vector<Eigen::MatrixXd>>& neighbour_payloads) const
{
  if (static_cast<int>(neighbour_payloads.size()) != numLayers())
    throw std::invalid_argument("forward_node: expected payload lists for every layer");

  NodeOutputs result;
  Eigen::RowVectorXd traj = encoding.trajectory_input;
  Eigen::RowVectorXd coll = encoding.collision_input;
  for (int l = 0; l < numLayers(); ++l)
  {
    Eigen::RowVectorXd& x = isTrajectoryLayer(l) ? traj : coll;
    auto step = nn::gnn_ed_node<double>(x, neighbour_payloads[l], layers_[l]);
    x = step.output;
    result.payloads.push_back(std::move(step.taps));
  }
  result.outputs = finish(encoding, traj, coll);
  return result;
}

}  // namespace swarmnet
