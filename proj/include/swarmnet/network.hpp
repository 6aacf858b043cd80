#pragma once

#include "swarmnet/layers.hpp"
#include "swarmnet/qp.hpp"
#include "swarmnet/safety.hpp"
#include "swarmnet/weights.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <vector>

namespace swarmnet
{

inline constexpr int kLocalizationDim = 13;
using LocalizationVector = Eigen::Matrix<double, 1, kLocalizationDim>;

/// Network inputs in the unit sphere: cloud (world orientation) / R and the
/// localization row [quat w x y z, v / v_max, a / a_max, goal / R].
struct NormalizedInputs
{
  PointCloud cloud;
  LocalizationVector localization = LocalizationVector::Zero();
  double range = 1.0;
};

/// `scan` holds sensor-frame hits, `goal_offset` is goal - position in world
/// coordinates. Goals beyond R are pulled onto the sphere of radius R.
/// Throws std::invalid_argument for R <= 0 or a zero-norm quaternion.
NormalizedInputs normalize_inputs(const PointCloud& scan, const Eigen::Quaterniond& quat,
                                  const Vector3& velocity, const Vector3& acceleration,
                                  const Vector3& goal_offset, double range, const Limits& limits);

/// Per-agent outputs. q_star is in metres relative to the agent; g is
/// dimensionless. maps holds one per-point average per PointNet block.
struct BranchOutputs
{
  Eigen::VectorXd q_star;
  Eigen::VectorXd g;
  std::vector<Eigen::VectorXd> maps;
};

/// Local part of the forward pass, computed before any exchange.
struct AgentEncoding
{
  Eigen::RowVectorXd trajectory_input;  // cluster vector + localization
  Eigen::RowVectorXd collision_input;   // max-pooled descriptor + localization
  std::vector<Eigen::VectorXd> maps;
  double range = 1.0;
};

/// Result of one agent's distributed pass: outputs plus the K x G payloads
/// it broadcasts for every GNN layer.
struct NodeOutputs
{
  BranchOutputs outputs;
  std::vector<Eigen::MatrixXd> payloads;
};

class Network
{
public:
  explicit Network(const WeightStore& weights, NetworkConfig config = {}, double point_adjacency_radius = 0.1);

  const NetworkConfig& config() const { return config_; }
  int numLayers() const { return static_cast<int>(layers_.size()); }
  const nn::GnnLayer<double>& layer(int l) const { return layers_.at(l); }
  bool isTrajectoryLayer(int l) const { return l < static_cast<int>(config_.trajectory_widths.size()); }

  AgentEncoding encode(const NormalizedInputs& inputs) const;

  /// Centralised evaluation of both branches over the communication graph.
  std::vector<BranchOutputs> forward_all(const std::vector<NormalizedInputs>& inputs,
                                         const Eigen::MatrixXd& adjacency) const;

  /// One agent's share. neighbour_payloads[l] lists the K x G payloads
  /// received from each neighbour for layer l.
  NodeOutputs forward_node(const AgentEncoding& encoding,
                           const std::vector<std::vector<Eigen::MatrixXd>>& neighbour_payloads) const;

private:
  BranchOutputs finish(const AgentEncoding& encoding, const Eigen::RowVectorXd& trajectory,
                       const Eigen::RowVectorXd& collision) const;

  NetworkConfig config_;
  double point_radius_;
  std::vector<nn::PointNetBlock<double>> pointnet_;
  nn::DmonLayer<double> dmon_;
  std::vector<nn::GnnLayer<double>> layers_;
  nn::Dense<double> collision_head_;
};

}  // namespace swarmnet
