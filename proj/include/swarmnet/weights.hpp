#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace swarmnet
{

/// Dense float32 tensor, row-major.
struct Tensor
{
  std::vector<std::uint64_t> shape;
  std::vector<float> data;

  std::uint64_t numel() const;
};

/// Architecture hyper-parameters. Defaults reproduce the deployed network:
/// PointNet 64/128/256, 51 clusters, GNN widths 512/256/30 (trajectory) and
/// 512/256 (collision), K = 1 tap, G = 5 exchanged scalars per layer.
struct NetworkConfig
{
  std::vector<int> pointnet_widths{64, 128, 256};
  int n_clusters = 51;
  int localization_dim = 13;
  std::vector<int> trajectory_widths{512, 256, 30};
  std::vector<int> collision_widths{512, 256};
  int taps = 1;             // K
  int compressed_width = 5; // G
  int output_dim = 30;

  int numGnnLayers() const
  {
    return static_cast<int>(trajectory_widths.size() + collision_widths.size());
  }
  /// (input width, output width) of GNN layer l; trajectory layers first.
  std::pair<int, int> gnnShape(int layer) const;
};

class WeightStore
{
public:
  void set(const std::string& name, Tensor t);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  std::size_t size() const { return tensors_.size(); }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

  /// Rank-2 tensor as a matrix (rows = shape[0]).
  template <typename Scalar>
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> matrix(const std::string& name) const
  {
    const Tensor& t = at2(name);
    using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    return Eigen::Map<const RowMajor>(t.data.data(), static_cast<Eigen::Index>(t.shape[0]),
                                      static_cast<Eigen::Index>(t.shape[1]))
        .template cast<Scalar>();
  }

  /// Rank-1 tensor as a row vector.
  template <typename Scalar>
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> row(const std::string& name) const
  {
    const Tensor& t = at1(name);
    return Eigen::Map<const Eigen::RowVectorXf>(t.data.data(), static_cast<Eigen::Index>(t.data.size()))
        .template cast<Scalar>();
  }

  bool operator==(const WeightStore& other) const;

private:
  const Tensor& at1(const std::string& name) const;
  const Tensor& at2(const std::string& name) const;

  std::map<std::string, Tensor> tensors_;
};

/// Expected tensor names and shapes for a configuration.
std::map<std::string, std::vector<std::uint64_t>> expected_shapes(const NetworkConfig& config);

/// Throws std::invalid_argument naming the first missing or mis-shaped tensor.
void validate_weights(const WeightStore& store, const NetworkConfig& config);

/// Deterministic Xavier-uniform initialisation; feature transforms start
/// near identity.
WeightStore random_init(const NetworkConfig& config, std::uint64_t seed);

/// Binary container: u64 tensor count, then per tensor u64 name length, name
/// bytes, u64 rank, rank x u64 dims, raw float32. All little-endian.
std::vector<std::uint8_t> encode_weights(const WeightStore& store);
/// Throws std::runtime_error on truncated or malformed input.
WeightStore decode_weights(std::span<const std::uint8_t> bytes);

void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

}  // namespace swarmnet
