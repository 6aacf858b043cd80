#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace swarmnet::nn
{

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x)
{
  return x.cwiseMax(typename Derived::Scalar(0));
}

template <typename Scalar>
Scalar leaky_relu(Scalar v, Scalar slope)
{
  return v > Scalar(0) ? v : slope * v;
}

/// Row-wise affine map x W + b.
template <typename Scalar>
struct Dense
{
  Mat<Scalar> weight;
  RowVec<Scalar> bias;

  Mat<Scalar> operator()(const Mat<Scalar>& x) const
  {
    if (x.cols() != weight.rows()) throw std::invalid_argument("Dense: input width mismatch");
    Mat<Scalar> y = x * weight;
    y.rowwise() += bias;
    return y;
  }
};

// ---------------------------------------------------------------------------
// PointNet encoder

/// Feature-space transform followed by a unit-kernel convolution (a shared
/// per-point affine map) and ReLU.
template <typename Scalar>
struct PointNetBlock
{
  Mat<Scalar> transform;
  Dense<Scalar> conv;
};

template <typename Scalar>
struct PointNetOutput
{
  Mat<Scalar> features;
  /// Per-point channel average after each block.
  std::vector<Vec<Scalar>> maps;
};

template <typename Scalar>
PointNetOutput<Scalar> pointnet_forward(const Mat<Scalar>& cloud, const std::vector<PointNetBlock<Scalar>>& blocks)
{
  PointNetOutput<Scalar> out;
  Mat<Scalar> x = cloud;
  for (const auto& block : blocks)
  {
    if (x.rows() == 0)
    {
      x.resize(0, block.conv.weight.cols());
      out.maps.emplace_back(0);
      continue;
    }
    x = relu(block.conv(x * block.transform)).eval();
    out.maps.push_back(x.rowwise().mean());
  }
  out.features = std::move(x);
  return out;
}

/// Column-wise max over points; zeros for an empty cloud.
template <typename Scalar>
RowVec<Scalar> global_max_pool(const Mat<Scalar>& features)
{
  if (features.rows() == 0) return RowVec<Scalar>::Zero(features.cols());
  return features.colwise().maxCoeff();
}

// ---------------------------------------------------------------------------
// DMoN clustering

/// Edge (i, j) iff 0 < |p_i - p_j| <= radius.
template <typename Scalar>
Eigen::SparseMatrix<Scalar> build_point_adjacency(const Mat<Scalar>& cloud, Scalar radius)
{
  if (!(radius > Scalar(0))) throw std::invalid_argument("build_point_adjacency: radius must be positive");
  const Eigen::Index m = cloud.rows();
  const Scalar r2 = radius * radius;
  std::vector<Eigen::Triplet<Scalar>> triplets;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
    {
      const Scalar d2 = (cloud.row(i) - cloud.row(j)).squaredNorm();
      if (d2 > Scalar(0) && d2 <= r2)
      {
        triplets.emplace_back(i, j, Scalar(1));
        triplets.emplace_back(j, i, Scalar(1));
      }
    }
  Eigen::SparseMatrix<Scalar> adj(m, m);
  adj.setFromTriplets(triplets.begin(), triplets.end());
  return adj;
}

template <typename Scalar>
struct DmonLayer
{
  Dense<Scalar> assign;    // features -> cluster logits
  RowVec<Scalar> project;  // pooled cluster features -> scalar
  Scalar project_bias = Scalar(0);
};

template <typename Scalar>
struct DmonOutput
{
  Mat<Scalar> assignments;  // m x clusters, rows sum to one
  Vec<Scalar> cluster_vector;
};

template <typename Derived>
void softmax_rows_inplace(Eigen::MatrixBase<Derived>& logits)
{
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
  {
    const auto mx = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - mx).exp().matrix();
    logits.row(i) /= logits.row(i).sum();
  }
}

/// One symmetric-normalised graph convolution D^-1/2 (A + I) D^-1/2 X W + b,
/// row softmax for soft cluster assignments, then a shared projection of each
/// cluster's assignment-weighted mean feature.
template <typename Scalar>
DmonOutput<Scalar> dmon_forward(const Mat<Scalar>& features, const Eigen::SparseMatrix<Scalar>& adjacency,
                                const DmonLayer<Scalar>& layer)
{
  const Eigen::Index m = features.rows();
  if (adjacency.rows() != m || adjacency.cols() != m)
    throw std::invalid_argument("dmon_forward: adjacency size mismatch");

  Vec<Scalar> deg = Vec<Scalar>::Ones(m);
  for (int k = 0; k < adjacency.outerSize(); ++k)
    for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(adjacency, k); it; ++it)
      deg(it.row()) += it.value();
  const Vec<Scalar> inv_sqrt = deg.cwiseSqrt().cwiseInverse();

  const Mat<Scalar> scaled = inv_sqrt.asDiagonal() * features;
  const Mat<Scalar> propagated = inv_sqrt.asDiagonal() * (scaled + adjacency * scaled);

  DmonOutput<Scalar> out;
  out.assignments = layer.assign(propagated);
  softmax_rows_inplace(out.assignments);

  const Mat<Scalar> pooled = out.assignments.transpose() * features;  // clusters x F
  const Vec<Scalar> mass = out.assignments.colwise().sum().transpose();
  out.cluster_vector.resize(out.assignments.cols());
  for (Eigen::Index c = 0; c < out.assignments.cols(); ++c)
  {
    const Scalar denom = mass(c) > Scalar(0) ? mass(c) : Scalar(1);
    out.cluster_vector(c) = pooled.row(c).dot(layer.project) / denom + layer.project_bias;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph attention with encode/decode compression

/// E_ij = softmax over neighbours j of LeakyReLU(x_i^T W x_j); zero where the
/// adjacency is zero, all-zero rows for isolated nodes.
template <typename Scalar>
Mat<Scalar> attention(const Mat<Scalar>& x, const Mat<Scalar>& adjacency, const Mat<Scalar>& w,
                      Scalar slope = Scalar(0.01))
{
  const Eigen::Index n = x.rows();
  if (adjacency.rows() != n || adjacency.cols() != n) throw std::invalid_argument("attention: adjacency size mismatch");
  const Mat<Scalar> xw = x * w;
  Mat<Scalar> e = Mat<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
  {
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (adjacency(i, j) != Scalar(0))
      {
        e(i, j) = leaky_relu<Scalar>(xw.row(i).dot(x.row(j)), slope);
        mx = std::max(mx, e(i, j));
      }
    Scalar sum = Scalar(0);
    for (Eigen::Index j = 0; j < n; ++j)
      if (adjacency(i, j) != Scalar(0))
      {
        e(i, j) = std::exp(e(i, j) - mx);
        sum += e(i, j);
      }
    if (sum > Scalar(0)) e.row(i) /= sum;
  }
  return e;
}

template <typename Scalar>
struct GnnLayer
{
  Dense<Scalar> encoder;           // F -> G
  Dense<Scalar> decoder;           // G -> F, zero bias so d(0) = 0
  Mat<Scalar> attention;           // G x G
  std::vector<Mat<Scalar>> taps;   // K + 1 filters, F x F'
  bool activate = true;            // final ReLU

  int numTaps() const { return static_cast<int>(taps.size()) - 1; }
  Eigen::Index compressedWidth() const { return encoder.weight.cols(); }
};

/// Centralised evaluation over the whole graph:
/// y = ReLU( sum_k d((E o A)^k e(x)) H_k ), attention computed on e(x).
template <typename Scalar>
Mat<Scalar> gnn_ed_layer(const Mat<Scalar>& x, const Mat<Scalar>& adjacency, const GnnLayer<Scalar>& layer)
{
  if (layer.taps.empty()) throw std::invalid_argument("gnn_ed_layer: no filter taps");
  if (x.cols() != layer.encoder.weight.rows()) throw std::invalid_argument("gnn_ed_layer: input width mismatch");
  const Mat<Scalar> z = relu(layer.encoder(x)).eval();
  const Mat<Scalar> shift = attention<Scalar>(z, adjacency, layer.attention).cwiseProduct(adjacency);

  Mat<Scalar> hop = z;
  Mat<Scalar> acc = relu(layer.decoder(hop)).eval() * layer.taps[0];
  for (std::size_t k = 1; k < layer.taps.size(); ++k)
  {
    hop = (shift * hop).eval();
    acc += relu(layer.decoder(hop)).eval() * layer.taps[k];
  }
  return layer.activate ? Mat<Scalar>(relu(acc)) : acc;
}

template <typename Scalar>
struct NodeStep
{
  RowVec<Scalar> output;
  /// Rows k = 0..K-1: this node's ((E o A)^k e(x))_i, the payloads it sends.
  Mat<Scalar> taps;
};

/// One node's share of gnn_ed_layer, using only its own input row and the tap
/// payloads received from its neighbours (K x G each, row 0 = neighbour's e(x)).
template <typename Scalar>
NodeStep<Scalar> gnn_ed_node(const RowVec<Scalar>& x_i, const std::vector<Mat<Scalar>>& neighbour_taps,
                             const GnnLayer<Scalar>& layer)
{
  const int n_taps = layer.numTaps();
  const Eigen::Index g = layer.compressedWidth();
  const RowVec<Scalar> z = relu(layer.encoder(x_i)).eval();

  // attention row over the neighbours that reported
  std::vector<Scalar> weight(neighbour_taps.size());
  const RowVec<Scalar> zw = z * layer.attention;
  Scalar mx = -std::numeric_limits<Scalar>::infinity();
  for (std::size_t j = 0; j < neighbour_taps.size(); ++j)
  {
    if (neighbour_taps[j].rows() != n_taps || neighbour_taps[j].cols() != g)
      throw std::invalid_argument("gnn_ed_node: neighbour payload has the wrong shape");
    weight[j] = leaky_relu<Scalar>(zw.dot(neighbour_taps[j].row(0)), Scalar(0.01));
    mx = std::max(mx, weight[j]);
  }
  Scalar sum = Scalar(0);
  for (auto& w : weight)
  {
    w = std::exp(w - mx);
    sum += w;
  }
  for (auto& w : weight) w /= sum;

  NodeStep<Scalar> step;
  step.taps.resize(n_taps, g);
  step.taps.row(0) = z;
  RowVec<Scalar> acc = relu(layer.decoder(z)).eval() * layer.taps[0];
  for (int k = 1; k <= n_taps; ++k)
  {
    RowVec<Scalar> hop = RowVec<Scalar>::Zero(g);
    for (std::size_t j = 0; j < neighbour_taps.size(); ++j) hop += weight[j] * neighbour_taps[j].row(k - 1);
    acc += relu(layer.decoder(hop)).eval() * layer.taps[k];
    if (k < n_taps) step.taps.row(k) = hop;
  }
  step.output = layer.activate ? RowVec<Scalar>(relu(acc)) : acc;
  return step;
}

}  // namespace swarmnet::nn
