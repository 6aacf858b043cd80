#include "swarmnet/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <stdexcept>

namespace swarmnet
{

std::uint64_t Tensor::numel() const
{
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::pair<int, int> NetworkConfig::gnnShape(int layer) const
{
  const int n_traj = static_cast<int>(trajectory_widths.size());
  if (layer < n_traj)
  {
    const int in = layer == 0 ? n_clusters + localization_dim : trajectory_widths[layer - 1];
    return {in, trajectory_widths[layer]};
  }
  const int c = layer - n_traj;
  const int in = c == 0 ? pointnet_widths.back() + localization_dim : collision_widths[c - 1];
  return {in, collision_widths[c]};
}

void WeightStore::set(const std::string& name, Tensor t)
{
  if (t.numel() != t.data.size())
    throw std::invalid_argument("tensor '" + name + "': data length does not match shape");
  tensors_[name] = std::move(t);
}

const Tensor& WeightStore::at(const std::string& name) const
{
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::invalid_argument("missing tensor '" + name + "'");
  return it->second;
}

const Tensor& WeightStore::at1(const std::string& name) const
{
  const Tensor& t = at(name);
  if (t.shape.size() != 1) throw std::invalid_argument("tensor '" + name + "' is not rank 1");
  return t;
}

const Tensor& WeightStore::at2(const std::string& name) const
{
  const Tensor& t = at(name);
  if (t.shape.size() != 2) throw std::invalid_argument("tensor '" + name + "' is not rank 2");
  return t;
}

bool WeightStore::operator==(const WeightStore& other) const
{
  if (tensors_.size() != other.tensors_.size()) return false;
  for (const auto& [name, t] : tensors_)
  {
    auto it = other.tensors_.find(name);
    if (it == other.tensors_.end() || it->second.shape != t.shape) return false;
    if (std::memcmp(it->second.data.data(), t.data.data(), t.data.size() * sizeof(float)) != 0)
      return false;
  }
  return true;
}

std::map<std::string, std::vector<std::uint64_t>> expected_shapes(const NetworkConfig& config)
{
  using Shape = std::vector<std::uint64_t>;
  const auto u = [](int v) { return static_cast<std::uint64_t>(v); };
  std::map<std::string, Shape> shapes;

  int in = 3;
  for (std::size_t b = 0; b < config.pointnet_widths.size(); ++b)
  {
    const std::string prefix = "pointnet." + std::to_string(b) + ".";
    const int out = config.pointnet_widths[b];
    shapes[prefix + "transform"] = Shape{u(in), u(in)};
    shapes[prefix + "weight"] = Shape{u(in), u(out)};
    shapes[prefix + "bias"] = Shape{u(out)};
    in = out;
  }

  const int feat = config.pointnet_widths.back();
  shapes["dmon.weight"] = Shape{u(feat), u(config.n_clusters)};
  shapes["dmon.bias"] = Shape{u(config.n_clusters)};
  shapes["dmon.proj"] = Shape{u(feat)};
  shapes["dmon.proj_bias"] = Shape{1};

  const int g = config.compressed_width;
  for (int l = 0; l < config.numGnnLayers(); ++l)
  {
    const auto [f_in, f_out] = config.gnnShape(l);
    const std::string prefix = "gnn." + std::to_string(l) + ".";
    shapes[prefix + "encoder.weight"] = Shape{u(f_in), u(g)};
    shapes[prefix + "encoder.bias"] = Shape{u(g)};
    shapes[prefix + "decoder.weight"] = Shape{u(g), u(f_in)};
    shapes[prefix + "attention"] = Shape{u(g), u(g)};
    for (int k = 0; k <= config.taps; ++k)
      shapes[prefix + "tap." + std::to_string(k)] = Shape{u(f_in), u(f_out)};
  }

  shapes["collision_head.weight"] = Shape{u(config.collision_widths.back()), u(config.output_dim)};
  shapes["collision_head.bias"] = Shape{u(config.output_dim)};
  return shapes;
}

void validate_weights(const WeightStore& store, const NetworkConfig& config)
{
  if (config.trajectory_widths.empty() || config.trajectory_widths.back() != config.output_dim)
    throw std::invalid_argument("config: last trajectory width must equal output_dim");
  if (config.taps < 1) throw std::invalid_argument("config: taps must be >= 1");
  for (const auto& [name, shape] : expected_shapes(config))
  {
    if (!store.contains(name)) throw std::invalid_argument("weights: missing tensor '" + name + "'");
    if (store.at(name).shape != shape)
      throw std::invalid_argument("weights: tensor '" + name + "' has the wrong shape");
  }
}

WeightStore random_init(const NetworkConfig& config, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  WeightStore store;
  for (const auto& [name, shape] : expected_shapes(config))
  {
    Tensor t;
    t.shape = shape;
    t.data.resize(t.numel());
    const bool is_transform = name.ends_with(".transform");
    if (shape.size() == 2)
    {
      const double limit = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (std::uint64_t r = 0; r < shape[0]; ++r)
        for (std::uint64_t c = 0; c < shape[1]; ++c)
        {
          double v = dist(rng);
          if (is_transform) v = (r == c ? 1.0 : 0.0) + 0.1 * v;
          t.data[r * shape[1] + c] = static_cast<float>(v);
        }
    }
    else
    {
      std::uniform_real_distribution<double> dist(-0.05, 0.05);
      for (auto& v : t.data) v = static_cast<float>(dist(rng));
    }
    store.set(name, std::move(t));
  }
  return store;
}

namespace
{

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v)
{
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f)
{
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader
{
public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t u64()
  {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  float f32()
  {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return std::bit_cast<float>(v);
  }

  std::string str(std::uint64_t n)
  {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

private:
  void need(std::uint64_t n) const
  {
    if (n > bytes_.size() - pos_) throw std::runtime_error("weight file truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_weights(const WeightStore& store)
{
  std::vector<std::uint8_t> out;
  put_u64(out, store.size());
  for (const auto& [name, t] : store.tensors())
  {
    put_u64(out, name.size());
    out.insert(out.end(), name.begin(), name.end());
    put_u64(out, t.shape.size());
    for (auto d : t.shape) put_u64(out, d);
    for (float v : t.data) put_f32(out, v);
  }
  return out;
}

WeightStore decode_weights(std::span<const std::uint8_t> bytes)
{
  Reader in(bytes);
  WeightStore store;
  const std::uint64_t count = in.u64();
  for (std::uint64_t i = 0; i < count; ++i)
  {
    const std::uint64_t name_len = in.u64();
    const std::string name = in.str(name_len);
    const std::uint64_t rank = in.u64();
    if (rank > 8) throw std::runtime_error("weight file: tensor '" + name + "' has rank > 8");
    Tensor t;
    for (std::uint64_t r = 0; r < rank; ++r) t.shape.push_back(in.u64());
    const std::uint64_t n = t.numel();
    if (n > in.remaining() / 4) throw std::runtime_error("weight file truncated");
    t.data.resize(n);
    for (auto& v : t.data) v = in.f32();
    if (store.contains(name)) throw std::runtime_error("weight file: duplicate tensor '" + name + "'");
    store.set(name, std::move(t));
  }
  if (!in.done()) throw std::runtime_error("weight file: trailing bytes");
  return store;
}

void save_weights(const WeightStore& store, const std::filesystem::path& path)
{
  const auto bytes = encode_weights(store);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

WeightStore load_weights(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_weights(bytes);
}

}  // namespace swarmnet
