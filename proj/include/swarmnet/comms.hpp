#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <vector>

namespace swarmnet
{

/// One compressed feature slot: row (tap - 1) of a layer's K x G payload.
struct Message
{
  int sender = -1;
  int layer = 0;
  int tap = 1;
  Eigen::VectorXd payload;
  std::int64_t stamp = 0;
};

using Mailbox = std::vector<Message>;

struct CommGraph
{
  Eigen::MatrixXd adjacency;  // binary, symmetric, zero diagonal
  double range = 0.0;

  int size() const { return static_cast<int>(adjacency.rows()); }
  bool linked(int i, int j) const { return adjacency(i, j) != 0.0; }
  std::vector<int> neighbours(int i) const;
  int numEdges() const;
};

/// Edge iff |r_i - r_j| <= R. Throws std::invalid_argument for R <= 0.
CommGraph rebuild_graph(const Eigen::Matrix<double, Eigen::Dynamic, 3>& positions, double range);

/// Splits per-layer K x G payloads into messages stamped `stamp`.
Mailbox to_messages(int sender, const std::vector<Eigen::MatrixXd>& payloads, std::int64_t stamp);

/// Loss-free delivery of every outbox to the sender's graph neighbours.
std::vector<Mailbox> exchange_round(const std::vector<Mailbox>& outboxes, const CommGraph& graph);

/// Unit-delay mailbox. Each tick every agent re-broadcasts its freshest
/// payloads; what is delivered at tick t becomes readable from tick t + 1.
class MessageBus
{
public:
  struct Consumption
  {
    std::int64_t tick;
    int receiver;
    int sender;
    std::int64_t stamp;
  };

  MessageBus(int n_agents, int n_layers, int taps, int width);

  /// Replaces the agent's outbox with fresh payloads (one K x G per layer).
  void publish(int agent, const std::vector<Eigen::MatrixXd>& payloads);

  /// Sends every outbox over the graph, stamping messages with `tick`.
  void deliver(const CommGraph& graph, std::int64_t tick);

  /// Per-layer payloads from current neighbours, restricted to messages
  /// stamped <= tick - 1. Each consumed message is logged for audit.
  std::vector<std::vector<Eigen::MatrixXd>> gather(int agent, const CommGraph& graph, std::int64_t tick);

  const std::vector<Consumption>& consumed() const { return consumed_; }
  std::uint64_t delivered() const { return delivered_; }
  /// Scalars one agent sends per broadcast round.
  int scalarsPerRound() const { return n_layers_ * taps_ * width_; }

  /// Optional CSV log `tick,sender,receiver,layer,tap` of every delivery.
  void setTrace(std::ostream* out);

private:
  int n_agents_, n_layers_, taps_, width_;
  std::vector<std::optional<std::vector<Eigen::MatrixXd>>> outbox_;
  // mailbox_[receiver][sender] = (stamp, payloads)
  std::vector<std::map<int, std::pair<std::int64_t, std::vector<Eigen::MatrixXd>>>> mailbox_;
  std::vector<Consumption> consumed_;
  std::uint64_t delivered_ = 0;
  std::ostream* trace_ = nullptr;
};

}  // namespace swarmnet
