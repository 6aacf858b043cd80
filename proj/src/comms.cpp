#include "swarmnet/comms.hpp"

#include <stdexcept>

namespace swarmnet
{

std::vector<int> CommGraph::neighbours(int i) const
{
  std::vector<int> out;
  for (int j = 0; j < size(); ++j)
    if (linked(i, j)) out.push_back(j);
  return out;
}

int CommGraph::numEdges() const
{
  int edges = 0;
  for (int i = 0; i < size(); ++i)
    for (int j = i + 1; j < size(); ++j)
      if (linked(i, j)) ++edges;
  return edges;
}

CommGraph rebuild_graph(const Eigen::Matrix<double, Eigen::Dynamic, 3>& positions, double range)
{
  if (!(range > 0.0)) throw std::invalid_argument("rebuild_graph: range must be positive");
  const auto n = positions.rows();
  CommGraph graph;
  graph.range = range;
  graph.adjacency = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if ((positions.row(i) - positions.row(j)).norm() <= range) graph.adjacency(i, j) = graph.adjacency(j, i) = 1.0;
  return graph;
}

Mailbox to_messages(int sender, const std::vector<Eigen::MatrixXd>& payloads, std::int64_t stamp)
{
  Mailbox out;
  for (int l = 0; l < static_cast<int>(payloads.size()); ++l)
    for (int k = 0; k < payloads[l].rows(); ++k)
      out.push_back(Message{sender, l, k + 1, payloads[l].row(k).transpose(), stamp});
  return out;
}

std::vector<Mailbox> exchange_round(const std::vector<Mailbox>& outboxes, const CommGraph& graph)
{
  if (static_cast<int>(outboxes.size()) != graph.size())
    throw std::invalid_argument("exchange_round: outbox count does not match the graph");
  std::vector<Mailbox> inboxes(outboxes.size());
  for (int i = 0; i < graph.size(); ++i)
    for (int j : graph.neighbours(i)) inboxes[j].insert(inboxes[j].end(), outboxes[i].begin(), outboxes[i].end());
  return inboxes;
}

MessageBus::MessageBus(int n_agents, int n_layers, int taps, int width)
    : n_agents_(n_agents), n_layers_(n_layers), taps_(taps), width_(width), outbox_(n_agents), mailbox_(n_agents)
{
  if (n_agents < 0 || n_layers < 1 || taps < 1 || width < 1)
    throw std::invalid_argument("MessageBus: invalid dimensions");
}

void MessageBus::publish(int agent, const std::vector<Eigen::MatrixXd>& payloads)
{
  if (static_cast<int>(payloads.size()) != n_layers_)
    throw std::invalid_argument("MessageBus::publish: expected one payload per layer");
  for (const auto& p : payloads)
    if (p.rows() != taps_ || p.cols() != width_)
      throw std::invalid_argument("MessageBus::publish: payload must be K x G");
  outbox_.at(agent) = payloads;
}

void MessageBus::deliver(const CommGraph& graph, std::int64_t tick)
{
  if (graph.size() != n_agents_) throw std::invalid_argument("MessageBus::deliver: graph size mismatch");
  for (int i = 0; i < n_agents_; ++i)
  {
    if (!outbox_[i]) continue;
    for (int j : graph.neighbours(i))
    {
      mailbox_[j][i] = {tick, *outbox_[i]};
      delivered_ += static_cast<std::uint64_t>(n_layers_ * taps_);
      if (trace_)
        for (int l = 0; l < n_layers_; ++l)
          for (int k = 1; k <= taps_; ++k) *trace_ << tick << ',' << i << ',' << j << ',' << l << ',' << k << '\n';
    }
  }
}

std::vector<std::vector<Eigen::MatrixXd>> MessageBus::gather(int agent, const CommGraph& graph, std::int64_t tick)
{
  std::vector<std::vector<Eigen::MatrixXd>> out(n_layers_);
  for (int j : graph.neighbours(agent))
  {
    auto it = mailbox_.at(agent).find(j);
    if (it == mailbox_[agent].end() || it->second.first > tick - 1) continue;
    for (int l = 0; l < n_layers_; ++l) out[l].push_back(it->second.second[l]);
    consumed_.push_back(Consumption{tick, agent, j, it->second.first});
  }
  return out;
}

void MessageBus::setTrace(std::ostream* out)
{
  trace_ = out;
  if (trace_) *trace_ << "tick,sender,receiver,layer,tap\n";
}

}  // namespace swarmnet
