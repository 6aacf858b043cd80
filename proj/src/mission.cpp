#include "swarmnet/saliency.hpp"
#include "swarmnet/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace swarmnet
{

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

namespace
{

/// Ego-frame trajectory re-timed to [now, now + horizon] and moved to r.
SplineTrajectory to_world(const ControlPoints& ego, const Vector3& r, double now, double horizon)
{
  ControlPoints cps = ego;
  cps.rowwise() += r.transpose();
  return make_trajectory(cps, now, now + horizon);
}

constexpr int kPeerSamples = 40;
constexpr double kPeerMargin = 0.05;
constexpr double kObstacleMargin = 0.1;

bool clear_of_peers(const SplineTrajectory& traj, const std::vector<const SplineTrajectory*>& peers,
                    double clearance)
{
  for (int k = 1; k <= kPeerSamples; ++k)
  {
    const double t = traj.t0 + (traj.tf - traj.t0) * k / kPeerSamples;
    const Vector3 p = eval_spline_clamped(traj, t);
    for (const auto* peer : peers)
      if ((p - eval_spline_clamped(*peer, t)).norm() <= clearance) return false;
  }
  return true;
}

bool clear_of_obstacles(const SplineTrajectory& traj, const std::vector<const Obstacle*>& obstacles,
                        double clearance)
{
  for (int k = 1; k <= kPeerSamples; ++k)
  {
    const double t = traj.t0 + (traj.tf - traj.t0) * k / kPeerSamples;
    const Vector3 p = eval_spline_clamped(traj, t);
    for (const auto* o : obstacles)
    {
      const Box b = o->at(t);
      if (point_to_box_distance<double>(p, b.center, b.half) <= clearance) return false;
    }
  }
  return true;
}

}  // namespace

std::optional<SplineTrajectory> sampling_expert(const AgentState& agent, const PointCloud& joined_cloud,
                                                const std::vector<const SplineTrajectory*>& peers,
                                                const std::vector<Obstacle>& obstacles, double now,
                                                const ScenarioConfig& config, std::uint64_t seed)
{
  const InitialState x0{Vector3::Zero(), agent.v, agent.a};
  const Vector3 goal = agent.goal - agent.r;
  std::mt19937_64 seeds(seed);

  std::vector<std::pair<double, SplineTrajectory>> candidates;
  // even draws drift towards the goal, odd draws are uniform
  const Vector3 drift = (goal / config.horizon).cwiseMax(-config.limits.v_max).cwiseMin(config.limits.v_max);
  std::uniform_real_distribution<double> speed(0.2, 1.0);
  for (int s = 0; s < config.expert_samples; ++s)
  {
    const std::uint64_t sample_seed = seeds();
    const double fraction = speed(seeds);
    try
    {
      SplineTrajectory traj =
          s % 2 == 0 ? sample_random_trajectory(x0, config.limits, config.horizon, sample_seed, fraction * drift, 0.3)
                     : sample_random_trajectory(x0, config.limits, config.horizon, sample_seed);
      const double d = (traj.cps.row(traj.cps.rows() - 1).transpose() - goal).norm();
      candidates.emplace_back(d, std::move(traj));
    }
    catch (const std::runtime_error&)
    {
      // x0 drifted marginally outside the limits; skip this draw
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  const SafetyProfile profile{agent.radius};
  const double clearance = 2.0 * agent.radius + kPeerMargin;

  // only obstacles whose swept volume the horizon can reach
  const double reach = config.limits.v_max.norm() * config.horizon + agent.radius + kObstacleMargin;
  std::vector<const Obstacle*> nearby;
  for (const auto& o : obstacles)
  {
    const Vector3 sweep = o.box.half + (o.motion ? o.motion->reach() : Vector3::Zero());
    const Vector3 centre = o.motion ? o.motion->center : o.box.center;
    if (point_to_box_distance<double>(agent.r, centre, sweep) <= reach) nearby.push_back(&o);
  }
  for (const auto& [dist, traj] : candidates)
  {
    // cheapest checks first; the accepted candidate is the same either way
    SplineTrajectory world = to_world(traj.cps, agent.r, now, config.horizon);
    if (!clear_of_peers(world, peers, clearance)) continue;
    if (!clear_of_obstacles(world, nearby, agent.radius + kObstacleMargin)) continue;
    if (!is_trajectory_safe(traj, joined_cloud, profile)) continue;
    return world;
  }
  return std::nullopt;
}

PlanResult plan_step(const AgentState& agent, const PointCloud& scan,
                     const std::vector<std::vector<Eigen::MatrixXd>>& inbox, const Network& network,
                     const ScenarioConfig& config, double now)
{
  const NormalizedInputs in =
      normalize_inputs(scan, agent.quat, agent.v, agent.a, agent.goal - agent.r, config.range, config.limits);
  const AgentEncoding enc = network.encode(in);
  NodeOutputs node = network.forward_node(enc, inbox);

  PlanResult result;
  result.payloads = std::move(node.payloads);
  result.outputs = std::move(node.outputs);
  result.trajectory = agent.committed;

  const KnotVector knots = build_clamped_knots(0.0, config.horizon, kPlannerCps);
  const InitialState x0{Vector3::Zero(), agent.v, agent.a};
  try
  {
    const QpProblem prob = assemble(result.outputs.q_star, x0, config.limits,
                                    CollisionConstraint{result.outputs.g}, knots, config.gnn_margin);
    const QpSolution sol = solve(prob);
    if (sol.status == QpStatus::optimal && sol.q.allFinite())
    {
      result.q = sol.q;
      result.trajectory = to_world(unflatten_cps(sol.q), agent.r, now, config.horizon);
      result.replaced = true;
    }
  }
  catch (const std::exception&)
  {
    // solver errors fall back to the previous trajectory
  }
  return result;
}

// ---------------------------------------------------------------------------

MissionMetrics run_mission(const ScenarioConfig& config, Policy policy, const Network* network,
                           const MissionOptions& options)
{
  return run_mission(generate_world(config), policy, network, options);
}

MissionMetrics run_mission(WorldState world, Policy policy, const Network* network, const MissionOptions& options)
{
  const ScenarioConfig& cfg = world.config;
  validate_config(cfg);
  if (policy == Policy::learned && network == nullptr)
    throw std::invalid_argument("run_mission: the learned policy needs network weights");

  const int n = static_cast<int>(world.agents.size());
  const double dt = 1.0 / cfg.comm_rate;
  const auto max_ticks = static_cast<std::int64_t>(std::ceil(cfg.timeout * cfg.comm_rate));
  const auto rays = fibonacci_directions(cfg.lidar_rays);

  // asynchronous planning: agent i plans whenever floor((k * plan_rate + offset_i) / comm_rate) advances
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x5eed, 1));
  std::uniform_real_distribution<double> offset_dist(0.0, cfg.comm_rate);
  std::vector<double> offset(n);
  for (auto& o : offset) o = offset_dist(rng);
  const auto plan_due = [&](int i, std::int64_t k) {
    const auto slot = [&](std::int64_t tick) {
      return std::floor((static_cast<double>(tick) * cfg.plan_rate + offset[i]) / cfg.comm_rate);
    };
    return slot(k) > slot(k - 1);
  };

  std::optional<MessageBus> bus;
  if (policy == Policy::learned)
  {
    bus.emplace(n, network->numLayers(), network->config().taps, network->config().compressed_width);
    if (options.message_trace) bus->setTrace(options.message_trace);
  }

  MissionMetrics m;
  m.travel_time.assign(n, std::nullopt);
  std::vector<int> plan_count(n, 0);
  bool collided = false, done = false;
  Eigen::Matrix<double, Eigen::Dynamic, 3> positions(n, 3);

  std::int64_t k = 0;
  for (; k <= max_ticks; ++k)
  {
    const double t = static_cast<double>(k) * dt;
    world.time = t;
    for (int i = 0; i < n; ++i)
    {
      auto& a = world.agents[i];
      a.r = eval_spline_clamped(a.committed, t, 0);
      a.v = eval_spline_clamped(a.committed, t, 1);
      a.a = eval_spline_clamped(a.committed, t, 2);
      positions.row(i) = a.r.transpose();
    }

    double tick_agent = std::numeric_limits<double>::infinity();
    double tick_obstacle = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
    {
      const auto& a = world.agents[i];
      for (int j = i + 1; j < n; ++j)
      {
        const double d = (a.r - world.agents[j].r).norm();
        tick_agent = std::min(tick_agent, d);
        if (d < a.radius + world.agents[j].radius) collided = true;
      }
      for (const auto& o : world.obstacles)
      {
        const Box b = o.at(t);
        const double d = point_to_box_distance<double>(a.r, b.center, b.half);
        tick_obstacle = std::min(tick_obstacle, d);
        if (d < a.radius) collided = true;
      }
      if (!m.travel_time[i] && (a.r - a.goal).norm() <= cfg.goal_tolerance) m.travel_time[i] = t;
    }
    m.min_agent_distance = std::min(m.min_agent_distance, tick_agent);
    m.min_obstacle_distance = std::min(m.min_obstacle_distance, tick_obstacle);
    if (options.trace)
    {
      TraceRow row{k, t, {}, tick_agent, tick_obstacle};
      for (const auto& a : world.agents) row.positions.push_back(a.r);
      options.trace->push_back(std::move(row));
    }
    if (collided) break;
    if (std::all_of(m.travel_time.begin(), m.travel_time.end(), [](const auto& v) { return v.has_value(); }))
    {
      done = true;
      break;
    }
    if (k == max_ticks) break;

    const CommGraph graph = rebuild_graph(positions, cfg.range);
    std::vector<std::optional<Scan>> scans(n);
    const auto scan_of = [&](int j) -> const Scan& {
      if (!scans[j]) scans[j] = lidar_scan(world, j, rays);
      return *scans[j];
    };

    for (int i = 0; i < n; ++i)
    {
      if (!plan_due(i, k)) continue;
      auto& agent = world.agents[i];
      const auto started = std::chrono::steady_clock::now();
      const SplineTrajectory previous = agent.committed;
      const std::uint64_t plan_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i), plan_count[i]++);
      PlanEvent event{k, i, InitialState{Vector3::Zero(), agent.v, agent.a}, agent.r, agent.goal,
                      scan_of(i).points, PointCloud(0, 3), previous, false};

      bool replaced = false;
      if (policy == Policy::expert)
      {
        // privileged: every agent's scan, re-centred on this agent, minus hits on itself
        std::vector<Vector3> pts;
        for (int j = 0; j < n; ++j)
        {
          const Scan& s = scan_of(j);
          const Vector3 shift = world.agents[j].r - agent.r;
          for (Eigen::Index p = 0; p < s.points.rows(); ++p)
            if (s.hit_agent[p] != i) pts.push_back(s.points.row(p).transpose() + shift);
        }
        event.joined_cloud.resize(static_cast<Eigen::Index>(pts.size()), 3);
        for (std::size_t p = 0; p < pts.size(); ++p)
          event.joined_cloud.row(static_cast<Eigen::Index>(p)) = pts[p].transpose();

        std::vector<const SplineTrajectory*> peers;
        for (int j = 0; j < n; ++j)
          if (j != i) peers.push_back(&world.agents[j].committed);
        if (auto traj = sampling_expert(agent, event.joined_cloud, peers, world.obstacles, t, cfg, plan_seed))
        {
          agent.committed = std::move(*traj);
          replaced = true;
        }
      }
      else
      {
        const auto inbox = bus->gather(i, graph, k);
        PlanResult res = plan_step(agent, scan_of(i).points, inbox, *network, cfg, t);
        bus->publish(i, res.payloads);
        if (options.saliency_dir && scan_of(i).points.rows() > 0)
        {
          std::filesystem::create_directories(*options.saliency_dir);
          const auto file = *options.saliency_dir /
                            ("tick" + std::to_string(k) + "_agent" + std::to_string(i) + ".xyz");
          write_saliency(file, scan_of(i).points, pointbackprop(res.outputs.maps));
        }
        if (res.replaced)
        {
          agent.committed = std::move(res.trajectory);
          replaced = true;
        }
      }

      if (replaced)
      {
        for (int d = 0; d <= 2; ++d)
          m.max_commit_jump = std::max(
              m.max_commit_jump, (eval_spline_clamped(agent.committed, t, d) - eval_spline_clamped(previous, t, d)).norm());
      }
      else
      {
        ++m.kept_previous;
      }
      ++m.plans;
      m.plan_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
      if (options.on_plan)
      {
        event.committed = agent.committed;
        event.replaced = replaced;
        options.on_plan(event);
      }
    }
    if (bus) bus->deliver(graph, k);
  }

  m.ticks = k;
  if (bus)
  {
    m.messages_delivered = bus->delivered();
    for (const auto& c : bus->consumed()) m.min_message_age = std::min(m.min_message_age, c.tick - c.stamp);
    if (options.consumed) *options.consumed = bus->consumed();
  }
  if (collided)
    m.reason = "collision";
  else if (done)
    m.reason = "ok";
  else
    m.reason = "timeout";
  m.success = done && !collided;
  return m;
}

nlohmann::json metrics_to_json(const MissionMetrics& m)
{
  const auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json travel = nlohmann::json::array();
  for (const auto& t : m.travel_time) travel.push_back(t ? nlohmann::json(*t) : nlohmann::json(nullptr));
  return {
      {"success", m.success},
      {"reason", m.reason},
      {"travel_time", travel},
      {"min_agent_distance", finite_or_null(m.min_agent_distance)},
      {"min_obstacle_distance", finite_or_null(m.min_obstacle_distance)},
      {"max_commit_jump", m.max_commit_jump},
      {"plans", m.plans},
      {"kept_previous", m.kept_previous},
      {"ticks", m.ticks},
      {"min_message_age",
       m.min_message_age == std::numeric_limits<std::int64_t>::max() ? nlohmann::json(nullptr)
                                                                       : nlohmann::json(m.min_message_age)},
      {"messages_delivered", m.messages_delivered},
  };
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace)
{
  const std::size_t n = trace.empty() ? 0 : trace.front().positions.size();
  const auto precision = out.precision(10);
  out << "tick,time";
  for (std::size_t i = 0; i < n; ++i) out << ",x" << i << ",y" << i << ",z" << i;
  out << ",min_agent_distance,min_obstacle_distance\n";
  const auto num = [&](double v) -> std::ostream& {
    if (std::isfinite(v))
      out << v;
    else
      out << "inf";
    return out;
  };
  for (const auto& row : trace)
  {
    out << row.tick << ',' << row.time;
    for (const auto& p : row.positions) out << ',' << p.x() << ',' << p.y() << ',' << p.z();
    out << ',';
    num(row.min_agent_distance) << ',';
    num(row.min_obstacle_distance) << '\n';
  }
  out.precision(precision);
}

}  // namespace swarmnet
