#pragma once

#include "swarmnet/comms.hpp"
#include "swarmnet/network.hpp"
#include "swarmnet/qp.hpp"
#include "swarmnet/safety.hpp"
#include "swarmnet/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace swarmnet
{

/// Derives an independent stream seed from a base seed and two indices.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

// ---------------------------------------------------------------------------
// trefoil motion

/// Trefoil knot (sin t + 2 sin 2t, cos t - 2 cos 2t, -sin 3t) scaled to a
/// given x-width and traversed at a constant angular rate whose peak linear
/// speed equals max_speed.
struct TrefoilPath
{
  Vector3 center = Vector3::Zero();
  double width = 1.0;
  double max_speed = 2.0;
  double phase = 0.0;

  double scale() const;
  double angularRate() const;
  double period() const;
  /// Offset from the centre at time t.
  Vector3 offset(double t) const;
  Vector3 position(double t) const { return center + offset(t); }
  Vector3 velocity(double t) const;
  /// Per-axis bound on |offset| over a full period.
  Vector3 reach() const;
};

/// x-extent of the unit trefoil; the extrema sit at cos t = (-1 +- sqrt 129) / 16.
double trefoil_unit_width();
/// max over t of |d/dt curve(t)| for the unit trefoil.
double trefoil_unit_peak_speed();

// ---------------------------------------------------------------------------
// world

struct Box
{
  Vector3 center = Vector3::Zero();
  Vector3 half = Vector3::Constant(0.5);

  double volume() const { return 8.0 * half.prod(); }
};

struct Obstacle
{
  Box box;
  std::optional<TrefoilPath> motion;

  Box at(double t) const;
};

struct AgentState
{
  Vector3 r = Vector3::Zero();
  Vector3 v = Vector3::Zero();
  Vector3 a = Vector3::Zero();
  Eigen::Quaterniond quat = Eigen::Quaterniond::Identity();
  Vector3 start = Vector3::Zero();
  Vector3 goal = Vector3::Zero();
  SplineTrajectory committed;  // world frame
  double radius = 0.15;
};

enum class ScenarioKind
{
  forest,
  corridor,
};

struct ScenarioConfig
{
  ScenarioKind kind = ScenarioKind::forest;
  double density = 0.0;  // occupied volume fraction, [0, 0.25]
  int n_agents = 2;
  double range = 4.0;    // sensing and communication radius R
  std::uint64_t seed = 0;
  Limits limits;
  double horizon = 1.0;  // t_f
  double plan_rate = 15.0;
  double comm_rate = 100.0;
  double timeout = 60.0;
  double agent_radius = 0.15;
  double goal_tolerance = 0.3;
  double obstacle_speed = 2.0;
  double trefoil_width = 1.0;
  Vector3 pillar_size{0.4, 0.4, 4.0};
  int lidar_rays = 1500;
  int expert_samples = 64;
  double gnn_margin = 0.0;   // epsilon in g . q <= -epsilon
  double point_adjacency_radius = 0.1;

  double forestRadius() const { return 10.0; }
};

/// Corridor extent: x in [-10, 10], y in [-4, 4], z in [0, 4].
inline const Box kCorridorBounds{Vector3(0.0, 0.0, 2.0), Vector3(10.0, 4.0, 2.0)};

/// Throws std::invalid_argument naming the offending field.
void validate_config(const ScenarioConfig& config);
ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ScenarioConfig& config);
ScenarioConfig load_config(const std::filesystem::path& path);

struct WorldState
{
  ScenarioConfig config;
  std::vector<Obstacle> obstacles;
  std::vector<AgentState> agents;
  double time = 0.0;

  double occupiedVolume() const;
};

/// Pillars uniformly inside the 10 m sphere up to the target volume
/// fraction, alternating static and trefoil-dynamic; agents evenly spaced on
/// the equator with antipodal goals. Throws std::runtime_error when the
/// density cannot be met.
WorldState generate_forest(const ScenarioConfig& config);

/// Vertical and horizontal pillars inside the corridor; agents start near
/// x = -9.5 and fly to x = +9.5.
WorldState generate_corridor(const ScenarioConfig& config);

WorldState generate_world(const ScenarioConfig& config);

/// Trajectory that hovers at p over [t0, t0 + horizon].
SplineTrajectory hover_trajectory(const Vector3& p, double t0, double horizon);

// ---------------------------------------------------------------------------
// sensing

/// Up to n unit directions on a Fibonacci sphere.
Eigen::Matrix<double, Eigen::Dynamic, 3> fibonacci_directions(int n);

/// Ray / box slab test; distance along the unit ray or nullopt.
std::optional<double> ray_box(const Vector3& origin, const Vector3& dir, const Box& box);
std::optional<double> ray_sphere(const Vector3& origin, const Vector3& dir, const Vector3& center, double radius);

struct Scan
{
  PointCloud points;            // hit positions relative to the sensor
  std::vector<int> hit_agent;   // peer index for agent hits, -1 for obstacles
};

/// Nearest hit per ray against obstacle boxes (at the world time) and peer
/// spheres within range.
Scan lidar_scan(const WorldState& world, int agent, const Eigen::Matrix<double, Eigen::Dynamic, 3>& rays);

// ---------------------------------------------------------------------------
// planning

/// Privileged stand-in expert: draws random projected trajectories (half
/// drifting towards the goal), keeps those classified safe against the
/// joined cloud and clear of the peers' committed trajectories and of the
/// true obstacle motion, and returns the one ending nearest the goal.
/// Returns nullopt when no sample survives.
std::optional<SplineTrajectory> sampling_expert(const AgentState& agent, const PointCloud& joined_cloud,
                                                const std::vector<const SplineTrajectory*>& peers,
                                                const std::vector<Obstacle>& obstacles, double now,
                                                const ScenarioConfig& config, std::uint64_t seed);

struct PlanResult
{
  SplineTrajectory trajectory;  // committed (world frame)
  bool replaced = false;        // false -> previous trajectory kept
  std::vector<Eigen::MatrixXd> payloads;
  BranchOutputs outputs;
  Eigen::VectorXd q;            // QP solution (ego frame), empty if infeasible
};

/// Learned planning step: normalise, forward with the received payloads,
/// project through the QP with g, commit the result translated to r or keep
/// the previous trajectory when the QP is infeasible.
PlanResult plan_step(const AgentState& agent, const PointCloud& scan,
                     const std::vector<std::vector<Eigen::MatrixXd>>& inbox, const Network& network,
                     const ScenarioConfig& config, double now);

// ---------------------------------------------------------------------------
// missions

enum class Policy
{
  learned,
  expert,
};

struct TraceRow
{
  std::int64_t tick;
  double time;
  std::vector<Vector3> positions;
  double min_agent_distance;
  double min_obstacle_distance;
};

struct PlanEvent
{
  std::int64_t tick;
  int agent;
  InitialState state;           // ego-frame state at plan time
  Vector3 position;
  Vector3 goal;
  PointCloud scan;
  PointCloud joined_cloud;      // relative to the agent, self hits removed
  SplineTrajectory committed;   // after the plan
  bool replaced;
};

struct MissionMetrics
{
  bool success = false;
  std::string reason;  // "ok", "collision", "timeout"
  std::vector<std::optional<double>> travel_time;
  double min_agent_distance = std::numeric_limits<double>::infinity();
  double min_obstacle_distance = std::numeric_limits<double>::infinity();
  double max_commit_jump = 0.0;
  int plans = 0;
  int kept_previous = 0;
  std::int64_t ticks = 0;
  std::int64_t min_message_age = std::numeric_limits<std::int64_t>::max();  // ticks
  std::uint64_t messages_delivered = 0;
  std::vector<double> plan_seconds;  // wall-clock, not deterministic
};

struct MissionOptions
{
  std::vector<TraceRow>* trace = nullptr;
  std::ostream* message_trace = nullptr;
  std::function<void(const PlanEvent&)> on_plan;
  std::optional<std::filesystem::path> saliency_dir;
  std::vector<MessageBus::Consumption>* consumed = nullptr;  // copy of the bus consumption log (learned policy)
};

/// Fixed-step mission loop at the communication rate with perfect tracking.
/// Throws std::invalid_argument for the learned policy without a network.
MissionMetrics run_mission(const ScenarioConfig& config, Policy policy, const Network* network,
                           const MissionOptions& options = {});

/// Same, starting from a prepared world.
MissionMetrics run_mission(WorldState world, Policy policy, const Network* network,
                           const MissionOptions& options = {});

nlohmann::json metrics_to_json(const MissionMetrics& metrics);
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

}  // namespace swarmnet
