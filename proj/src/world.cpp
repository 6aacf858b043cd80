#include "swarmnet/sim.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace swarmnet
{

namespace
{

Vector3 unit_trefoil(double th)
{
  return {std::sin(th) + 2.0 * std::sin(2.0 * th), std::cos(th) - 2.0 * std::cos(2.0 * th), -std::sin(3.0 * th)};
}

Vector3 unit_trefoil_tangent(double th)
{
  return {std::cos(th) + 4.0 * std::cos(2.0 * th), -std::sin(th) + 4.0 * std::sin(2.0 * th),
          -3.0 * std::cos(3.0 * th)};
}

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

double trefoil_unit_width()
{
  static const double width = [] {
    // dx/dt = cos t + 4 cos 2t = 8 cos^2 t + cos t - 4
    double lo = 0.0, hi = 0.0;
    for (double c : {(-1.0 + std::sqrt(129.0)) / 16.0, (-1.0 - std::sqrt(129.0)) / 16.0})
      for (double sign : {1.0, -1.0})
      {
        const double x = unit_trefoil(sign * std::acos(c)).x();
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    return hi - lo;
  }();
  return width;
}

double trefoil_unit_peak_speed()
{
  static const double peak = [] {
    const int n = 20000;
    double best_t = 0.0, best = 0.0;
    for (int i = 0; i < n; ++i)
    {
      const double th = kTwoPi * i / n;
      const double s = unit_trefoil_tangent(th).norm();
      if (s > best)
      {
        best = s;
        best_t = th;
      }
    }
    // golden-section refinement around the sampled maximum
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = best_t - kTwoPi / n, b = best_t + kTwoPi / n;
    for (int it = 0; it < 100; ++it)
    {
      const double c = b - g * (b - a), d = a + g * (b - a);
      if (unit_trefoil_tangent(c).norm() > unit_trefoil_tangent(d).norm())
        b = d;
      else
        a = c;
    }
    return std::max(best, unit_trefoil_tangent(0.5 * (a + b)).norm());
  }();
  return peak;
}

double TrefoilPath::scale() const { return width / trefoil_unit_width(); }

double TrefoilPath::angularRate() const { return max_speed / (scale() * trefoil_unit_peak_speed()); }

double TrefoilPath::period() const { return kTwoPi / angularRate(); }

Vector3 TrefoilPath::offset(double t) const { return scale() * unit_trefoil(phase + angularRate() * t); }

Vector3 TrefoilPath::velocity(double t) const
{
  return scale() * angularRate() * unit_trefoil_tangent(phase + angularRate() * t);
}

Vector3 TrefoilPath::reach() const
{
  static const Vector3 unit = [] {
    Vector3 m = Vector3::Zero();
    for (int i = 0; i < 4000; ++i) m = m.cwiseMax(unit_trefoil(kTwoPi * i / 4000).cwiseAbs());
    return Vector3(m * 1.001);
  }();
  return scale() * unit;
}

Box Obstacle::at(double t) const
{
  if (!motion) return box;
  return Box{motion->position(t), box.half};
}

double WorldState::occupiedVolume() const
{
  double v = 0.0;
  for (const auto& o : obstacles) v += o.box.volume();
  return v;
}

SplineTrajectory hover_trajectory(const Vector3& p, double t0, double horizon)
{
  ControlPoints cps(kPlannerCps, 3);
  cps.rowwise() = p.transpose();
  return make_trajectory(cps, t0, t0 + horizon);
}

// ---------------------------------------------------------------------------
// configuration

namespace
{

const char* kind_name(ScenarioKind k) { return k == ScenarioKind::forest ? "forest" : "corridor"; }

[[noreturn]] void bad_field(const std::string& field, const std::string& what)
{
  throw std::invalid_argument("scenario field '" + field + "': " + what);
}

}  // namespace

void validate_config(const ScenarioConfig& c)
{
  if (!(c.density >= 0.0 && c.density <= 0.25)) bad_field("density", "must lie in [0, 0.25]");
  if (c.n_agents < 1 || c.n_agents > 64) bad_field("n_agents", "must lie in [1, 64]");
  if (!(c.range > 0.0)) bad_field("range", "must be positive");
  if (!(c.limits.v_max.array() > 0.0).all()) bad_field("limits.v_max", "must be positive");
  if (!(c.limits.a_max.array() > 0.0).all()) bad_field("limits.a_max", "must be positive");
  if (!(c.horizon > 0.0)) bad_field("horizon", "must be positive");
  if (!(c.plan_rate > 0.0)) bad_field("plan_rate", "must be positive");
  if (!(c.comm_rate >= c.plan_rate)) bad_field("comm_rate", "must be at least plan_rate");
  if (!(c.timeout > 0.0)) bad_field("timeout", "must be positive");
  if (!(c.agent_radius > 0.0)) bad_field("agent_radius", "must be positive");
  if (!(c.goal_tolerance > 0.0)) bad_field("goal_tolerance", "must be positive");
  if (!(c.obstacle_speed > 0.0)) bad_field("obstacle_speed", "must be positive");
  if (!(c.trefoil_width > 0.0)) bad_field("trefoil_width", "must be positive");
  if (!(c.pillar_size.array() > 0.0).all()) bad_field("pillar_size", "must be positive");
  if (c.lidar_rays < 1 || c.lidar_rays > kDefaultCloudCap) bad_field("lidar_rays", "must lie in [1, 1500]");
  if (c.expert_samples < 1) bad_field("expert_samples", "must be at least 1");
  if (!(c.gnn_margin >= 0.0)) bad_field("gnn_margin", "must be non-negative");
  if (!(c.point_adjacency_radius > 0.0)) bad_field("point_adjacency_radius", "must be positive");
}

namespace
{

double get_number(const nlohmann::json& j, const std::string& field)
{
  if (!j.is_number()) bad_field(field, "expected a number");
  return j.get<double>();
}

int get_int(const nlohmann::json& j, const std::string& field)
{
  if (!j.is_number_integer()) bad_field(field, "expected an integer");
  return j.get<int>();
}

Vector3 get_vec3(const nlohmann::json& j, const std::string& field)
{
  if (!j.is_array() || j.size() != 3) bad_field(field, "expected an array of three numbers");
  Vector3 v;
  for (int i = 0; i < 3; ++i) v(i) = get_number(j[i], field);
  return v;
}

}  // namespace

ScenarioConfig config_from_json(const nlohmann::json& j)
{
  if (!j.is_object()) throw std::invalid_argument("scenario: expected a JSON object");
  ScenarioConfig c;
  for (const auto& [key, value] : j.items())
  {
    if (key == "kind")
    {
      if (value == "forest")
        c.kind = ScenarioKind::forest;
      else if (value == "corridor")
        c.kind = ScenarioKind::corridor;
      else
        bad_field(key, "expected \"forest\" or \"corridor\"");
    }
    else if (key == "density") c.density = get_number(value, key);
    else if (key == "n_agents") c.n_agents = get_int(value, key);
    else if (key == "range") c.range = get_number(value, key);
    else if (key == "seed")
    {
      if (!value.is_number_unsigned()) bad_field(key, "expected a non-negative integer");
      c.seed = value.get<std::uint64_t>();
    }
    else if (key == "limits")
    {
      if (!value.is_object()) bad_field(key, "expected an object");
      for (const auto& [lk, lv] : value.items())
      {
        if (lk == "v_max") c.limits.v_max = get_vec3(lv, "limits.v_max");
        else if (lk == "a_max") c.limits.a_max = get_vec3(lv, "limits.a_max");
        else bad_field("limits." + lk, "unknown field");
      }
    }
    else if (key == "horizon") c.horizon = get_number(value, key);
    else if (key == "plan_rate") c.plan_rate = get_number(value, key);
    else if (key == "comm_rate") c.comm_rate = get_number(value, key);
    else if (key == "timeout") c.timeout = get_number(value, key);
    else if (key == "agent_radius") c.agent_radius = get_number(value, key);
    else if (key == "goal_tolerance") c.goal_tolerance = get_number(value, key);
    else if (key == "obstacle_speed") c.obstacle_speed = get_number(value, key);
    else if (key == "trefoil_width") c.trefoil_width = get_number(value, key);
    else if (key == "pillar_size") c.pillar_size = get_vec3(value, key);
    else if (key == "lidar_rays") c.lidar_rays = get_int(value, key);
    else if (key == "expert_samples") c.expert_samples = get_int(value, key);
    else if (key == "gnn_margin") c.gnn_margin = get_number(value, key);
    else if (key == "point_adjacency_radius") c.point_adjacency_radius = get_number(value, key);
    else bad_field(key, "unknown field");
  }
  validate_config(c);
  return c;
}

nlohmann::json config_to_json(const ScenarioConfig& c)
{
  const auto arr = [](const Vector3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); };
  return {
      {"kind", kind_name(c.kind)},
      {"density", c.density},
      {"n_agents", c.n_agents},
      {"range", c.range},
      {"seed", c.seed},
      {"limits", {{"v_max", arr(c.limits.v_max)}, {"a_max", arr(c.limits.a_max)}}},
      {"horizon", c.horizon},
      {"plan_rate", c.plan_rate},
      {"comm_rate", c.comm_rate},
      {"timeout", c.timeout},
      {"agent_radius", c.agent_radius},
      {"goal_tolerance", c.goal_tolerance},
      {"obstacle_speed", c.obstacle_speed},
      {"trefoil_width", c.trefoil_width},
      {"pillar_size", arr(c.pillar_size)},
      {"lidar_rays", c.lidar_rays},
      {"expert_samples", c.expert_samples},
      {"gnn_margin", c.gnn_margin},
      {"point_adjacency_radius", c.point_adjacency_radius},
  };
}

ScenarioConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read scenario file " + path.string());
  nlohmann::json j;
  try
  {
    j = nlohmann::json::parse(in);
  }
  catch (const nlohmann::json::parse_error& e)
  {
    throw std::invalid_argument("scenario file " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// generation

namespace
{

bool boxes_overlap(const Box& a, const Box& b)
{
  return ((a.center - b.center).cwiseAbs().array() < (a.half + b.half).array()).all();
}

/// Box covering every pose of the obstacle.
Box swept(const Obstacle& o)
{
  if (!o.motion) return o.box;
  return Box{o.box.center, o.box.half + o.motion->reach()};
}

bool clear_of_agents(const Box& sweep, const std::vector<AgentState>& agents, double clearance)
{
  for (const auto& a : agents)
    if (point_to_box_distance<double>(a.start, sweep.center, sweep.half) < clearance ||
        point_to_box_distance<double>(a.goal, sweep.center, sweep.half) < clearance)
      return false;
  return true;
}

constexpr double kAgentClearance = 1.0;

template <typename Propose>
void place_obstacles(WorldState& world, double target_volume, std::mt19937_64& rng, Propose propose)
{
  double placed = 0.0;
  int attempts = 0;
  for (int index = 0;;)
  {
    const double next = propose(index, rng, /*dry=*/true).box.volume();
    if (placed + 0.5 * next > target_volume) break;
    if (++attempts > 20000 + 200 * index)
      throw std::runtime_error("obstacle density unreachable after " + std::to_string(attempts - 1) + " attempts");
    Obstacle o = propose(index, rng, false);
    const Box sweep = swept(o);
    if (!clear_of_agents(sweep, world.agents, kAgentClearance)) continue;
    bool overlap = false;
    if (!o.motion)
      for (const auto& other : world.obstacles)
        if (!other.motion && boxes_overlap(o.box, other.box))
        {
          overlap = true;
          break;
        }
    if (overlap) continue;
    placed += o.box.volume();
    world.obstacles.push_back(std::move(o));
    ++index;
  }
}

TrefoilPath make_path(const ScenarioConfig& c, const Vector3& center, std::mt19937_64& rng)
{
  std::uniform_real_distribution<double> ph(0.0, kTwoPi);
  TrefoilPath p;
  p.center = center;
  p.width = c.trefoil_width;
  p.max_speed = c.obstacle_speed;
  p.phase = ph(rng);
  return p;
}

void add_agent(WorldState& world, const Vector3& start, const Vector3& goal)
{
  AgentState a;
  a.r = a.start = start;
  a.goal = goal;
  a.radius = world.config.agent_radius;
  a.committed = hover_trajectory(start, 0.0, world.config.horizon);
  world.agents.push_back(std::move(a));
}

}  // namespace

WorldState generate_forest(const ScenarioConfig& config)
{
  validate_config(config);
  WorldState world;
  world.config = config;
  std::mt19937_64 rng(config.seed);
  const double radius = config.forestRadius();

  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  const double phase = angle(rng);
  for (int i = 0; i < config.n_agents; ++i)
  {
    const double th = phase + kTwoPi * i / config.n_agents;
    const Vector3 start(radius * std::cos(th), radius * std::sin(th), 0.0);
    add_agent(world, start, -start);
  }

  const double sphere = 4.0 / 3.0 * std::numbers::pi * radius * radius * radius;
  std::uniform_real_distribution<double> u(-radius, radius);
  const Vector3 half = config.pillar_size / 2.0;
  place_obstacles(world, config.density * sphere, rng, [&](int index, std::mt19937_64& g, bool dry) {
    Obstacle o;
    o.box.half = half;
    if (dry) return o;
    Vector3 c;
    do
      c = Vector3(u(g), u(g), u(g));
    while (c.norm() > radius);
    o.box.center = c;
    if (index % 2 == 1) o.motion = make_path(config, c, g);
    return o;
  });
  return world;
}

WorldState generate_corridor(const ScenarioConfig& config)
{
  validate_config(config);
  WorldState world;
  world.config = config;
  std::mt19937_64 rng(config.seed);
  const Box& bounds = kCorridorBounds;
  const Vector3 lo = bounds.center - bounds.half;
  const Vector3 hi = bounds.center + bounds.half;

  for (int i = 0; i < config.n_agents; ++i)
  {
    const double y = lo.y() + 0.5 + (bounds.half.y() * 2.0 - 1.0) * (i + 0.5) / config.n_agents;
    const double z = bounds.center.z() + 0.8 * (i % 3 - 1);
    add_agent(world, Vector3(lo.x() + 0.5, y, z), Vector3(hi.x() - 0.5, y, z));
  }

  const double volume = bounds.volume();
  TrefoilPath probe;
  probe.width = config.trefoil_width;
  const Vector3 reach = probe.reach();
  const double px = config.pillar_size.x() / 2.0, py = config.pillar_size.y() / 2.0;

  place_obstacles(world, config.density * volume, rng, [&](int index, std::mt19937_64& g, bool dry) {
    const bool horizontal = index % 2 == 1;
    const bool dynamic = (index / 2) % 2 == 1;
    const Vector3 margin = dynamic ? reach : Vector3::Zero();
    Obstacle o;
    if (horizontal)
      o.box.half = Vector3(px, bounds.half.y() - margin.y(), py);
    else
      o.box.half = Vector3(px, py, bounds.half.z() - margin.z());
    if (dry) return o;

    const Vector3 span_lo = lo + o.box.half + margin;
    const Vector3 span_hi = hi - o.box.half - margin;
    const auto pick = [&](int axis) {
      return std::uniform_real_distribution<double>(span_lo(axis), span_hi(axis))(g);
    };
    o.box.center = Vector3(pick(0), pick(1), pick(2));
    if (horizontal) o.box.center.y() = bounds.center.y();
    else o.box.center.z() = bounds.center.z();
    if (dynamic) o.motion = make_path(config, o.box.center, g);
    return o;
  });
  return world;
}

WorldState generate_world(const ScenarioConfig& config)
{
  return config.kind == ScenarioKind::forest ? generate_forest(config) : generate_corridor(config);
}

// ---------------------------------------------------------------------------
// sensing

Eigen::Matrix<double, Eigen::Dynamic, 3> fibonacci_directions(int n)
{
  Eigen::Matrix<double, Eigen::Dynamic, 3> dirs(n, 3);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i)
  {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double th = golden * i;
    dirs.row(i) << r * std::cos(th), r * std::sin(th), z;
  }
  return dirs;
}

std::optional<double> ray_box(const Vector3& origin, const Vector3& dir, const Box& box)
{
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k)
  {
    const double lo = box.center(k) - box.half(k) - origin(k);
    const double hi = box.center(k) + box.half(k) - origin(k);
    if (dir(k) == 0.0)
    {
      if (lo > 0.0 || hi < 0.0) return std::nullopt;
      continue;
    }
    double t1 = lo / dir(k), t2 = hi / dir(k);
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_far < 0.0) return std::nullopt;
  return std::max(t_near, 0.0);
}

std::optional<double> ray_sphere(const Vector3& origin, const Vector3& dir, const Vector3& center, double radius)
{
  const Vector3 oc = origin - center;
  const double b = oc.dot(dir);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  const double t0 = -b - root, t1 = -b + root;
  if (t1 < 0.0) return std::nullopt;
  return std::max(t0, 0.0);
}

Scan lidar_scan(const WorldState& world, int agent, const Eigen::Matrix<double, Eigen::Dynamic, 3>& rays)
{
  const Vector3 origin = world.agents.at(agent).r;
  const double range = world.config.range;

  std::vector<Box> boxes;
  for (const auto& o : world.obstacles)
  {
    const Box b = o.at(world.time);
    if (point_to_box_distance<double>(origin, b.center, b.half) <= range) boxes.push_back(b);
  }
  std::vector<int> peers;
  for (int j = 0; j < static_cast<int>(world.agents.size()); ++j)
    if (j != agent && (world.agents[j].r - origin).norm() <= range + world.agents[j].radius) peers.push_back(j);

  Scan scan;
  std::vector<Vector3> hits;
  for (Eigen::Index r = 0; r < rays.rows(); ++r)
  {
    const Vector3 dir = rays.row(r).transpose();
    double best = std::numeric_limits<double>::infinity();
    int owner = -2;
    for (const auto& b : boxes)
      if (auto t = ray_box(origin, dir, b); t && *t < best)
      {
        best = *t;
        owner = -1;
      }
    for (int j : peers)
      if (auto t = ray_sphere(origin, dir, world.agents[j].r, world.agents[j].radius); t && *t < best)
      {
        best = *t;
        owner = j;
      }
    if (owner != -2 && best <= range)
    {
      hits.push_back(best * dir);
      scan.hit_agent.push_back(owner);
    }
  }
  scan.points.resize(static_cast<Eigen::Index>(hits.size()), 3);
  for (std::size_t i = 0; i < hits.size(); ++i) scan.points.row(static_cast<Eigen::Index>(i)) = hits[i].transpose();
  return scan;
}

}  // namespace swarmnet
