#pragma once

#include "swarmnet/qp.hpp"
#include "swarmnet/sim.hpp"
#include "swarmnet/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace swarmnet
{

inline constexpr const char* kSamplingExpert = "sampling";

/// One expert demonstration captured at a planning tick.
struct DemoRecord
{
  int mission = 0;
  std::int64_t tick = 0;
  int agent = 0;
  PointCloud pc;            // the agent's own scan, relative to the agent
  PointCloud joined_cloud;  // privileged cloud used for labelling; not serialised
  Vector3 v = Vector3::Zero();
  Vector3 a = Vector3::Zero();
  Eigen::Quaterniond quat = Eigen::Quaterniond::Identity();
  Vector3 goal = Vector3::Zero();  // goal - position
  Eigen::VectorXd q;               // 30 ego-frame control point coordinates over [0, t_f]
  double horizon = 1.0;
  Limits limits;
  bool refit = false;              // expert kept its previous plan; q re-fitted from it
  std::string mission_reason;      // outcome of the mission the record came from
  std::string expert_kind = kSamplingExpert;
};

struct LabeledTrajectory
{
  std::size_t record = 0;
  Eigen::VectorXd q_hat;
  bool safe = false;
  double margin = 0.0;  // +inf for an empty cloud
};

/// Expert missions over the scenarios in turn (mission m uses scenario
/// m mod size, seeded from seed and m), one record per agent plan tick,
/// ordered by (mission, tick, agent). Missions run on up to `workers` threads.
std::vector<DemoRecord> generate_demos(const std::vector<ScenarioConfig>& scenarios, int n_missions,
                                       std::uint64_t seed, int workers = 1);

/// Re-expresses a world-frame trajectory over [now, now + horizon] relative
/// to x0: least-squares fit of the planner spline, then projection onto the
/// initial-state and actuation constraints. Throws std::runtime_error if the
/// projection is infeasible.
Eigen::VectorXd refit_trajectory(const SplineTrajectory& traj, const Vector3& position, const InitialState& x0,
                                 double now, double horizon, const Limits& limits);

/// n_labels random projected trajectories, record j mod size supplying the
/// initial state and the joined cloud, labelled with the diminishing-radius
/// safety profile.
std::vector<LabeledTrajectory> label_random(const std::vector<DemoRecord>& records, int n_labels,
                                            std::uint64_t seed, double d0 = 0.15);

/// ||q - q*||^2 / 30; throws std::invalid_argument on size mismatch.
double loss_q(const Eigen::VectorXd& q, const Eigen::VectorXd& q_star);

/// log(1 + e^x), returning x for x > 30.
double softplus(double x);

/// Sum over safe labels of softplus(g . q_hat) plus sum over unsafe labels
/// of softplus(-g . q_hat).
double loss_g(const Eigen::VectorXd& g, const std::vector<LabeledTrajectory>& labels);

enum class Split
{
  train,
  validation,
  test,
};

inline constexpr std::array<double, 3> kSplitRatios{0.6, 0.3, 0.1};

/// Part sizes by largest remainder, ties to the earlier part.
std::array<std::size_t, 3> split_sizes(std::size_t n);

/// Seeded shuffle of 0..n-1 cut into train / validation / test.
std::vector<Split> split_assignment(std::size_t n, std::uint64_t seed);

nlohmann::json trajectory_to_json(const SplineTrajectory& traj);
SplineTrajectory trajectory_from_json(const nlohmann::json& j);

nlohmann::json demo_to_json(const DemoRecord& r);
nlohmann::json label_to_json(const LabeledTrajectory& l, double horizon);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);

struct DatasetOptions
{
  std::vector<ScenarioConfig> scenarios;
  int missions = 50;
  int labels = 5000;
  std::uint64_t seed = 0;
  int workers = 1;
};

/// Builds demos and labels and writes demos.jsonl, labels.jsonl and
/// manifest.json under dir. Returns the manifest.
nlohmann::json build_dataset(const DatasetOptions& options, const std::filesystem::path& dir);

}  // namespace swarmnet
