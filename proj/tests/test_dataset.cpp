#include "swarmnet/dataset.hpp"
#include "swarmnet/safety.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <tuple>

using namespace swarmnet;

namespace
{

ScenarioConfig small_scenario(double timeout = 2.0)
{
  ScenarioConfig c;
  c.n_agents = 2;
  c.timeout = timeout;
  c.lidar_rays = 400;
  c.expert_samples = 16;
  return c;
}

std::filesystem::path scratch_dir(const std::string& name)
{
  const auto dir = std::filesystem::temp_directory_path() / ("swarmnet_dataset_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p)
{
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

/// Dense-sampling oracle: distance to every point above 2 d(s) at each sample.
bool sampled_safe(const SplineTrajectory& traj, const PointCloud& cloud, double d0, int samples = 500)
{
  for (int k = 0; k <= samples; ++k)
  {
    const double s = static_cast<double>(k) / samples;
    const Vector3 p = eval_spline(traj, traj.t0 + s * (traj.tf - traj.t0));
    for (Eigen::Index i = 0; i < cloud.rows(); ++i)
      if ((cloud.row(i).transpose() - p).norm() <= 2.0 * d0 * (1.0 - s)) return false;
  }
  return true;
}

LabeledTrajectory label(const Eigen::VectorXd& q, bool safe)
{
  return LabeledTrajectory{0, q, safe, 0.0};
}

}  // namespace

// ---------------------------------------------------------------------------
// losses

TEST(LossQ, Examples)
{
  const Eigen::VectorXd q = Eigen::VectorXd::LinSpaced(30, -1.0, 2.0);
  EXPECT_EQ(loss_q(q, q), 0.0);
  EXPECT_DOUBLE_EQ(loss_q(q + Eigen::VectorXd::Ones(30), q), 1.0);
  const Eigen::VectorXd d = Eigen::VectorXd::LinSpaced(30, 0.1, 0.7);
  EXPECT_NEAR(loss_q(q + 2.0 * d, q), 4.0 * loss_q(q + d, q), 1e-14);
  EXPECT_THROW(loss_q(q, Eigen::VectorXd::Zero(29)), std::invalid_argument);
}

TEST(Softplus, Examples)
{
  EXPECT_NEAR(softplus(-5.0), 0.006715348489117967, 1e-15);
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_EQ(softplus(40.0), 40.0);
  EXPECT_EQ(softplus(1000.0), 1000.0);
  EXPECT_GT(softplus(-800.0), -1e-300);
  // the guard changes the value by less than 1e-13 relative
  EXPECT_NEAR(softplus(30.0 + 1e-9), std::log1p(std::exp(30.0 + 1e-9)), 1e-13 * 30.0);
}

TEST(LossG, Examples)
{
  EXPECT_EQ(loss_g(Eigen::VectorXd::Ones(30), {}), 0.0);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(30);
  g(4) = 1.0;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(30);
  q(4) = -5.0;
  EXPECT_NEAR(loss_g(g, {label(q, true)}), 0.006715348489117967, 1e-15);
  EXPECT_NEAR(loss_g(g, {label(-q, false)}), 0.006715348489117967, 1e-15);
  EXPECT_NEAR(loss_g(g, {label(Eigen::VectorXd::Zero(30), false)}), std::log(2.0), 1e-15);
  EXPECT_NEAR(loss_g(g, {label(q, true), label(-q, false)}), 2.0 * 0.006715348489117967, 1e-15);
  EXPECT_THROW(loss_g(Eigen::VectorXd::Zero(29), {label(q, true)}), std::invalid_argument);
}

TEST(LossG, DecreasesWithCorrectMargin)
{
  Eigen::VectorXd g = Eigen::VectorXd::Zero(30);
  g(0) = 1.0;
  for (bool safe : {true, false})
  {
    double previous = std::numeric_limits<double>::infinity();
    for (double m = -10.0; m <= 40.0; m += 0.5)
    {
      Eigen::VectorXd q = Eigen::VectorXd::Zero(30);
      q(0) = safe ? -m : m;  // correct side by margin m
      const double value = loss_g(g, {label(q, safe)});
      EXPECT_LT(value, previous);
      previous = value;
    }
  }
}

// ---------------------------------------------------------------------------
// split

TEST(Split, SizesFollowRatios)
{
  EXPECT_EQ(split_sizes(10), (std::array<std::size_t, 3>{6, 3, 1}));
  EXPECT_EQ(split_sizes(7), (std::array<std::size_t, 3>{4, 2, 1}));
  EXPECT_EQ(split_sizes(0), (std::array<std::size_t, 3>{0, 0, 0}));
  for (std::size_t n = 0; n < 300; ++n)
  {
    const auto s = split_sizes(n);
    EXPECT_EQ(s[0] + s[1] + s[2], n);
    for (int k = 0; k < 3; ++k)
      EXPECT_LE(std::abs(static_cast<double>(s[k]) - kSplitRatios[k] * static_cast<double>(n)), 1.0);
  }
}

TEST(Split, SeededAndPartitionExact)
{
  const auto a = split_assignment(101, 7);
  EXPECT_EQ(a, split_assignment(101, 7));
  EXPECT_NE(a, split_assignment(101, 8));
  const auto sizes = split_sizes(101);
  EXPECT_EQ(static_cast<std::size_t>(std::count(a.begin(), a.end(), Split::train)), sizes[0]);
  EXPECT_EQ(static_cast<std::size_t>(std::count(a.begin(), a.end(), Split::validation)), sizes[1]);
  EXPECT_EQ(static_cast<std::size_t>(std::count(a.begin(), a.end(), Split::test)), sizes[2]);
}

// ---------------------------------------------------------------------------
// serialisation

TEST(TrajectoryJson, RoundTrip)
{
  ControlPoints cps(10, 3);
  for (int i = 0; i < 10; ++i) cps.row(i) << i, -0.5 * i, 0.25 * i * i;
  const SplineTrajectory t = make_trajectory(cps, 2.0, 3.5);
  const nlohmann::json j = trajectory_to_json(t);
  EXPECT_EQ(j["degree"], 3);
  EXPECT_EQ(j["cps"].size(), 10u);
  const SplineTrajectory back = trajectory_from_json(j);
  EXPECT_EQ(back.cps, t.cps);
  EXPECT_EQ(back.t0, 2.0);
  EXPECT_EQ(back.tf, 3.5);
  EXPECT_EQ(back.knots.knots, t.knots.knots);

  nlohmann::json bad = j;
  bad["degree"] = 2;
  EXPECT_THROW(trajectory_from_json(bad), std::invalid_argument);
  bad = j;
  bad.erase("tf");
  EXPECT_THROW(trajectory_from_json(bad), std::invalid_argument);
}

TEST(Fnv1a, KnownVectors)
{
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

// ---------------------------------------------------------------------------
// demonstrations

TEST(Refit, MatchesStateAndShape)
{
  const InitialState start{Vector3::Zero(), Vector3(1, 0, 0), Vector3(0, 2, 0)};
  const SplineTrajectory first = sample_random_trajectory(start, Limits{}, 1.0, 5);
  const Vector3 r = Vector3(3, 4, 5);
  const SplineTrajectory world = translated(first, r);
  const double now = 0.4;
  const InitialState x0{Vector3::Zero(), eval_spline(world, now, 1), eval_spline(world, now, 2)};
  const Vector3 position = eval_spline(world, now);
  const Eigen::VectorXd q = refit_trajectory(world, position, x0, now, 1.0, Limits{});
  const SplineTrajectory ego = make_trajectory(unflatten_cps(q), 0.0, 1.0);
  EXPECT_LT(eval_spline(ego, 0.0).norm(), 1e-6);
  EXPECT_LT((eval_spline(ego, 0.0, 1) - x0.velocity).norm(), 1e-6);
  EXPECT_LT((eval_spline(ego, 0.0, 2) - x0.acceleration).norm(), 1e-6);
  // the part of the old plan still ahead is reproduced closely
  EXPECT_LT((eval_spline(ego, 0.3) - (eval_spline(world, now + 0.3) - position)).norm(), 0.05);
}

TEST(Demos, EmptyScenarioListGivesNothing)
{
  EXPECT_TRUE(generate_demos({}, 5, 1).empty());
  EXPECT_TRUE(label_random({}, 10, 1).empty());
}

TEST(Demos, RateTimesDuration)
{
  ScenarioConfig c;
  c.n_agents = 1;
  c.timeout = 10.0;
  c.limits.v_max = Vector3::Constant(0.5);  // 20 m cannot be covered in 10 s
  c.lidar_rays = 200;
  c.expert_samples = 16;
  const auto demos = generate_demos({c}, 1, 3);
  EXPECT_NEAR(static_cast<double>(demos.size()), 150.0, 1.0);
  for (const auto& d : demos) EXPECT_EQ(d.mission_reason, "timeout");
}

TEST(Demos, ContinuityAndOrdering)
{
  const auto demos = generate_demos({small_scenario()}, 2, 11);
  ASSERT_GT(demos.size(), 20u);
  for (std::size_t i = 0; i < demos.size(); ++i)
  {
    const auto& d = demos[i];
    const SplineTrajectory ego = make_trajectory(unflatten_cps(d.q), 0.0, d.horizon);
    EXPECT_LT(eval_spline(ego, 0.0).norm(), 1e-6);
    EXPECT_LT((eval_spline(ego, 0.0, 1) - d.v).norm(), 1e-6);
    EXPECT_LT((eval_spline(ego, 0.0, 2) - d.a).norm(), 1e-6);
    EXPECT_EQ(d.expert_kind, "sampling");
    if (i > 0)
    {
      const auto& p = demos[i - 1];
      EXPECT_TRUE(std::tie(p.mission, p.tick, p.agent) < std::tie(d.mission, d.tick, d.agent));
    }
  }
}

TEST(Demos, WorkerCountDoesNotChangeOutput)
{
  const auto a = generate_demos({small_scenario(1.0)}, 3, 2, 1);
  const auto b = generate_demos({small_scenario(1.0)}, 3, 2, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(demo_to_json(a[i]), demo_to_json(b[i]));
}

// ---------------------------------------------------------------------------
// labels

TEST(Labels, CountRoundRobinAndOracle)
{
  const auto demos = generate_demos({small_scenario(1.0)}, 1, 4);
  ASSERT_FALSE(demos.empty());
  // a synthetic cluttered record so that both labels occur
  std::vector<DemoRecord> records = {demos.front()};
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  records.front().joined_cloud.resize(60, 3);
  for (Eigen::Index i = 0; i < 60; ++i) records.front().joined_cloud.row(i) << u(rng), u(rng), u(rng);
  records.push_back(demos.back());

  const auto labels = label_random(records, 100, 9);
  ASSERT_EQ(labels.size(), 100u);
  int safe = 0, unsafe = 0;
  for (std::size_t j = 0; j < labels.size(); ++j)
  {
    const auto& l = labels[j];
    EXPECT_EQ(l.record, j % records.size());
    const auto& rec = records[l.record];
    const SplineTrajectory traj = make_trajectory(unflatten_cps(l.q_hat), 0.0, rec.horizon);
    EXPECT_EQ(classify_trajectory(traj, rec.joined_cloud, SafetyProfile{0.15}).safe, l.safe);
    if (l.safe)
    {
      EXPECT_TRUE(sampled_safe(traj, rec.joined_cloud, 0.15)) << "label " << j;
      ++safe;
    }
    else
    {
      ++unsafe;
    }
  }
  EXPECT_GT(safe, 0);
  EXPECT_GT(unsafe, 0);
}

TEST(Labels, OpenSpaceIsSafe)
{
  DemoRecord r;
  r.joined_cloud = PointCloud(0, 3);
  const auto labels = label_random({r}, 5, 1);
  for (const auto& l : labels)
  {
    EXPECT_TRUE(l.safe);
    EXPECT_TRUE(std::isinf(l.margin));
    EXPECT_TRUE(label_to_json(l, 1.0)["margin"].is_null());
  }
}

TEST(Labels, OracleConsistentGGivesSmallLoss)
{
  const auto demos = generate_demos({small_scenario(1.0)}, 1, 4);
  std::vector<DemoRecord> records = {demos.front()};
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  records.front().joined_cloud.resize(60, 3);
  for (Eigen::Index i = 0; i < 60; ++i) records.front().joined_cloud.row(i) << u(rng), u(rng), u(rng);
  const auto labels = label_random(records, 40, 2);

  // per term, g along q_hat with g . q_hat = -5 for safe and +5 for unsafe labels
  for (const auto& l : labels)
  {
    const Eigen::VectorXd g = (l.safe ? -5.0 : 5.0) * l.q_hat / l.q_hat.squaredNorm();
    const double s = g.dot(l.q_hat);
    EXPECT_GE(l.safe ? -s : s, 5.0 - 1e-9);
    EXPECT_LT(loss_g(g, {l}), 0.01);
  }
}

// ---------------------------------------------------------------------------
// dataset files

TEST(Dataset, FilesCountsAndDigest)
{
  DatasetOptions opt;
  opt.scenarios = {small_scenario(1.0)};
  opt.missions = 2;
  opt.labels = 100;
  opt.seed = 21;
  const auto dir = scratch_dir("a");
  const nlohmann::json m = build_dataset(opt, dir);

  EXPECT_EQ(count_lines(slurp(dir / "labels.jsonl")), 100u);
  EXPECT_EQ(count_lines(slurp(dir / "demos.jsonl")), m["counts"]["demos"].get<std::size_t>());
  EXPECT_EQ(m["split"]["label_sizes"], nlohmann::json({60, 30, 10}));
  EXPECT_EQ(m["split"]["labels"]["train"].size(), 60u);
  EXPECT_EQ(m["split"]["labels"]["validation"].size(), 30u);
  EXPECT_EQ(m["split"]["labels"]["test"].size(), 10u);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "manifest.json")), m);

  const auto line = slurp(dir / "labels.jsonl").substr(0, slurp(dir / "labels.jsonl").find('\n'));
  const nlohmann::json first = nlohmann::json::parse(line);
  EXPECT_TRUE(first.contains("trajectory"));
  EXPECT_TRUE(first.contains("safe"));
  EXPECT_TRUE(first.contains("margin"));

  const auto again = scratch_dir("b");
  EXPECT_EQ(build_dataset(opt, again)["digest"], m["digest"]);
  EXPECT_EQ(slurp(dir / "manifest.json"), slurp(again / "manifest.json"));
  EXPECT_EQ(slurp(dir / "demos.jsonl"), slurp(again / "demos.jsonl"));

  opt.seed = 22;
  EXPECT_NE(build_dataset(opt, scratch_dir("c"))["digest"], m["digest"]);
}
