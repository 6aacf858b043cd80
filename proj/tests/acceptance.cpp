// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "swarmnet/comms.hpp"
#include "swarmnet/dataset.hpp"
#include "swarmnet/minvo.hpp"
#include "swarmnet/network.hpp"
#include "swarmnet/qp.hpp"
#include "swarmnet/safety.hpp"
#include "swarmnet/saliency.hpp"
#include "swarmnet/sim.hpp"
#include "swarmnet/weights.hpp"

#include "nn_oracle.hpp"
#include "qp_oracle.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace swarmnet;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace
{

struct Outcome
{
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0)
{
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

PointCloud random_cloud(std::mt19937_64& rng, int m, double scale)
{
  return test::random_matrix(rng, m, 3, scale);
}

// 1. MINVO segments reproduce the B-spline and contain it.
Outcome basis_equivalence()
{
  std::mt19937_64 rng(101);
  double worst = 0.0, min_bary = 1.0;
  const auto start = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 1000; ++trial)
  {
    const SplineTrajectory traj = test::random_trajectory(rng);
    const MinvoSegments segs = bspline_to_minvo(traj);
    for (std::size_t s = 0; s < segs.simplices.size(); ++s)
    {
      const auto [ta, tb] = segs.intervals[s];
      for (int i = 0; i < 200; ++i)
      {
        const double u = i / 199.0;
        const Vector3 ref = test::de_boor(traj, std::min(tb, ta + u * (tb - ta)));
        const Vector3 mv = eval_minvo(segs.simplices[s], u);
        worst = std::max(worst, (mv - ref).norm() / std::max(1.0, ref.norm()));
        min_bary = std::min(min_bary, test::barycentric(ref, segs.simplices[s]).minCoeff());
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst <= 1e-9 && min_bary >= -1e-9 && secs < 30.0,
          fmt("1000 trajectories, max rel err %.2e, min barycentric %.2e, %.2f s", worst, min_bary, secs)};
}

// 2. Projected trajectories respect the per-axis limits when densely sampled.
Outcome dynamic_feasibility()
{
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> span(0.5, 2.0);
  const Limits lim;
  double excess = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 1000; ++trial)
  {
    const SplineTrajectory traj = sample_random_trajectory(test::random_state(rng, lim), lim, span(rng), rng());
    for (int i = 0; i < 500; ++i)
    {
      const double t = std::min(traj.tf, traj.t0 + (traj.tf - traj.t0) * i / 499.0);
      const Vector3 v = eval_spline(traj, t, 1).cwiseAbs();
      const Vector3 a = eval_spline(traj, t, 2).cwiseAbs();
      excess = std::max(excess, (v - lim.v_max).maxCoeff());
      excess = std::max(excess, (a - lim.a_max).maxCoeff());
    }
  }
  return {excess <= 1e-6, fmt("1000 trajectories x 500 samples, max |v|,|a| excess over limit %.3e", excess)};
}

// 3. The solver's optimum matches an independent KKT solve; feasible targets are fixed points.
Outcome qp_optimality()
{
  const KnotVector knots = build_clamped_knots(0.0, 1.0, kPlannerCps);
  std::mt19937_64 rng(103);
  std::normal_distribution<double> n01;
  double worst_rel = 0.0, worst_fixed = 0.0, worst_violation = 0.0, min_mult = 0.0;
  int optimal = 0;
  for (int trial = 0; trial < 100; ++trial)
  {
    const VectorXd q_star = flatten_cps(test::random_cps(rng, kPlannerCps, 4.0));
    const InitialState x0 = test::random_state(rng, Limits{});
    std::optional<CollisionConstraint> g;
    if (trial % 2 == 0)
    {
      VectorXd gv(30);
      for (int i = 0; i < 30; ++i) gv(i) = n01(rng);
      gv.head(9).setZero();
      g = CollisionConstraint{gv};
    }
    const QpProblem prob = assemble(q_star, x0, Limits{}, g, knots);
    const QpSolution sol = solve(prob);
    if (sol.status != QpStatus::optimal) continue;
    ++optimal;
    const test::KktCheck ref = test::kkt_on_active_set(prob, sol);
    worst_rel = std::max(worst_rel, std::abs(sol.objective - ref.objective) / std::max(1.0, ref.objective));
    worst_violation = std::max(worst_violation, ref.max_violation);
    min_mult = std::min(min_mult, ref.min_ineq_multiplier);

    const QpSolution again = solve(assemble(sol.q, x0, Limits{}, g, knots));
    worst_fixed = std::max(worst_fixed, again.status == QpStatus::optimal ? again.objective : 1.0);
  }
  return {optimal == 100 && worst_rel <= 1e-6 && worst_violation <= 1e-6 && min_mult >= -1e-8 && worst_fixed <= 1e-10,
          fmt("%.0f/100 optimal, objective rel err %.2e, feasible-target objective %.2e, min multiplier %.1e", optimal,
              worst_rel, worst_fixed, min_mult)};
}

// 4. No trajectory classified safe comes within 2 d(s) of a point on dense sampling.
Outcome classifier_soundness()
{
  std::mt19937_64 rng(104);
  const SafetyProfile profile{0.15};
  int safe = 0, false_safe = 0;
  for (int trial = 0; trial < 500; ++trial)
  {
    const SplineTrajectory traj = sample_random_trajectory(test::random_state(rng, Limits{}), Limits{}, 1.0, rng());
    // clouds scattered around the curve at a spread that varies per trial
    std::normal_distribution<double> noise(0.0, 0.3 + 0.9 * (trial % 4));
    PointCloud cloud(25, 3);
    for (Eigen::Index i = 0; i < cloud.rows(); ++i)
    {
      const double t = traj.t0 + (traj.tf - traj.t0) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      const Vector3 p = test::de_boor(traj, t) + Vector3(noise(rng), noise(rng), noise(rng));
      cloud.row(i) = p.transpose();
    }
    if (!classify_trajectory(traj, cloud, profile).safe) continue;
    ++safe;
    bool clear = true;
    for (int k = 0; k < 500 && clear; ++k)
    {
      const double s = k / 499.0;
      const Vector3 p = test::de_boor(traj, std::min(traj.tf, traj.t0 + s * (traj.tf - traj.t0)));
      for (Eigen::Index i = 0; i < cloud.rows(); ++i)
        if ((cloud.row(i).transpose() - p).norm() <= 2.0 * 0.15 * (1.0 - s)) clear = false;
    }
    if (!clear) ++false_safe;
  }
  return {false_safe == 0 && safe >= 50 && safe <= 450,
          fmt("500 pairs, %.0f classified safe, %.0f false-safe against the dense oracle", safe, false_safe)};
}

// 5. Message passing reproduces the dense graph filter; 25 scalars per agent per round.
Outcome distributed_equivalence()
{
  std::mt19937_64 rng(105);
  double worst_layer = 0.0;
  for (int trial = 0; trial < 40; ++trial)
  {
    const int n = 2 + trial % 7;
    const int taps = 1 + trial % 3;
    const auto layer = test::random_gnn_layer(rng, 10, 6, 5, taps, trial % 2 == 0);
    const MatrixXd x = test::random_matrix(rng, n, 10);
    const MatrixXd a = test::random_graph(rng, n, 0.5);
    std::vector<MatrixXd> sent(n);
    std::vector<nn::NodeStep<double>> steps(n);
    for (int round = 0; round <= taps; ++round)
    {
      for (int i = 0; i < n; ++i)
      {
        std::vector<MatrixXd> inbox;
        for (int j = 0; j < n; ++j)
          if (a(i, j) != 0.0 && sent[j].size() > 0) inbox.push_back(sent[j]);
        steps[i] = nn::gnn_ed_node<double>(x.row(i), inbox, layer);
      }
      for (int i = 0; i < n; ++i) sent[i] = steps[i].taps;
    }
    const auto oracle = test::gnn_oracle(test::to_grid(x), test::to_grid(a), layer);
    for (int i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < steps[i].output.size(); ++j)
        worst_layer = std::max(worst_layer, std::abs(steps[i].output(j) - oracle[i][j]));
  }

  // whole network over the unit-delay bus with static inputs
  const Network net(random_init(NetworkConfig{}, 105));
  const int L = net.numLayers(), K = net.config().taps, G = net.config().compressed_width;
  double worst_net = 0.0;
  bool accounting = true;
  for (int trial = 0; trial < 6; ++trial)
  {
    const int n = 3 + trial;
    std::vector<NormalizedInputs> in;
    std::vector<AgentEncoding> enc;
    for (int i = 0; i < n; ++i)
    {
      in.push_back(normalize_inputs(random_cloud(rng, 20, 2.0), Eigen::Quaterniond::Identity(), Vector3(0.5, 0, 0),
                                    Vector3::Zero(), Vector3(3, 1, 0), 4.0, Limits{}));
      enc.push_back(net.encode(in.back()));
    }
    CommGraph graph{test::random_graph(rng, n, 0.5), 4.0};
    MessageBus bus(n, L, K, G);
    std::vector<BranchOutputs> out(n);
    for (std::int64_t tick = 0; tick < 3 * L * (K + 1); ++tick)
    {
      for (int i = 0; i < n; ++i)
      {
        const NodeOutputs node = net.forward_node(enc[i], bus.gather(i, graph, tick));
        int scalars = 0;
        for (const auto& p : node.payloads) scalars += static_cast<int>(p.size());
        accounting = accounting && scalars == 25;
        bus.publish(i, node.payloads);
        out[i] = node.outputs;
      }
      const std::uint64_t before = bus.delivered();
      bus.deliver(graph, tick);
      const auto directed = static_cast<std::uint64_t>(2 * graph.numEdges());
      accounting = accounting && (bus.delivered() - before) * static_cast<std::uint64_t>(G) == directed * 25u;
    }
    const auto dense = net.forward_all(in, graph.adjacency);
    for (int i = 0; i < n; ++i)
    {
      worst_net = std::max(worst_net, (out[i].q_star - dense[i].q_star).cwiseAbs().maxCoeff());
      worst_net = std::max(worst_net, (out[i].g - dense[i].g).cwiseAbs().maxCoeff());
    }
  }
  accounting = accounting && MessageBus(2, L, K, G).scalarsPerRound() == 25;
  return {worst_layer <= 1e-6 && worst_net <= 1e-6 && accounting,
          fmt("layer max diff %.2e, network over bus max diff %.2e, 25 scalars per agent per round: ", worst_layer,
              worst_net) +
              (accounting ? "yes" : "no")};
}

// 6. Attention rows are stochastic over neighbours, zero when isolated.
Outcome attention_normalization()
{
  std::mt19937_64 rng(106);
  double worst = 0.0;
  int isolated = 0;
  bool isolated_zero = true;
  for (int trial = 0; trial < 100; ++trial)
  {
    const int n = 2 + trial % 7;
    MatrixXd a = test::random_graph(rng, n, 0.5);
    a.row(0).setZero();
    a.col(0).setZero();
    const MatrixXd e = nn::attention<double>(test::random_matrix(rng, n, 5, 3.0), a, test::random_matrix(rng, 5, 5));
    for (int i = 0; i < n; ++i)
    {
      if (a.row(i).sum() == 0.0)
      {
        ++isolated;
        isolated_zero = isolated_zero && e.row(i).cwiseAbs().sum() == 0.0;
      }
      else
        worst = std::max(worst, std::abs(e.row(i).sum() - 1.0));
    }
  }
  return {worst <= 1e-6 && isolated_zero && isolated >= 100,
          fmt("100 instances, max |row sum - 1| %.2e, %.0f isolated rows all zero", worst, isolated)};
}

// 7. Point order does not change the pooled descriptor or q*.
Outcome permutation_invariance()
{
  std::mt19937_64 rng(107);
  const Network net(random_init(NetworkConfig{}, 107));
  const PointCloud cloud = random_cloud(rng, 40, 3.0);
  const auto make = [&](const PointCloud& c) {
    return normalize_inputs(c, Eigen::Quaterniond::Identity(), Vector3(1, 0, 0), Vector3(0, 2, 0), Vector3(5, 0, 1),
                            4.0, Limits{});
  };
  const NormalizedInputs base = make(cloud);
  const Eigen::RowVectorXd pooled = net.encode(base).collision_input;
  const VectorXd q = net.forward_all({base}, MatrixXd::Zero(1, 1)).front().q_star;
  std::vector<int> order(40);
  std::iota(order.begin(), order.end(), 0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial)
  {
    std::shuffle(order.begin(), order.end(), rng);
    PointCloud shuffled(40, 3);
    for (int i = 0; i < 40; ++i) shuffled.row(i) = cloud.row(order[i]);
    const NormalizedInputs p = make(shuffled);
    worst = std::max(worst, (net.encode(p).collision_input - pooled).cwiseAbs().maxCoeff());
    worst = std::max(worst, (net.forward_all({p}, MatrixXd::Zero(1, 1)).front().q_star - q).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-6, fmt("50 permutations, max change in pooled descriptor or q* %.2e", worst)};
}

// 8. Saliency lies in [0, 1] and reproduces the hand example.
Outcome saliency_range()
{
  std::mt19937_64 rng(108);
  const Network net(random_init(NetworkConfig{}, 108));
  double lo = 1.0, hi = 0.0;
  for (int trial = 0; trial < 20; ++trial)
  {
    const NormalizedInputs in = normalize_inputs(random_cloud(rng, 10 + trial, 3.0), Eigen::Quaterniond::Identity(),
                                                 Vector3::Zero(), Vector3::Zero(), Vector3(2, 0, 0), 4.0, Limits{});
    const VectorXd s = pointbackprop(net.forward_all({in}, MatrixXd::Zero(1, 1)).front().maps);
    lo = std::min(lo, s.minCoeff());
    hi = std::max(hi, s.maxCoeff());
  }
  const VectorXd hand = pointbackprop({Eigen::Vector3d(1, 0, 1), Eigen::Vector3d(2, 4, 6)});
  const bool exact = hand(0) == 1.0 / 3.0 && hand(1) == 0.0 && hand(2) == 1.0;
  return {lo >= 0.0 && hi <= 1.0 && exact,
          fmt("20 clouds, saliency range [%.3f, %.3f], hand example (%.17g, %g", lo, hi, hand(0), hand(1)) +
              fmt(", %g)", hand(2))};
}

ScenarioConfig two_antipodal()
{
  ScenarioConfig c;
  c.n_agents = 2;
  c.density = 0.0;
  c.seed = 7;
  return c;
}

// 9. Two antipodal expert agents swap positions cleanly.
Outcome expert_mission()
{
  const auto start = std::chrono::steady_clock::now();
  const MissionMetrics m = run_mission(two_antipodal(), Policy::expert, nullptr);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {m.success && m.min_agent_distance > 0.3 && m.max_commit_jump <= 1e-5 && secs < 60.0,
          "reason " + m.reason +
              fmt(", min agent distance %.3f m, max commit jump %.2e, %.2f s", m.min_agent_distance,
                  m.max_commit_jump, secs)};
}

// 10. Learned planning only reads messages from earlier ticks.
Outcome message_delay()
{
  ScenarioConfig c;
  c.n_agents = 3;
  c.seed = 5;
  c.range = 20.0;
  c.timeout = 1.0;
  c.lidar_rays = 300;
  const Network net(random_init(NetworkConfig{}, 110));
  std::vector<MessageBus::Consumption> consumed;
  std::set<std::pair<std::int64_t, int>> plans;
  MissionOptions opt;
  opt.consumed = &consumed;
  opt.on_plan = [&](const PlanEvent& e) { plans.insert({e.tick, e.agent}); };
  const MissionMetrics m = run_mission(c, Policy::learned, &net, opt);
  int stale_ok = 0, at_plan = 0;
  for (const auto& k : consumed)
  {
    if (k.stamp <= k.tick - 1) ++stale_ok;
    if (plans.count({k.tick, k.receiver})) ++at_plan;
  }
  const auto n = static_cast<int>(consumed.size());
  return {n > 0 && stale_ok == n && at_plan == n,
          fmt("%.0f plans, %.0f consumptions, %.0f stamped <= tick - 1, %.0f at plan ticks", m.plans, n, stale_ok,
              at_plan)};
}

std::string slurp(const std::filesystem::path& p)
{
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 11. Dataset builds are reproducible, split 0.6/0.3/0.1, and an oracle-consistent g scores low.
Outcome dataset_reproducibility()
{
  ScenarioConfig sc;
  sc.n_agents = 2;
  sc.density = 0.05;
  sc.timeout = 1.0;
  sc.lidar_rays = 400;
  sc.expert_samples = 16;
  DatasetOptions opt;
  opt.scenarios = {sc};
  opt.missions = 2;
  opt.labels = 200;
  opt.seed = 111;
  const auto root = std::filesystem::temp_directory_path() / "swarmnet_acceptance";
  std::filesystem::remove_all(root);
  const nlohmann::json m = build_dataset(opt, root / "a");
  build_dataset(opt, root / "b");
  const bool identical = slurp(root / "a" / "manifest.json") == slurp(root / "b" / "manifest.json");

  bool split_ok = true;
  for (const char* part : {"demos", "labels"})
  {
    const auto n = m["counts"][part].get<std::size_t>();
    std::vector<std::size_t> seen;
    const char* names[] = {"train", "validation", "test"};
    for (int s = 0; s < 3; ++s)
    {
      const auto& idx = m["split"][part][names[s]];
      split_ok = split_ok && std::abs(static_cast<double>(idx.size()) - kSplitRatios[s] * static_cast<double>(n)) <= 1.0;
      for (const auto& i : idx) seen.push_back(i.get<std::size_t>());
    }
    std::sort(seen.begin(), seen.end());
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    split_ok = split_ok && seen == all;
  }

  const auto labels = label_random(generate_demos({sc}, 1, 111), 100, 112);
  double worst = 0.0;
  int safe = 0;
  for (const auto& l : labels)
  {
    const VectorXd g = (l.safe ? -5.0 : 5.0) * l.q_hat / l.q_hat.squaredNorm();
    worst = std::max(worst, loss_g(g, {l}));
    safe += l.safe ? 1 : 0;
  }
  std::filesystem::remove_all(root);
  return {identical && split_ok && worst < 0.01,
          std::string("manifests identical: ") + (identical ? "yes" : "no") + ", split partitions 0.6/0.3/0.1: " +
              (split_ok ? "yes" : "no") +
              fmt(", %.0f labels (%.0f safe), max per-term loss %.4f", static_cast<double>(labels.size()), safe, worst)};
}

}  // namespace

int main()
{
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"basis equivalence", basis_equivalence},
      {"dynamic feasibility", dynamic_feasibility},
      {"qp optimality", qp_optimality},
      {"classifier soundness", classifier_soundness},
      {"distributed equivalence", distributed_equivalence},
      {"attention normalization", attention_normalization},
      {"permutation invariance", permutation_invariance},
      {"saliency range", saliency_range},
      {"expert mission", expert_mission},
      {"message delay", message_delay},
      {"dataset reproducibility", dataset_reproducibility},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i)
  {
    const auto start = std::chrono::steady_clock::now();
    Outcome o{false, ""};
    try
    {
      o = criteria[i].second();
    }
    catch (const std::exception& e)
    {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += o.pass ? 0 : 1;
    std::printf("%s %2zu %-24s %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
