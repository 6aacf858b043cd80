#include "swarmnet/dataset.hpp"

#include "swarmnet/parallel.hpp"
#include "swarmnet/safety.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace swarmnet
{

namespace
{

constexpr int kRefitSamples = 60;
constexpr int kLabelAttempts = 8;

nlohmann::json vec3(const Vector3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

nlohmann::json points(const PointCloud& pc)
{
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < pc.rows(); ++i) out.push_back(vec3(pc.row(i).transpose()));
  return out;
}

nlohmann::json ego_trajectory(const Eigen::VectorXd& q, double horizon)
{
  return trajectory_to_json(make_trajectory(unflatten_cps(q), 0.0, horizon));
}

const char* split_name(Split s)
{
  switch (s)
  {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "";
}

std::string hex64(std::uint64_t v)
{
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << v;
  return s.str();
}

nlohmann::json split_json(std::size_t n, std::uint64_t seed)
{
  nlohmann::json parts = {{"train", nlohmann::json::array()},
                          {"validation", nlohmann::json::array()},
                          {"test", nlohmann::json::array()}};
  const auto assignment = split_assignment(n, seed);
  for (std::size_t i = 0; i < n; ++i) parts[split_name(assignment[i])].push_back(i);
  return parts;
}

}  // namespace

Eigen::VectorXd refit_trajectory(const SplineTrajectory& traj, const Vector3& position, const InitialState& x0,
                                 double now, double horizon, const Limits& limits)
{
  const KnotVector knots = build_clamped_knots(0.0, horizon, kPlannerCps);
  Eigen::MatrixXd basis(kRefitSamples, kPlannerCps);
  Eigen::MatrixXd target(kRefitSamples, 3);
  for (int k = 0; k < kPlannerCps; ++k)
  {
    ControlPoints unit = ControlPoints::Zero(kPlannerCps, 3);
    unit(k, 0) = 1.0;
    const SplineTrajectory b{unit, knots, 0.0, horizon};
    for (int s = 0; s < kRefitSamples; ++s) basis(s, k) = eval_spline(b, horizon * s / (kRefitSamples - 1)).x();
  }
  for (int s = 0; s < kRefitSamples; ++s)
    target.row(s) = (eval_spline_clamped(traj, now + horizon * s / (kRefitSamples - 1)) - position).transpose();
  const ControlPoints fit = basis.colPivHouseholderQr().solve(target);

  const QpSolution sol = solve(assemble(flatten_cps(fit), x0, limits, std::nullopt, knots));
  if (sol.status != QpStatus::optimal) throw std::runtime_error("refit_trajectory: projection infeasible");
  return sol.q;
}

std::vector<DemoRecord> generate_demos(const std::vector<ScenarioConfig>& scenarios, int n_missions,
                                       std::uint64_t seed, int workers)
{
  if (n_missions < 0) throw std::invalid_argument("generate_demos: mission count must be non-negative");
  if (scenarios.empty()) return {};

  std::vector<std::vector<DemoRecord>> per_mission(static_cast<std::size_t>(n_missions));
  parallel_for(n_missions, workers, [&](int m) {
    ScenarioConfig cfg = scenarios[static_cast<std::size_t>(m) % scenarios.size()];
    cfg.seed = mix_seed(seed, static_cast<std::uint64_t>(m), cfg.seed);
    auto& out = per_mission[static_cast<std::size_t>(m)];

    MissionOptions opt;
    opt.on_plan = [&](const PlanEvent& e) {
      DemoRecord r;
      r.mission = m;
      r.tick = e.tick;
      r.agent = e.agent;
      r.pc = e.scan;
      r.joined_cloud = e.joined_cloud;
      r.v = e.state.velocity;
      r.a = e.state.acceleration;
      r.goal = e.goal - e.position;
      r.horizon = cfg.horizon;
      r.limits = cfg.limits;
      if (e.replaced)
      {
        ControlPoints ego = e.committed.cps;
        ego.rowwise() -= e.position.transpose();
        r.q = flatten_cps(ego);
      }
      else
      {
        const double now = static_cast<double>(e.tick) / cfg.comm_rate;
        r.q = refit_trajectory(e.committed, e.position, e.state, now, cfg.horizon, cfg.limits);
        r.refit = true;
      }
      out.push_back(std::move(r));
    };
    const MissionMetrics metrics = run_mission(cfg, Policy::expert, nullptr, opt);
    for (auto& r : out) r.mission_reason = metrics.reason;
  });

  std::vector<DemoRecord> records;
  for (auto& mission : per_mission)
    for (auto& r : mission) records.push_back(std::move(r));
  return records;
}

std::vector<LabeledTrajectory> label_random(const std::vector<DemoRecord>& records, int n_labels,
                                            std::uint64_t seed, double d0)
{
  if (n_labels < 0) throw std::invalid_argument("label_random: label count must be non-negative");
  std::vector<LabeledTrajectory> labels;
  if (records.empty()) return labels;
  const SafetyProfile profile{d0};
  for (int j = 0; j < n_labels; ++j)
  {
    const std::size_t index = static_cast<std::size_t>(j) % records.size();
    const DemoRecord& rec = records[index];
    const InitialState x0{Vector3::Zero(), rec.v, rec.a};
    std::optional<SplineTrajectory> traj;
    for (int attempt = 0; attempt < kLabelAttempts && !traj; ++attempt)
    {
      try
      {
        traj = sample_random_trajectory(x0, rec.limits, rec.horizon,
                                        mix_seed(seed, static_cast<std::uint64_t>(j), attempt));
      }
      catch (const std::runtime_error&)
      {
        // retry with the next stream
      }
    }
    if (!traj) throw std::runtime_error("label_random: no feasible sample for record " + std::to_string(index));
    const SafetyVerdict verdict = classify_trajectory(*traj, rec.joined_cloud, profile);
    labels.push_back(LabeledTrajectory{index, flatten_cps(traj->cps), verdict.safe, verdict.margin});
  }
  return labels;
}

double loss_q(const Eigen::VectorXd& q, const Eigen::VectorXd& q_star)
{
  if (q.size() != q_star.size() || q.size() != 3 * kPlannerCps)
    throw std::invalid_argument("loss_q: expected two vectors of length 30");
  return (q - q_star).squaredNorm() / static_cast<double>(q.size());
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double loss_g(const Eigen::VectorXd& g, const std::vector<LabeledTrajectory>& labels)
{
  double total = 0.0;
  for (const auto& l : labels)
  {
    if (l.q_hat.size() != g.size()) throw std::invalid_argument("loss_g: g and q_hat differ in length");
    const double s = g.dot(l.q_hat);
    total += softplus(l.safe ? s : -s);
  }
  return total;
}

std::array<std::size_t, 3> split_sizes(std::size_t n)
{
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k)
  {
    const double exact = kSplitRatios[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[k] = exact - static_cast<double>(sizes[k]);
    assigned += sizes[k];
  }
  while (assigned < n)
  {
    int best = 0;
    for (int k = 1; k < 3; ++k)
      if (remainder[k] > remainder[best] + 1e-12) best = k;
    ++sizes[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  return sizes;
}

std::vector<Split> split_assignment(std::size_t n, std::uint64_t seed)
{
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto sizes = split_sizes(n);
  std::vector<Split> out(n);
  for (std::size_t p = 0; p < n; ++p)
    out[order[p]] = p < sizes[0] ? Split::train : p < sizes[0] + sizes[1] ? Split::validation : Split::test;
  return out;
}

nlohmann::json trajectory_to_json(const SplineTrajectory& traj)
{
  nlohmann::json cps = nlohmann::json::array();
  for (Eigen::Index i = 0; i < traj.cps.rows(); ++i) cps.push_back(vec3(traj.cps.row(i).transpose()));
  return {{"t0", traj.t0}, {"tf", traj.tf}, {"degree", traj.knots.degree}, {"cps", cps}};
}

SplineTrajectory trajectory_from_json(const nlohmann::json& j)
{
  try
  {
    const double t0 = j.at("t0").get<double>();
    const double tf = j.at("tf").get<double>();
    if (j.at("degree").get<int>() != kSplineDegree) throw std::invalid_argument("trajectory: degree must be 3");
    const auto& rows = j.at("cps");
    ControlPoints cps(static_cast<Eigen::Index>(rows.size()), 3);
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
      if (rows[i].size() != 3) throw std::invalid_argument("trajectory: control points need three coordinates");
      for (int a = 0; a < 3; ++a) cps(static_cast<Eigen::Index>(i), a) = rows[i][a].get<double>();
    }
    return make_trajectory(cps, t0, tf);
  }
  catch (const nlohmann::json::exception& e)
  {
    throw std::invalid_argument(std::string("trajectory: ") + e.what());
  }
}

nlohmann::json demo_to_json(const DemoRecord& r)
{
  return {
      {"mission", r.mission},
      {"tick", r.tick},
      {"agent", r.agent},
      {"expert_kind", r.expert_kind},
      {"mission_reason", r.mission_reason},
      {"refit", r.refit},
      {"pc", points(r.pc)},
      {"v", vec3(r.v)},
      {"a", vec3(r.a)},
      {"quat", {r.quat.w(), r.quat.x(), r.quat.y(), r.quat.z()}},
      {"goal", vec3(r.goal)},
      {"trajectory", ego_trajectory(r.q, r.horizon)},
  };
}

nlohmann::json label_to_json(const LabeledTrajectory& l, double horizon)
{
  return {
      {"record", l.record},
      {"trajectory", ego_trajectory(l.q_hat, horizon)},
      {"safe", l.safe},
      {"margin", std::isfinite(l.margin) ? nlohmann::json(l.margin) : nlohmann::json(nullptr)},
  };
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash)
{
  for (unsigned char c : bytes)
  {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

nlohmann::json build_dataset(const DatasetOptions& options, const std::filesystem::path& dir)
{
  if (options.missions < 0) throw std::invalid_argument("dataset: missions must be non-negative");
  if (options.labels < 0) throw std::invalid_argument("dataset: labels must be non-negative");
  for (const auto& s : options.scenarios) validate_config(s);

  const auto demos = generate_demos(options.scenarios, options.missions, options.seed, options.workers);
  const auto labels = label_random(demos, options.labels, mix_seed(options.seed, 0x1abe1, 0));

  std::filesystem::create_directories(dir);
  std::string demo_text, label_text;
  for (const auto& d : demos) demo_text += demo_to_json(d).dump() + '\n';
  for (const auto& l : labels) label_text += label_to_json(l, demos[l.record].horizon).dump() + '\n';
  std::ofstream(dir / "demos.jsonl", std::ios::binary) << demo_text;
  std::ofstream(dir / "labels.jsonl", std::ios::binary) << label_text;

  std::size_t safe = 0, refit = 0;
  for (const auto& l : labels) safe += l.safe;
  for (const auto& d : demos) refit += d.refit;
  nlohmann::json missions = nlohmann::json::array();
  for (const auto& d : demos)
    if (missions.empty() || missions.back()["mission"] != d.mission)
      missions.push_back({{"mission", d.mission}, {"reason", d.mission_reason}});

  nlohmann::json scenarios = nlohmann::json::array();
  for (const auto& s : options.scenarios) scenarios.push_back(config_to_json(s));
  const std::uint64_t split_seed = mix_seed(options.seed, 0x5b1177, 0);
  const auto demo_sizes = split_sizes(demos.size());
  const auto label_sizes = split_sizes(labels.size());

  nlohmann::json manifest = {
      {"expert_kind", kSamplingExpert},
      {"seed", options.seed},
      {"scenarios", scenarios},
      {"missions", options.missions},
      {"mission_outcomes", missions},
      {"counts",
       {{"demos", demos.size()},
        {"refit_demos", refit},
        {"labels", labels.size()},
        {"safe_labels", safe},
        {"unsafe_labels", labels.size() - safe}}},
      {"split",
       {{"ratios", kSplitRatios},
        {"seed", split_seed},
        {"demo_sizes", demo_sizes},
        {"label_sizes", label_sizes},
        {"demos", split_json(demos.size(), split_seed)},
        {"labels", split_json(labels.size(), mix_seed(split_seed, 1, 0))}}},
      {"files",
       {{"demos.jsonl", hex64(fnv1a(demo_text))},
        {"labels.jsonl", hex64(fnv1a(label_text))}}},
  };
  manifest["digest"] = hex64(fnv1a(manifest.dump()));
  std::ofstream(dir / "manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
  return manifest;
}

}  // namespace swarmnet
