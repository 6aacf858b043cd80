// swarmnet command-line entry point: missions, datasets, saliency export.

#include "swarmnet/dataset.hpp"
#include "swarmnet/network.hpp"
#include "swarmnet/parallel.hpp"
#include "swarmnet/saliency.hpp"
#include "swarmnet/sim.hpp"
#include "swarmnet/weights.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace swarmnet;

namespace
{

/// Configuration and usage problems; reported with exit code 2.
struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

int worker_count()
{
  const char* env = std::getenv("SWARMNET_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1 || n > 256) throw UsageError("SWARMNET_WORKERS must be an integer in [1, 256]");
  return static_cast<int>(n);
}

ScenarioConfig read_scenario(const std::string& path)
{
  try
  {
    return load_config(path);
  }
  catch (const std::invalid_argument& e)
  {
    throw UsageError(e.what());
  }
}

WeightStore read_weights(const std::string& path)
{
  try
  {
    WeightStore store = load_weights(path);
    validate_weights(store, NetworkConfig{});
    return store;
  }
  catch (const std::exception& e)
  {
    throw UsageError("weights " + path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text)
{
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string mission_name(int m)
{
  std::ostringstream s;
  s << "mission_" << std::setw(3) << std::setfill('0') << m;
  return s.str();
}

// ---------------------------------------------------------------------------
// run

struct RunArgs
{
  std::string scenario;
  std::string policy = "expert";
  std::string weights;
  int missions = 1;
  std::uint64_t seed = 0;
  std::string out;
  bool saliency = false;
};

struct MissionOutput
{
  std::uint64_t seed = 0;
  MissionMetrics metrics;
  std::string trace;
  std::string messages;
};

nlohmann::json aggregate(const std::vector<MissionOutput>& runs)
{
  int successes = 0;
  std::vector<double> times;
  for (const auto& r : runs)
  {
    if (!r.metrics.success) continue;
    ++successes;
    for (const auto& t : r.metrics.travel_time) times.push_back(*t);
  }
  double mean = 0.0, var = 0.0;
  for (double t : times) mean += t;
  if (!times.empty()) mean /= static_cast<double>(times.size());
  for (double t : times) var += (t - mean) * (t - mean);
  if (!times.empty()) var /= static_cast<double>(times.size());
  const auto or_null = [&](double v) { return times.empty() ? nlohmann::json(nullptr) : nlohmann::json(v); };
  return {
      {"missions", runs.size()},
      {"successes", successes},
      {"success_rate", runs.empty() ? 0.0 : static_cast<double>(successes) / static_cast<double>(runs.size())},
      {"travel_time_samples", times.size()},
      {"travel_time_mean", or_null(mean)},
      {"travel_time_std", or_null(std::sqrt(var))},
  };
}

int cmd_run(const RunArgs& args)
{
  const ScenarioConfig base = read_scenario(args.scenario);
  Policy policy;
  if (args.policy == "expert")
    policy = Policy::expert;
  else if (args.policy == "learned")
    policy = Policy::learned;
  else
    throw UsageError("--policy must be learned or expert");
  if (args.missions < 1) throw UsageError("--missions must be at least 1");

  std::optional<Network> network;
  if (policy == Policy::learned)
  {
    if (args.weights.empty()) throw UsageError("--policy learned needs --weights");
    network.emplace(read_weights(args.weights), NetworkConfig{}, base.point_adjacency_radius);
  }
  if (args.saliency && policy != Policy::learned) throw UsageError("--saliency needs --policy learned");

  const fs::path out = args.out;
  std::vector<MissionOutput> runs(static_cast<std::size_t>(args.missions));
  parallel_for(args.missions, worker_count(), [&](int m) {
    MissionOutput& r = runs[static_cast<std::size_t>(m)];
    ScenarioConfig cfg = base;
    cfg.seed = r.seed = mix_seed(args.seed, static_cast<std::uint64_t>(m), 0);
    std::vector<TraceRow> trace;
    std::ostringstream messages;
    MissionOptions opt;
    opt.trace = &trace;
    if (policy == Policy::learned) opt.message_trace = &messages;
    if (args.saliency) opt.saliency_dir = out / "saliency" / mission_name(m);
    r.metrics = run_mission(cfg, policy, network ? &*network : nullptr, opt);
    std::ostringstream csv;
    write_trace_csv(csv, trace);
    r.trace = csv.str();
    r.messages = messages.str();
  });

  // single writer after collection
  nlohmann::json missions = nlohmann::json::array();
  nlohmann::json timing = nlohmann::json::array();
  double plan_total = 0.0;
  std::size_t plan_count = 0;
  for (int m = 0; m < args.missions; ++m)
  {
    const MissionOutput& r = runs[static_cast<std::size_t>(m)];
    nlohmann::json entry = metrics_to_json(r.metrics);
    entry["index"] = m;
    entry["seed"] = r.seed;
    missions.push_back(entry);
    write_text(out / "traces" / (mission_name(m) + ".csv"), r.trace);
    if (!r.messages.empty()) write_text(out / "traces" / (mission_name(m) + "_messages.csv"), r.messages);

    double sum = 0.0;
    for (double s : r.metrics.plan_seconds) sum += s;
    plan_total += sum;
    plan_count += r.metrics.plan_seconds.size();
    timing.push_back({{"index", m},
                      {"plans", r.metrics.plan_seconds.size()},
                      {"mean_plan_seconds", r.metrics.plan_seconds.empty()
                                                ? nlohmann::json(nullptr)
                                                : nlohmann::json(sum / static_cast<double>(r.metrics.plan_seconds.size()))}});
  }

  const nlohmann::json report = {
      {"config", config_to_json(base)},
      {"policy", args.policy},
      {"seed", args.seed},
      {"missions", missions},
      {"aggregate", aggregate(runs)},
  };
  write_text(out / "report.json", report.dump(2) + '\n');
  const nlohmann::json timing_report = {
      {"note", "wall-clock per-plan compute time; varies between runs and machines"},
      {"mean_plan_seconds", plan_count == 0 ? nlohmann::json(nullptr)
                                            : nlohmann::json(plan_total / static_cast<double>(plan_count))},
      {"missions", timing},
  };
  write_text(out / "timing.json", timing_report.dump(2) + '\n');

  const auto& agg = report["aggregate"];
  std::cout << "missions " << agg["missions"] << ", success rate " << agg["success_rate"] << ", report "
            << (out / "report.json").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// dataset

struct DatasetArgs
{
  std::vector<std::string> scenarios;
  int missions = 50;
  int labels = 5000;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_dataset(const DatasetArgs& args)
{
  DatasetOptions opt;
  for (const auto& s : args.scenarios) opt.scenarios.push_back(read_scenario(s));
  if (args.missions < 0) throw UsageError("--missions must be non-negative");
  if (args.labels < 0) throw UsageError("--labels must be non-negative");
  opt.missions = args.missions;
  opt.labels = args.labels;
  opt.seed = args.seed;
  opt.workers = worker_count();
  const fs::path dir = fs::path(args.out) / "dataset";
  const nlohmann::json manifest = build_dataset(opt, dir);
  std::cout << "demos " << manifest["counts"]["demos"] << ", labels " << manifest["counts"]["labels"] << ", digest "
            << manifest["digest"].get<std::string>() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// saliency

struct SaliencyArgs
{
  std::string weights;
  std::string scan;
  std::string out;
  std::vector<double> goal{0.0, 0.0, 0.0};
  double range = 4.0;
};

int cmd_saliency(const SaliencyArgs& args)
{
  const Network network(read_weights(args.weights));
  PointCloud scan;
  try
  {
    scan = read_scan(fs::path(args.scan));
  }
  catch (const std::exception& e)
  {
    throw UsageError(args.scan + ": " + e.what());
  }
  if (scan.rows() == 0) throw UsageError(args.scan + ": scan has no points");
  const Vector3 goal(args.goal[0], args.goal[1], args.goal[2]);
  const NormalizedInputs in = normalize_inputs(scan, Eigen::Quaterniond::Identity(), Vector3::Zero(),
                                               Vector3::Zero(), goal, args.range, Limits{});
  const auto outputs = network.forward_all({in}, Eigen::MatrixXd::Zero(1, 1));
  const Eigen::VectorXd s = pointbackprop(outputs.front().maps);
  const fs::path out = args.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_saliency(out, scan, s);
  std::cout << scan.rows() << " points, saliency " << out.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// random-init and world

int cmd_random_init(std::uint64_t seed, const std::string& out)
{
  const fs::path path = out;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_weights(random_init(NetworkConfig{}, seed), path);
  std::cout << "weights " << path.string() << '\n';
  return 0;
}

int cmd_world(const std::string& scenario, std::uint64_t seed, bool seed_given, const std::string& out)
{
  ScenarioConfig cfg = read_scenario(scenario);
  if (seed_given) cfg.seed = seed;
  const WorldState world = generate_world(cfg);
  const auto vec = [](const Vector3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); };
  nlohmann::json obstacles = nlohmann::json::array();
  for (const auto& o : world.obstacles)
  {
    nlohmann::json entry = {{"center", vec(o.box.center)}, {"half", vec(o.box.half)}};
    if (o.motion)
      entry["trefoil"] = {{"width", o.motion->width}, {"max_speed", o.motion->max_speed}, {"phase", o.motion->phase}};
    obstacles.push_back(entry);
  }
  nlohmann::json agents = nlohmann::json::array();
  for (const auto& a : world.agents) agents.push_back({{"start", vec(a.start)}, {"goal", vec(a.goal)}});
  const nlohmann::json j = {{"config", config_to_json(cfg)},
                            {"occupied_volume", world.occupiedVolume()},
                            {"obstacles", obstacles},
                            {"agents", agents}};
  if (out.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_text(out, j.dump(2) + '\n');
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Decentralised multi-UAV trajectory toolkit and simulator"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run missions and write report.json and traces/");
  run_cmd->add_option("--scenario", run.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--policy", run.policy, "learned or expert")->check(CLI::IsMember({"learned", "expert"}));
  run_cmd->add_option("--weights", run.weights, "Weight file (learned policy)");
  run_cmd->add_option("--missions", run.missions, "Number of missions")->check(CLI::PositiveNumber);
  run_cmd->add_option("--seed", run.seed, "Base seed");
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_flag("--saliency", run.saliency, "Export per-plan saliency under saliency/");

  DatasetArgs data;
  auto* data_cmd = app.add_subcommand("dataset", "Build demonstrations and labelled trajectories under dataset/");
  data_cmd->add_option("--scenario", data.scenarios, "Scenario JSON file (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  data_cmd->add_option("--missions", data.missions, "Expert missions")->check(CLI::NonNegativeNumber);
  data_cmd->add_option("--labels", data.labels, "Labelled random trajectories")->check(CLI::NonNegativeNumber);
  data_cmd->add_option("--seed", data.seed, "Base seed");
  data_cmd->add_option("--out", data.out, "Output directory")->required();

  SaliencyArgs sal;
  auto* sal_cmd = app.add_subcommand("saliency", "Write `x y z s` saliency for one scan");
  sal_cmd->add_option("--weights", sal.weights, "Weight file")->required()->check(CLI::ExistingFile);
  sal_cmd->add_option("--scan", sal.scan, "Scan file with `x y z` lines")->required()->check(CLI::ExistingFile);
  sal_cmd->add_option("--out", sal.out, "Output file")->required();
  sal_cmd->add_option("--goal", sal.goal, "Goal offset x y z")->expected(3);
  sal_cmd->add_option("--range", sal.range, "Sensing range R")->check(CLI::PositiveNumber);

  std::uint64_t init_seed = 0;
  std::string init_out;
  auto* init_cmd = app.add_subcommand("random-init", "Write seeded random weights");
  init_cmd->add_option("--seed", init_seed, "Seed");
  init_cmd->add_option("--out", init_out, "Output weight file")->required();

  std::string world_scenario, world_out;
  std::uint64_t world_seed = 0;
  auto* world_cmd = app.add_subcommand("world", "Generate a world and print it as JSON");
  world_cmd->add_option("--scenario", world_scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  auto* world_seed_opt = world_cmd->add_option("--seed", world_seed, "Override the scenario seed");
  world_cmd->add_option("--out", world_out, "Output file (default stdout)");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    return app.exit(e);
  }

  try
  {
    if (*run_cmd) return cmd_run(run);
    if (*data_cmd) return cmd_dataset(data);
    if (*sal_cmd) return cmd_saliency(sal);
    if (*init_cmd) return cmd_random_init(init_seed, init_out);
    if (*world_cmd) return cmd_world(world_scenario, world_seed, world_seed_opt->count() > 0, world_out);
  }
  catch (const UsageError& e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  catch (const std::exception& e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
