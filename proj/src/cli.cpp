#include "streamtrack/cli.hpp"

#include "streamtrack/kitti_io.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace streamtrack::cli {

namespace {

constexpr const char* kScenarioSchema = "streamtrack.scenario.v1";

class OutputGuard {
 public:
  ~OutputGuard() {
    if (released_) return;
    for (const auto& path : paths_) {
      std::error_code ec;
      std::filesystem::remove(path, ec);
    }
  }
  void add(const std::filesystem::path& path) { paths_.push_back(path); }
  void release() { released_ = true; }

 private:
  std::vector<std::filesystem::path> paths_;
  bool released_ = false;
};

double to_double(const std::string& value, int line) {
  try {
    std::size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ParseError(line, "expected a number, got '" + value + "'");
  }
}

int to_int(const std::string& value, int line) {
  try {
    std::size_t used = 0;
    const int parsed = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ParseError(line, "expected an integer, got '" + value + "'");
  }
}

std::uint64_t to_uint64(const std::string& value, int line) {
  try {
    std::size_t used = 0;
    const std::uint64_t parsed = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ParseError(line, "expected an unsigned integer, got '" + value + "'");
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open " + path.string());
  return in;
}

double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

struct SweepRow {
  int tau = 0;
  double mota = 0.0;
  double motp = 0.0;
  double fps = 0.0;
};

SweepRow sweep_point(const SimulationSpec& base, int tau, int repeats) {
  SimulationSpec spec = base;
  spec.scenario.tau = tau;
  const Scenario scenario = build_scenario(spec);

  std::vector<Track> tracks;
  double best_ms = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(repeats, 1); ++r) {
    RunStats stats;
    tracks = run_sequence(scenario.input, &stats);
    best_ms = std::min(best_ms, stats.moi_ms + stats.link_ms);
  }
  const MotReport report = evaluate(scenario.gt_tracks, tracks);

  SweepRow row;
  row.tau = tau;
  row.mota = report.mota;
  row.motp = report.motp;
  row.fps = static_cast<double>(scenario.input.frames) / (std::max(best_ms, 1e-6) / 1000.0);
  return row;
}

}  // namespace

SimulationSpec parse_scenario_config(std::istream& in) {
  SimulationSpec spec;
  std::string line;
  int line_no = 0;
  bool saw_schema = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line[0] == '#') continue;
    std::istringstream row(line);
    std::string key;
    if (!(row >> key)) continue;
    std::string value;
    if (!(row >> value)) throw ParseError(line_no, "missing value for key '" + key + "'");
    std::string extra;
    if (row >> extra) throw ParseError(line_no, "trailing tokens after value");

    if (!saw_schema) {
      if (key != "schema" || value != kScenarioSchema) {
        throw ParseError(line_no, "expected 'schema " + std::string(kScenarioSchema) + "'");
      }
      saw_schema = true;
      continue;
    }

    auto& s = spec.scenario;
    if (key == "seq") s.sequence_id = value;
    else if (key == "frames") s.frames = to_int(value, line_no);
    else if (key == "tau") s.tau = to_int(value, line_no);
    else if (key == "objects") s.n_objects = to_int(value, line_no);
    else if (key == "birth_min") s.birth_min = to_int(value, line_no);
    else if (key == "birth_max") s.birth_max = to_int(value, line_no);
    else if (key == "death_min") s.death_min = to_int(value, line_no);
    else if (key == "death_max") s.death_max = to_int(value, line_no);
    else if (key == "speed_min") s.speed_min = to_double(value, line_no);
    else if (key == "speed_max") s.speed_max = to_double(value, line_no);
    else if (key == "yaw_rate_min") s.yaw_rate_min = to_double(value, line_no);
    else if (key == "yaw_rate_max") s.yaw_rate_max = to_double(value, line_no);
    else if (key == "sigma_center") s.sigma_center = to_double(value, line_no);
    else if (key == "sigma_dims") s.sigma_dims = to_double(value, line_no);
    else if (key == "sigma_yaw") s.sigma_yaw = to_double(value, line_no);
    else if (key == "drop_prob") s.drop_prob = to_double(value, line_no);
    else if (key == "fp_rate") s.fp_rate = to_double(value, line_no);
    else if (key == "co_noise") s.co_noise = to_double(value, line_no);
    else if (key == "seed") s.seed = to_uint64(value, line_no);
    else if (key == "ego_mode") spec.ego_mode = value;
    else if (key == "ego_vx") spec.ego_vx = to_double(value, line_no);
    else if (key == "ego_vz") spec.ego_vz = to_double(value, line_no);
    else if (key == "ego_speed") spec.ego_speed = to_double(value, line_no);
    else if (key == "ego_yaw_rate") spec.ego_yaw_rate = to_double(value, line_no);
    else throw ParseError(line_no, "unknown key '" + key + "'");
  }
  if (!saw_schema) throw ParseError(line_no, "missing schema line");
  if (spec.ego_mode != "none" && spec.ego_mode != "straight" && spec.ego_mode != "turning") {
    throw ParseError(line_no, "ego_mode must be none, straight or turning");
  }
  return spec;
}

Scenario build_scenario(const SimulationSpec& spec) {
  Scenario scenario = generate(spec.scenario);
  if (spec.ego_mode == "straight") {
    scenario = apply_ego(scenario, EgoTrajectory::constant_velocity(spec.ego_vx, spec.ego_vz));
  } else if (spec.ego_mode == "turning") {
    scenario = apply_ego(scenario, EgoTrajectory::turning(spec.ego_speed, spec.ego_yaw_rate));
  }
  return scenario;
}

int cmd_simulate(const SimulateOptions& options, std::ostream& log, std::ostream& err) {
  SimulationSpec spec;
  try {
    auto in = open_input(options.config);
    spec = parse_scenario_config(in);
  } catch (const std::exception& e) {
    err << "simulate: " << e.what() << '\n';
    return kExitParse;
  }

  Scenario scenario;
  try {
    scenario = build_scenario(spec);
  } catch (const std::invalid_argument& e) {
    err << "simulate: " << e.what() << '\n';
    return kExitParse;
  }

  OutputGuard guard;
  for (const char* name : {"detections.txt", "gt_labels.txt", "poses.txt", "manifest.txt"}) {
    guard.add(options.out_dir / name);
  }
  try {
    write_scenario_fixture(scenario, spec.scenario, options.out_dir);
  } catch (const std::exception& e) {
    err << "simulate: " << e.what() << '\n';
    return kExitRuntime;
  }
  guard.release();
  log << "wrote fixture to " << options.out_dir.string() << '\n';
  return kExitOk;
}

int cmd_track(const TrackOptions& options, std::ostream& log, std::ostream& err) {
  const auto read_start = std::chrono::steady_clock::now();
  DetectionData data;
  std::map<int, Pose> poses;
  try {
    auto in = open_input(options.detections);
    data = parse_detections(in);
    if (options.poses) {
      auto pose_in = open_input(*options.poses);
      poses = parse_poses(pose_in);
    }
  } catch (const std::exception& e) {
    err << "track: " << e.what() << '\n';
    return kExitParse;
  }
  if (options.tau && *options.tau != data.tau) {
    err << "track: requested tau " << *options.tau << " does not match file header tau "
        << data.tau << '\n';
    return kExitParse;
  }
  const double read_ms = ms_since(read_start);

  SequenceInput input;
  input.frames = data.frames;
  input.tau = data.tau;
  input.detections = data.by_keyframe;
  input.poses = std::move(poses);

  std::vector<Track> tracks;
  RunStats stats;
  try {
    tracks = run_sequence(input, &stats);
  } catch (const std::exception& e) {
    err << "track: " << e.what() << '\n';
    return kExitRuntime;
  }

  const auto write_start = std::chrono::steady_clock::now();
  OutputGuard guard;
  guard.add(options.out);
  try {
    std::ofstream out(options.out);
    if (!out) throw std::runtime_error("cannot write " + options.out.string());
    write_labels(out, tracks, "Car");
    if (!out.good()) throw std::runtime_error("short write to " + options.out.string());
  } catch (const std::exception& e) {
    err << "track: " << e.what() << '\n';
    return kExitRuntime;
  }
  guard.release();
  const double write_ms = ms_since(write_start);

  const double tracking_ms = stats.moi_ms + stats.link_ms;
  char fps[64];
  std::snprintf(fps, sizeof(fps), "%.3f",
                static_cast<double>(input.frames) / (std::max(tracking_ms, 1e-6) / 1000.0));
  log << "read_ms " << read_ms << '\n';
  log << "moi_ms " << stats.moi_ms << '\n';
  log << "link_ms " << stats.link_ms << '\n';
  log << "write_ms " << write_ms << '\n';
  log << "fps " << fps << '\n';
  log << "tracks " << tracks.size() << '\n';
  return kExitOk;
}

int cmd_eval(const EvalOptions& options, std::ostream& log, std::ostream& err) {
  std::vector<Track> gt;
  std::vector<Track> hyp;
  try {
    auto gt_in = open_input(options.gt);
    gt = tracks_from_labels(parse_labels(gt_in), options.category);
    auto hyp_in = open_input(options.hyp);
    hyp = tracks_from_labels(parse_labels(hyp_in), options.category);
  } catch (const std::exception& e) {
    err << "eval: " << e.what() << '\n';
    return kExitParse;
  }

  MotReport report;
  try {
    report = evaluate(gt, hyp, options.config);
  } catch (const std::exception& e) {
    err << "eval: " << e.what() << '\n';
    return kExitRuntime;
  }
  log << report_to_text(report);

  if (options.json_out) {
    OutputGuard guard;
    guard.add(*options.json_out);
    std::ofstream out(*options.json_out);
    if (!out) {
      err << "eval: cannot write " << options.json_out->string() << '\n';
      return kExitRuntime;
    }
    out << report_to_json(report) << '\n';
    if (!out.good()) {
      err << "eval: short write to " << options.json_out->string() << '\n';
      return kExitRuntime;
    }
    guard.release();
  }
  return kExitOk;
}

int cmd_sweep(const SweepOptions& options, std::ostream& log, std::ostream& err) {
  SimulationSpec spec;
  try {
    auto in = open_input(options.config);
    spec = parse_scenario_config(in);
  } catch (const std::exception& e) {
    err << "sweep: " << e.what() << '\n';
    return kExitParse;
  }
  if (options.taus.empty()) {
    err << "sweep: at least one tau is required\n";
    return kExitUsage;
  }

  std::vector<SweepRow> rows(options.taus.size());
  std::vector<std::string> errors(options.taus.size());
  std::atomic<std::size_t> cursor{0};
  const int jobs = std::clamp(options.jobs, 1, static_cast<int>(options.taus.size()));
  auto worker = [&]() {
    while (true) {
      const std::size_t index = cursor.fetch_add(1);
      if (index >= options.taus.size()) break;
      try {
        rows[index] = sweep_point(spec, options.taus[index], options.repeats);
      } catch (const std::exception& e) {
        errors[index] = e.what();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      err << "sweep: tau " << options.taus[i] << ": " << errors[i] << '\n';
      return kExitRuntime;
    }
  }

  OutputGuard guard;
  guard.add(options.out_csv);
  {
    std::ofstream out(options.out_csv);
    if (!out) {
      err << "sweep: cannot write " << options.out_csv.string() << '\n';
      return kExitRuntime;
    }
    out << "tau,mota,motp,fps\n";
    for (const auto& row : rows) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.3f", row.tau, row.mota, row.motp,
                    row.fps);
      out << buf << '\n';
    }
    if (!out.good()) {
      err << "sweep: short write to " << options.out_csv.string() << '\n';
      return kExitRuntime;
    }
  }
  guard.release();
  for (const auto& row : rows) {
    log << "tau " << row.tau << " mota " << row.mota << " motp " << row.motp << " fps "
        << row.fps << '\n';
  }
  return kExitOk;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"keyframe-based 3D streaming detection propagation and tracking"};
  app.require_subcommand(1);

  SimulateOptions simulate_options;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic fixture directory");
  simulate->add_option("-c,--config", simulate_options.config, "scenario config file")
      ->required();
  simulate->add_option("-o,--out", simulate_options.out_dir, "output directory")->required();

  TrackOptions track_options;
  std::string poses_path;
  int tau_flag = 0;
  auto* track = app.add_subcommand("track", "Run the tracker on a detection file");
  track->add_option("-d,--detections", track_options.detections, "detection file")->required();
  auto* poses_opt = track->add_option("-p,--poses", poses_path, "ego pose file");
  auto* tau_opt = track->add_option("-t,--tau", tau_flag, "expected temporal stride");
  track->add_option("-o,--out", track_options.out, "output KITTI label file")->required();

  EvalOptions eval_options;
  std::string json_path;
  auto* eval = app.add_subcommand("eval", "CLEAR MOT evaluation of two label files");
  eval->add_option("-g,--gt", eval_options.gt, "ground-truth label file")->required();
  eval->add_option("-y,--hyp", eval_options.hyp, "hypothesis label file")->required();
  auto* json_opt = eval->add_option("-j,--json", json_path, "also write a JSON report");
  eval->add_option("--category", eval_options.category, "object category");
  eval->add_option("--match-floor", eval_options.config.match_floor, "matching IoU floor");
  eval->add_option("--mt-threshold", eval_options.config.mt_threshold, "mostly-tracked ratio");
  eval->add_option("--ml-threshold", eval_options.config.ml_threshold, "mostly-lost ratio");

  SweepOptions sweep_options;
  auto* sweep = app.add_subcommand("sweep", "Simulate, track and evaluate over a tau list");
  sweep->add_option("-c,--config", sweep_options.config, "base scenario config")->required();
  sweep->add_option("--taus", sweep_options.taus, "temporal strides to sweep")->required();
  sweep->add_option("-o,--out", sweep_options.out_csv, "output CSV")->required();
  sweep->add_option("-j,--jobs", sweep_options.jobs, "parallel worker slots");
  sweep->add_option("--repeats", sweep_options.repeats, "tracker repetitions per tau");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  }

  if (*poses_opt) track_options.poses = poses_path;
  if (*tau_opt) track_options.tau = tau_flag;
  if (*json_opt) eval_options.json_out = json_path;

  if (*simulate) return cmd_simulate(simulate_options, std::cout, std::cerr);
  if (*track) return cmd_track(track_options, std::cout, std::cerr);
  if (*eval) return cmd_eval(eval_options, std::cout, std::cerr);
  if (*sweep) return cmd_sweep(sweep_options, std::cout, std::cerr);
  return kExitUsage;
}

}  // namespace streamtrack::cli
