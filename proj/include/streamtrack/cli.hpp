#pragma once

#include "streamtrack/metrics.hpp"
#include "streamtrack/simulator.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace streamtrack::cli {

// Exit codes: 0 success, 1 usage, 2 input/parse failure, 3 runtime failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitRuntime = 3;

/// A scenario config file plus the optional ego trajectory it requests.
struct SimulationSpec {
  ScenarioConfig scenario;
  std::string ego_mode = "none";  // none | straight | turning
  double ego_vx = 0.0;            // straight: meters per frame
  double ego_vz = 0.0;
  double ego_speed = 0.0;  // turning: meters per frame
  double ego_yaw_rate = 0.0;
};

/// Flat key-value config with a leading schema line; unknown keys are errors.
SimulationSpec parse_scenario_config(std::istream& in);

Scenario build_scenario(const SimulationSpec& spec);

struct SimulateOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir;
};

struct TrackOptions {
  std::filesystem::path detections;
  std::optional<std::filesystem::path> poses;
  std::optional<int> tau;  // must agree with the file header when given
  std::filesystem::path out;
};

struct EvalOptions {
  std::filesystem::path gt;
  std::filesystem::path hyp;
  std::optional<std::filesystem::path> json_out;
  std::string category = "Car";
  EvalConfig config;
};

struct SweepOptions {
  std::filesystem::path config;
  std::vector<int> taus;
  std::filesystem::path out_csv;
  int jobs = 1;
  int repeats = 5;  // tracker repetitions per tau; best time wins
};

int cmd_simulate(const SimulateOptions& options, std::ostream& log, std::ostream& err);
int cmd_track(const TrackOptions& options, std::ostream& log, std::ostream& err);
int cmd_eval(const EvalOptions& options, std::ostream& log, std::ostream& err);
int cmd_sweep(const SweepOptions& options, std::ostream& log, std::ostream& err);

/// Full argv entry point used by the streamtrack binary.
int run(int argc, const char* const* argv);

}  // namespace streamtrack::cli
