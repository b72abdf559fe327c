#pragma once

#include "streamtrack/geometry.hpp"
#include "streamtrack/tracker.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace streamtrack {

/// Synthetic-scene knobs. Objects follow piecewise-constant-velocity
/// trajectories; detector behavior is mimicked with Gaussian box noise,
/// keyframe drop-outs and uniform false positives.
struct ScenarioConfig {
  int frames = 60;
  int tau = 3;
  int n_objects = 10;
  int birth_min = 0;
  int birth_max = 0;
  int death_min = -1;  // negative means "last frame"
  int death_max = -1;
  double speed_min = 0.2;   // meters per frame
  double speed_max = 0.6;
  double yaw_rate_min = 0.0;  // radians per frame
  double yaw_rate_max = 0.0;
  double sigma_center = 0.0;  // meters
  double sigma_dims = 0.0;    // meters
  double sigma_yaw = 0.0;     // radians
  double drop_prob = 0.0;
  double fp_rate = 0.0;  // expected false positives per keyframe
  double co_noise = 0.0;
  std::uint64_t seed = 0;
  std::string sequence_id = "0000";
};

/// Parametric ego trajectory; pose(f) is the ego-to-world transform of
/// frame f, defined for every frame of the scenario.
struct EgoTrajectory {
  std::function<Pose(int)> pose;

  static EgoTrajectory stationary();
  static EgoTrajectory constant_velocity(double vx, double vz);
  /// Constant forward speed with a constant yaw rate; the heading at frame f
  /// is yaw_rate * f.
  static EgoTrajectory turning(double speed, double yaw_rate);
};

/// A generated scene: ground truth, the tracker input that stands in for the
/// detector, and the internal detector table that lets apply_ego re-express
/// everything in a moving frame.
struct Scenario {
  std::vector<Track> gt_tracks;  // world coordinates when poses are empty
  SequenceInput input;

  /// Pre-drop noisy detector state in world coordinates, keyed by clip
  /// boundary frame then object id. Kept so offsets can be recomputed after
  /// an ego trajectory is applied.
  struct DetectorState {
    Box3D noisy_box;
    bool emitted = true;     // false when the keyframe detection was dropped
    double p_co = 0.0;       // structural co-occurrence plus noise, clamped
    bool co_structural = false;  // object exists at both clip boundaries
  };
  std::map<int, std::map<int, DetectorState>> detector_table;
  std::map<int, std::vector<Detection>> false_positives;  // world coordinates
};

/// Deterministically generates a scenario from the config. Draw order is
/// fixed: object trajectories first, then per-boundary detector noise
/// (boundary-major, object-minor), then false positives per keyframe.
/// Throws std::invalid_argument on infeasible configs.
Scenario generate(const ScenarioConfig& config);

/// Re-expresses ground truth and detections in the moving ego frame and
/// recomputes the offsets in each clip's first-keyframe coordinates; poses
/// are populated so the tracker can undo the motion. The ego is applied
/// against the world-frame detector table, replacing any previous trajectory.
Scenario apply_ego(const Scenario& scenario, const EgoTrajectory& ego);

/// Writes a self-contained fixture directory: detections.txt, gt_labels.txt,
/// poses.txt and manifest.txt (config echo plus seed).
void write_scenario_fixture(const Scenario& scenario, const ScenarioConfig& config,
                            const std::filesystem::path& dir);

}  // namespace streamtrack
