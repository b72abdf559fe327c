#include "streamtrack/simulator.hpp"

#include "streamtrack/kitti_io.hpp"
#include "streamtrack/rng.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace streamtrack {

namespace {

constexpr double kSpawnMargin = 1.0;  // keeps gt centers inside the BEV crop
constexpr int kMaxSpawnAttempts = 200;

struct ObjectPlan {
  int birth = 0;
  int death = 0;
  std::vector<Box3D> states;  // world box per frame, index 0 == birth

  bool alive(int frame) const { return frame >= birth && frame <= death; }
  const Box3D& at(int frame) const { return states[static_cast<std::size_t>(frame - birth)]; }
};

// Forward direction of a heading: the box's local +z axis in world BEV.
Eigen::Vector2d forward(double ry) { return {-std::sin(ry), std::cos(ry)}; }

std::vector<Box3D> roll_out(Box3D state, double speed, double yaw_rate, int steps) {
  std::vector<Box3D> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back(state);
  for (int k = 0; k < steps; ++k) {
    const Eigen::Vector2d dir = forward(state.ry);
    state.x += speed * dir.x();
    state.z += speed * dir.y();
    state.ry = normalize_angle(state.ry + yaw_rate);
    out.push_back(state);
  }
  return out;
}

bool inside_margin(const std::vector<Box3D>& states, const BevBounds& bounds) {
  for (const auto& b : states) {
    if (b.x < bounds.x_min + kSpawnMargin || b.x > bounds.x_max - kSpawnMargin ||
        b.z < bounds.z_min + kSpawnMargin || b.z > bounds.z_max - kSpawnMargin) {
      return false;
    }
  }
  return true;
}

void validate(const ScenarioConfig& c, int death_lo, int death_hi) {
  const auto fail = [](const std::string& what) {
    throw std::invalid_argument("scenario config: " + what);
  };
  if (c.tau < 1) fail("tau must be >= 1");
  if (c.frames < c.tau + 1) fail("frames must be at least tau + 1");
  if (c.n_objects < 0) fail("n_objects must be >= 0");
  if (c.birth_min > c.birth_max) fail("birth range is empty");
  if (c.birth_min < 0 || c.birth_max >= c.frames) fail("birth range beyond frames");
  if (death_lo > death_hi) fail("death range is empty");
  if (death_lo < 0 || death_hi >= c.frames) fail("death range beyond frames");
  if (c.speed_min > c.speed_max || c.speed_min < 0.0) fail("bad speed range");
  if (c.yaw_rate_min > c.yaw_rate_max) fail("bad yaw-rate range");
  if (c.sigma_center < 0.0 || c.sigma_dims < 0.0 || c.sigma_yaw < 0.0) fail("negative sigma");
  if (c.drop_prob < 0.0 || c.drop_prob > 1.0) fail("drop_prob outside [0, 1]");
  if (c.fp_rate < 0.0) fail("fp_rate must be >= 0");
  if (c.co_noise < 0.0) fail("co_noise must be >= 0");
}

std::vector<int> clip_boundaries(int frames, int tau) {
  std::vector<int> out;
  for (int k = 0; k < frames; k += tau) out.push_back(k);
  if (!out.empty() && out.back() < frames - 1) out.push_back(frames - 1);
  return out;
}

// Renders keyframe detections from the world-frame detector table, expressing
// boxes and offsets in each keyframe's own coordinates. The identity path
// bypasses the transform so noiseless detections equal the ground truth bit
// for bit.
std::map<int, std::vector<Detection>> render_detections(const Scenario& scenario,
                                                        const std::map<int, Pose>& poses) {
  const auto to_local = [&](int frame, const Box3D& box) {
    const auto it = poses.find(frame);
    return it == poses.end() ? box : transform_box(box, it->second.inverse());
  };
  const std::vector<int> boundaries =
      clip_boundaries(scenario.input.frames, scenario.input.tau);

  std::map<int, std::vector<Detection>> out;
  for (std::size_t bi = 0; bi < boundaries.size(); ++bi) {
    const int k = boundaries[bi];
    const auto table_it = scenario.detector_table.find(k);
    if (k % scenario.input.tau != 0) continue;  // tail boundary holds offset targets only
    const int next = bi + 1 < boundaries.size() ? boundaries[bi + 1] : -1;

    std::vector<Detection> dets;
    if (table_it != scenario.detector_table.end()) {
      for (const auto& [object_id, state] : table_it->second) {
        if (!state.emitted) continue;
        Detection det;
        det.frame = k;
        det.box = to_local(k, state.noisy_box);
        det.score = 1.0;
        det.co = CoOccurrence(state.p_co);
        if (state.co_structural && next >= 0) {
          const auto& next_state = scenario.detector_table.at(next).at(object_id);
          det.offsets =
              encode_offsets(det.box, to_local(k, next_state.noisy_box), CoOccurrence(1.0));
        }
        dets.push_back(det);
      }
    }
    const auto fp_it = scenario.false_positives.find(k);
    if (fp_it != scenario.false_positives.end()) {
      for (Detection fp : fp_it->second) {
        fp.box = to_local(k, fp.box);
        dets.push_back(fp);
      }
    }
    out.emplace(k, std::move(dets));
  }
  return out;
}

}  // namespace

EgoTrajectory EgoTrajectory::stationary() {
  return EgoTrajectory{[](int) { return Pose::identity(); }};
}

EgoTrajectory EgoTrajectory::constant_velocity(double vx, double vz) {
  return EgoTrajectory{[vx, vz](int frame) {
    const double f = static_cast<double>(frame);
    return Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(vx * f, 0.0, vz * f));
  }};
}

EgoTrajectory EgoTrajectory::turning(double speed, double yaw_rate) {
  return EgoTrajectory{[speed, yaw_rate](int frame) {
    double heading = 0.0;
    Eigen::Vector2d position(0.0, 0.0);
    for (int f = 0; f < frame; ++f) {
      position += speed * forward(heading);
      heading += yaw_rate;
    }
    return Pose::from_yaw(normalize_angle(heading),
                          Eigen::Vector3d(position.x(), 0.0, position.y()));
  }};
}

Scenario generate(const ScenarioConfig& config) {
  const int death_lo = config.death_min < 0 ? config.frames - 1 : config.death_min;
  const int death_hi = config.death_max < 0 ? config.frames - 1 : config.death_max;
  validate(config, death_lo, death_hi);

  RandomStream rng(config.seed);
  const BevBounds bounds;

  Scenario scenario;
  scenario.input.frames = config.frames;
  scenario.input.tau = config.tau;
  scenario.input.bounds = bounds;

  // Phase 1: object trajectories. Spawn kinematics are redrawn until the
  // whole lifespan stays inside the BEV crop.
  std::vector<ObjectPlan> objects;
  for (int i = 0; i < config.n_objects; ++i) {
    ObjectPlan plan;
    plan.birth = rng.uniform_int(config.birth_min, config.birth_max);
    plan.death = std::max(rng.uniform_int(death_lo, death_hi), plan.birth);
    const double w = rng.uniform(1.6, 1.9);
    const double l = rng.uniform(3.8, 4.6);
    const double h = rng.uniform(1.4, 1.7);

    bool placed = false;
    for (int attempt = 0; attempt < kMaxSpawnAttempts && !placed; ++attempt) {
      const double x = rng.uniform(bounds.x_min + kSpawnMargin, bounds.x_max - kSpawnMargin);
      const double z = rng.uniform(bounds.z_min + kSpawnMargin, bounds.z_max - kSpawnMargin);
      const double heading = rng.uniform(-M_PI, M_PI);
      const double speed = rng.uniform(config.speed_min, config.speed_max);
      const double yaw_rate = rng.uniform(config.yaw_rate_min, config.yaw_rate_max);
      const Box3D spawn(x, 0.5 * h, z, w, l, h, heading);
      auto states = roll_out(spawn, speed, yaw_rate, plan.death - plan.birth);
      if (!inside_margin(states, bounds)) continue;
      plan.states = std::move(states);
      placed = true;
    }
    if (!placed) {
      throw std::invalid_argument("scenario config: could not place object " +
                                  std::to_string(i) + " inside the BEV crop");
    }
    objects.push_back(std::move(plan));
  }

  for (std::size_t i = 0; i < objects.size(); ++i) {
    Track track;
    track.id = static_cast<int>(i);
    track.status = Track::Status::kTerminated;
    for (int f = objects[i].birth; f <= objects[i].death; ++f) {
      track.states.emplace(f, TrackState{objects[i].at(f), 1.0});
    }
    scenario.gt_tracks.push_back(std::move(track));
  }

  // Phase 2: detector noise per clip boundary (boundary-major, object-minor).
  // The tail boundary gets table entries too: they are the offset targets of
  // the last keyframe, never emitted as detections.
  const auto boundaries = clip_boundaries(config.frames, config.tau);
  for (std::size_t bi = 0; bi < boundaries.size(); ++bi) {
    const int b = boundaries[bi];
    const int next = bi + 1 < boundaries.size() ? boundaries[bi + 1] : -1;
    for (std::size_t i = 0; i < objects.size(); ++i) {
      if (!objects[i].alive(b)) continue;
      const Box3D truth = objects[i].at(b);
      Scenario::DetectorState state;
      const double nx = rng.normal(config.sigma_center);
      const double nz = rng.normal(config.sigma_center);
      const double nw = rng.normal(config.sigma_dims);
      const double nl = rng.normal(config.sigma_dims);
      const double nh = rng.normal(config.sigma_dims);
      const double nry = rng.normal(config.sigma_yaw);
      state.noisy_box = Box3D(truth.x + nx, truth.y, truth.z + nz,
                              std::max(truth.w + nw, 0.2), std::max(truth.l + nl, 0.2),
                              std::max(truth.h + nh, 0.2), truth.ry + nry);
      state.emitted = !(rng.uniform() < config.drop_prob);
      state.co_structural = next >= 0 && objects[i].alive(next);
      const double co = (state.co_structural ? 1.0 : 0.0) + rng.normal(config.co_noise);
      state.p_co = std::clamp(co, 0.0, 1.0);
      scenario.detector_table[b].emplace(static_cast<int>(i), state);
    }
  }

  // Phase 3: false positives, uniform inside the crop, fresh every keyframe.
  for (const int b : boundaries) {
    if (b % config.tau != 0) continue;
    const int count = rng.poisson(config.fp_rate);
    for (int n = 0; n < count; ++n) {
      const double x = rng.uniform(bounds.x_min + kSpawnMargin, bounds.x_max - kSpawnMargin);
      const double z = rng.uniform(bounds.z_min + kSpawnMargin, bounds.z_max - kSpawnMargin);
      const double heading = rng.uniform(-M_PI, M_PI);
      const double w = rng.uniform(1.6, 1.9);
      const double l = rng.uniform(3.8, 4.6);
      const double h = rng.uniform(1.4, 1.7);
      Detection fp;
      fp.frame = b;
      fp.box = Box3D(x, 0.5 * h, z, w, l, h, heading);
      fp.score = rng.uniform(0.1, 0.7);
      fp.co = CoOccurrence(rng.uniform());
      scenario.false_positives[b].push_back(fp);
    }
  }

  scenario.input.detections = render_detections(scenario, {});
  return scenario;
}

Scenario apply_ego(const Scenario& scenario, const EgoTrajectory& ego) {
  if (!scenario.input.poses.empty()) {
    throw std::invalid_argument("apply_ego expects a world-frame scenario (empty poses)");
  }
  Scenario out = scenario;
  for (int f = 0; f < scenario.input.frames; ++f) {
    out.input.poses.emplace(f, ego.pose(f));
  }
  for (auto& track : out.gt_tracks) {
    for (auto& [frame, state] : track.states) {
      state.box = transform_box(state.box, out.input.poses.at(frame).inverse());
    }
  }
  out.input.detections = render_detections(out, out.input.poses);
  return out;
}

void write_scenario_fixture(const Scenario& scenario, const ScenarioConfig& config,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };

  {
    DetectionData data;
    data.sequence_id = config.sequence_id;
    data.tau = config.tau;
    data.frames = config.frames;
    data.by_keyframe = scenario.input.detections;
    auto out = open("detections.txt");
    write_detections(out, data);
  }
  {
    auto out = open("gt_labels.txt");
    write_labels(out, scenario.gt_tracks, "Car");
  }
  {
    std::map<int, Pose> poses;
    for (int f = 0; f < scenario.input.frames; ++f) {
      const auto it = scenario.input.poses.find(f);
      poses.emplace(f, it == scenario.input.poses.end() ? Pose::identity() : it->second);
    }
    auto out = open("poses.txt");
    write_poses(out, poses);
  }
  {
    auto out = open("manifest.txt");
    out << "schema streamtrack.manifest.v1\n";
    out << "seq " << config.sequence_id << '\n';
    out << "frames " << config.frames << '\n';
    out << "tau " << config.tau << '\n';
    out << "objects " << config.n_objects << '\n';
    out << "birth_min " << config.birth_min << '\n';
    out << "birth_max " << config.birth_max << '\n';
    out << "death_min " << config.death_min << '\n';
    out << "death_max " << config.death_max << '\n';
    out << "speed_min " << config.speed_min << '\n';
    out << "speed_max " << config.speed_max << '\n';
    out << "yaw_rate_min " << config.yaw_rate_min << '\n';
    out << "yaw_rate_max " << config.yaw_rate_max << '\n';
    out << "sigma_center " << config.sigma_center << '\n';
    out << "sigma_dims " << config.sigma_dims << '\n';
    out << "sigma_yaw " << config.sigma_yaw << '\n';
    out << "drop_prob " << config.drop_prob << '\n';
    out << "fp_rate " << config.fp_rate << '\n';
    out << "co_noise " << config.co_noise << '\n';
    out << "seed " << config.seed << '\n';
  }
}

}  // namespace streamtrack
