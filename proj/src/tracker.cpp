#include "streamtrack/tracker.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>

namespace streamtrack {

namespace {

const Pose kIdentityPose = Pose::identity();

const Pose& pose_at(const SequenceInput& input, int frame) {
  if (input.poses.empty()) return kIdentityPose;
  const auto it = input.poses.find(frame);
  if (it == input.poses.end()) {
    throw std::invalid_argument("missing pose for frame " + std::to_string(frame));
  }
  return it->second;
}

// Greedy one-to-one matching by descending BEV IoU with a hard floor.
// Ties resolve to the lowest (a, b) index pair.
std::vector<std::pair<int, int>> greedy_match_bev(const std::vector<RectBEV>& a,
                                                  const std::vector<RectBEV>& b,
                                                  double floor) {
  struct Candidate {
    double iou;
    int i;
    int j;
  };
  std::vector<Candidate> candidates;
  for (int i = 0; i < static_cast<int>(a.size()); ++i) {
    for (int j = 0; j < static_cast<int>(b.size()); ++j) {
      const double iou = iou_bev(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(j)]);
      if (iou >= floor) candidates.push_back({iou, i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& l, const Candidate& r) {
    return std::tie(r.iou, l.i, l.j) < std::tie(l.iou, r.i, r.j);
  });
  std::vector<bool> used_a(a.size(), false);
  std::vector<bool> used_b(b.size(), false);
  std::vector<std::pair<int, int>> out;
  for (const auto& c : candidates) {
    if (used_a[static_cast<std::size_t>(c.i)] || used_b[static_cast<std::size_t>(c.j)]) continue;
    used_a[static_cast<std::size_t>(c.i)] = true;
    used_b[static_cast<std::size_t>(c.j)] = true;
    out.emplace_back(c.i, c.j);
  }
  return out;
}

// Tracklet indices that carry a state at the given frame, with those boxes.
std::pair<std::vector<int>, std::vector<RectBEV>> boundary_pool(
    const PropagationResult& result, int frame) {
  std::vector<int> indices;
  std::vector<RectBEV> boxes;
  for (int i = 0; i < static_cast<int>(result.tracklets.size()); ++i) {
    const auto it = result.tracklets[static_cast<std::size_t>(i)].states.find(frame);
    if (it == result.tracklets[static_cast<std::size_t>(i)].states.end()) continue;
    indices.push_back(i);
    boxes.push_back(it->second.box.bev());
  }
  return {indices, boxes};
}

Velocity rotate_velocity(const Velocity& v, const Eigen::Matrix3d& rotation) {
  const Eigen::Vector3d planar = rotation * Eigen::Vector3d(v.vx, 0.0, v.vz);
  return Velocity{planar.x(), planar.z(), v.vry};
}

// Clip boundaries: every keyframe, plus the final frame when the sequence
// runs past the last keyframe (partial tail clip).
std::vector<int> clip_boundaries(const SequenceInput& input) {
  std::vector<int> out;
  for (int k = 0; k < input.frames; k += input.tau) out.push_back(k);
  if (!out.empty() && out.back() < input.frames - 1) out.push_back(input.frames - 1);
  return out;
}

void validate(const SequenceInput& input) {
  if (input.tau < 1) throw std::invalid_argument("run_sequence: tau must be >= 1");
  if (input.frames < 1) throw std::invalid_argument("run_sequence: frames must be >= 1");
  if (!input.bounds.valid()) throw std::invalid_argument("run_sequence: invalid bounds");
  for (const auto& [keyframe, dets] : input.detections) {
    if (keyframe % input.tau != 0 || keyframe < 0 || keyframe >= input.frames) {
      throw std::invalid_argument("run_sequence: detection frame " + std::to_string(keyframe) +
                                  " is not a keyframe");
    }
    for (const auto& d : dets) {
      if (d.frame != keyframe) {
        throw std::invalid_argument("run_sequence: detection frame field mismatch");
      }
    }
  }
}

// Extends one track end with the motion model. Steps run in world
// coordinates, each emitted state lands in its own frame's coordinates, and
// the walk stops at the first box outside the BEV crop of that frame.
void extend_end(Track& track, const SequenceInput& input, ExtendDirection direction) {
  const int sign = direction == ExtendDirection::kForward ? 1 : -1;
  const int anchor = direction == ExtendDirection::kForward ? track.last_frame()
                                                            : track.first_frame();
  const TrackState& last = track.states.at(anchor);
  const Box3D anchor_world = transform_box(last.box, pose_at(input, anchor));
  double prev_ry = last.box.ry;
  for (int k = 1; k <= kExtensionFrames; ++k) {
    const int frame = anchor + sign * k;
    if (frame < 0 || frame >= input.frames) break;
    const Box3D world = extrapolate(anchor_world, track.velocity, sign * k);
    Box3D local = transform_box(world, pose_at(input, frame).inverse());
    if (!in_bounds(local, input.bounds)) break;
    local.ry = correct_orientation(prev_ry, local.ry);
    prev_ry = local.ry;
    track.states[frame] = TrackState{local, last.score};
  }
}

}  // namespace

KeyframePair ego_compensate(const KeyframePair& pair, const Pose& pose_t,
                            const Pose& pose_next) {
  const Pose relative = relative_pose(pose_next, pose_t);
  KeyframePair out = pair;
  for (auto& det : out.second) {
    det.box = transform_box(det.box, relative);
  }
  return out;
}

std::vector<std::pair<int, int>> link_pairs(const PropagationResult& prev,
                                            const PropagationResult& next) {
  const int boundary = prev.t + prev.tau;
  if (boundary != next.t) {
    throw std::invalid_argument("link_pairs: results do not share a boundary frame");
  }
  const auto [prev_idx, prev_boxes] = boundary_pool(prev, boundary);
  const auto [next_idx, next_boxes] = boundary_pool(next, boundary);
  std::vector<std::pair<int, int>> out;
  for (const auto& [i, j] : greedy_match_bev(prev_boxes, next_boxes, kLinkIouFloor)) {
    out.emplace_back(prev_idx[static_cast<std::size_t>(i)],
                     next_idx[static_cast<std::size_t>(j)]);
  }
  return out;
}

std::vector<Track> run_sequence(const SequenceInput& input, RunStats* stats) {
  validate(input);
  using Clock = std::chrono::steady_clock;
  const auto elapsed_ms = [](Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
  };

  const auto boundaries = clip_boundaries(input);
  const auto detections_at = [&](int frame) -> std::vector<Detection> {
    const auto it = input.detections.find(frame);
    return it == input.detections.end() ? std::vector<Detection>{} : it->second;
  };

  std::vector<Track> tracks;
  auto open_track = [&](const Tracklet& tracklet) -> int {
    Track track;
    track.id = static_cast<int>(tracks.size());
    for (const auto& [frame, state] : tracklet.states) {
      track.states.emplace(frame, TrackState{state.box, state.score});
    }
    tracks.push_back(std::move(track));
    return tracks.back().id;
  };

  if (boundaries.size() < 2) {
    // Degenerate sequence with a single frame: detections become one-state
    // tracks, nothing to interpolate.
    for (const auto& det : detections_at(0)) {
      Tracklet tracklet;
      tracklet.kind = Tracklet::Kind::kBirth;
      tracklet.states.emplace(0, det);
      open_track(tracklet);
    }
    return tracks;
  }

  std::optional<PropagationResult> prev_result;
  std::unordered_map<int, int> prev_owner;  // prev tracklet index -> track id

  for (std::size_t p = 0; p + 1 < boundaries.size(); ++p) {
    const auto pre_start = Clock::now();
    const int b0 = boundaries[p];
    const int b1 = boundaries[p + 1];
    const Pose& pose0 = pose_at(input, b0);

    KeyframePair pair;
    pair.t = b0;
    pair.tau = b1 - b0;
    pair.first = detections_at(b0);
    pair.second = detections_at(b1);
    for (auto& det : pair.second) det.frame = b1;  // tail boundary reuses keyframe rows
    pair = ego_compensate(pair, pose0, pose_at(input, b1));

    // Velocity priors for the death-branch fill: pre-associate the first
    // detections with the previous clip's boundary states.
    TrackContext context;
    context.first_velocity.assign(pair.first.size(), Velocity{});
    if (prev_result) {
      const auto [prev_idx, prev_boxes] = boundary_pool(*prev_result, b0);
      std::vector<RectBEV> first_boxes;
      first_boxes.reserve(pair.first.size());
      for (const auto& det : pair.first) first_boxes.push_back(det.box.bev());
      for (const auto& [i, j] : greedy_match_bev(prev_boxes, first_boxes, kLinkIouFloor)) {
        const auto owner = prev_owner.find(prev_idx[static_cast<std::size_t>(i)]);
        if (owner == prev_owner.end()) continue;
        context.first_velocity[static_cast<std::size_t>(j)] = rotate_velocity(
            tracks[static_cast<std::size_t>(owner->second)].velocity,
            pose0.rotation().transpose());
      }
    }

    const auto moi_start = Clock::now();
    if (stats) stats->link_ms += std::chrono::duration<double, std::milli>(moi_start - pre_start).count();
    PropagationResult result = propagate(pair, context);
    if (stats) stats->moi_ms += elapsed_ms(moi_start);
    const auto link_start = Clock::now();

    // Re-express every propagated state in its own frame's coordinates.
    if (!input.poses.empty()) {
      for (auto& tracklet : result.tracklets) {
        for (auto& [frame, state] : tracklet.states) {
          if (frame == b0) continue;
          state.box = transform_box(state.box, relative_pose(pose0, pose_at(input, frame)));
        }
      }
      result.per_frame.clear();
      for (const auto& tracklet : result.tracklets) {
        for (const auto& [frame, state] : tracklet.states) {
          result.per_frame[frame].push_back(state);
        }
      }
    }

    // Assign tracklets to tracks: linked ones continue, the rest open tracks.
    std::unordered_map<int, int> owner;
    if (prev_result) {
      for (const auto& [pi, ni] : link_pairs(*prev_result, result)) {
        owner[ni] = prev_owner.at(pi);
      }
    }
    for (int ni = 0; ni < static_cast<int>(result.tracklets.size()); ++ni) {
      const Tracklet& tracklet = result.tracklets[static_cast<std::size_t>(ni)];
      const auto it = owner.find(ni);
      if (it == owner.end()) {
        owner[ni] = open_track(tracklet);
        continue;
      }
      Track& track = tracks[static_cast<std::size_t>(it->second)];
      // Keep the whole fragment's orientation consistent with the track.
      double flip = 0.0;
      const auto boundary_state = tracklet.states.find(b0);
      const auto existing = track.states.find(b0);
      if (boundary_state != tracklet.states.end() && existing != track.states.end()) {
        if (std::abs(angle_diff(boundary_state->second.box.ry, existing->second.box.ry)) >
            M_PI / 2.0) {
          flip = M_PI;
        }
      }
      for (const auto& [frame, state] : tracklet.states) {
        TrackState next{state.box, state.score};
        next.box.ry = normalize_angle(next.box.ry + flip);
        if (frame == b0 && tracklet.kind == Tracklet::Kind::kRescuedFirstMissing) {
          // Synthesized boundary box never replaces an observed one.
          track.states.emplace(frame, next);
        } else {
          track.states[frame] = next;
        }
      }
    }

    // EMA velocity update for tracks that matched a new detection.
    for (int ni = 0; ni < static_cast<int>(result.tracklets.size()); ++ni) {
      const Tracklet& tracklet = result.tracklets[static_cast<std::size_t>(ni)];
      if (tracklet.kind != Tracklet::Kind::kMatched) continue;
      const Detection& det = pair.first[static_cast<std::size_t>(*tracklet.first_index)];
      Track& track = tracks[static_cast<std::size_t>(owner.at(ni))];
      const Velocity local = rotate_velocity(track.velocity, pose0.rotation().transpose());
      track.velocity = rotate_velocity(
          update_velocity(local, det.offsets, pair.tau, det.box), pose0.rotation());
    }

    for (auto& track : tracks) {
      track.status = track.last_frame() == b1 ? Track::Status::kActive
                                              : Track::Status::kTerminated;
    }

    prev_result = std::move(result);
    prev_owner = std::move(owner);
    if (stats) stats->link_ms += elapsed_ms(link_start);
  }

  // Track extension at both ends, clipped to the sequence and the BEV crop.
  const auto ext_start = Clock::now();
  for (auto& track : tracks) {
    if (track.last_frame() < input.frames - 1) {
      extend_end(track, input, ExtendDirection::kForward);
    }
    if (track.first_frame() > 0) {
      extend_end(track, input, ExtendDirection::kBackward);
    }
  }
  if (stats) stats->link_ms += elapsed_ms(ext_start);
  return tracks;
}

}  // namespace streamtrack
