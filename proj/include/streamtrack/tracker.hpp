#pragma once

#include "streamtrack/geometry.hpp"
#include "streamtrack/kinematics.hpp"
#include "streamtrack/moi.hpp"

#include <map>
#include <utility>
#include <vector>

namespace streamtrack {

/// Minimum BEV IoU for linking tracklets across keyframe pairs at their
/// shared boundary frame.
inline constexpr double kLinkIouFloor = 0.5;

struct TrackState {
  Box3D box;
  double score = 1.0;
};

/// Long-term object tube: contiguous per-frame states plus the EMA velocity.
struct Track {
  enum class Status { kActive, kTerminated };

  int id = 0;
  std::map<int, TrackState> states;
  Velocity velocity;  // world frame, units per frame
  Status status = Status::kActive;

  int first_frame() const { return states.begin()->first; }
  int last_frame() const { return states.rbegin()->first; }
};

/// Whole-sequence input: keyframe detections, per-frame ego poses, BEV crop.
/// Keyframes are the multiples of tau inside [0, frames). An empty pose map
/// means the ego never moves.
struct SequenceInput {
  int frames = 0;
  int tau = 1;
  std::map<int, std::vector<Detection>> detections;
  std::map<int, Pose> poses;
  BevBounds bounds;
};

/// Second-keyframe boxes re-expressed in the first keyframe's coordinates.
KeyframePair ego_compensate(const KeyframePair& pair, const Pose& pose_t,
                            const Pose& pose_next);

/// Greedy one-to-one association of the boundary-frame boxes of two adjacent
/// propagation results (descending BEV IoU, floor kLinkIouFloor). Returns
/// (prev tracklet index, next tracklet index) pairs. Both results must share
/// the boundary frame and be expressed in its coordinates.
std::vector<std::pair<int, int>> link_pairs(const PropagationResult& prev,
                                            const PropagationResult& next);

/// Wall-clock split of a run_sequence call (monotonic clock).
struct RunStats {
  double moi_ms = 0.0;   // propagation (motion-based interpolation)
  double link_ms = 0.0;  // association, bookkeeping and track extension
};

/// Near-online tracking over a full sequence: per keyframe pair it compensates
/// ego motion, runs motion-based interpolation, links tracklets at the shared
/// keyframe and maintains per-track EMA velocities; finally extends tracks at
/// both ends. Output states are in each frame's own coordinates.
std::vector<Track> run_sequence(const SequenceInput& input, RunStats* stats = nullptr);

}  // namespace streamtrack
