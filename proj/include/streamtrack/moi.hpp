#pragma once

#include "streamtrack/geometry.hpp"
#include "streamtrack/kinematics.hpp"

#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace streamtrack {

/// Minimum 3D IoU for a rectified first-keyframe box to claim a
/// second-keyframe detection.
inline constexpr double kMatchIouFloor = 0.1;

/// Number of frames a track is extended past its observed span.
inline constexpr int kExtensionFrames = 3;

/// One keyframe proposal: box, confidence, co-occurrence and the offsets
/// predicted for the clip starting at this keyframe.
struct Detection {
  int frame = 0;
  Box3D box;
  double score = 1.0;
  CoOccurrence co;
  OffsetDelta offsets;
};

/// Detections of two adjacent keyframes t and t + tau.
struct KeyframePair {
  int t = 0;
  int tau = 1;
  std::vector<Detection> first;
  std::vector<Detection> second;
};

/// Why a propagated fragment exists and which keyframe detections back it.
struct Tracklet {
  enum class Kind {
    kMatched,              // detected on both keyframes
    kRescuedSecondMissing, // mis-detection on the second keyframe, synthesized
    kRescuedFirstMissing,  // mis-detection on the first keyframe, synthesized
    kDeath,                // track ends inside the clip, motion-model fill
    kBirth,                // track starts inside the clip, motion-model fill
  };
  Kind kind;
  std::optional<int> first_index;
  std::optional<int> second_index;
  std::map<int, Detection> states;  // frame -> propagated state
};

/// Output of one clip: per-frame detections plus the association record.
struct PropagationResult {
  int t = 0;
  int tau = 1;
  std::map<int, std::vector<Detection>> per_frame;  // frames t .. t+tau
  std::vector<std::pair<int, int>> matches;         // (first idx, second idx)
  std::vector<int> births;                          // second-only, below gate
  std::vector<int> deaths;                          // first-only, below gate
  std::vector<Tracklet> tracklets;
};

/// Per-first-detection velocity priors used by the death-branch motion fill.
/// Empty means no history: all velocities are zero.
struct TrackContext {
  std::vector<Velocity> first_velocity;
};

/// Linear blend of the tau-1 intermediate boxes between a and b; yaw follows
/// the shortest wrapped path. tau = 1 yields an empty list.
std::vector<Box3D> interpolate(const Box3D& a, const Box3D& b, int tau);

/// Index of the pool detection with the highest 3D IoU against the rectified
/// box, provided it reaches kMatchIouFloor. Ties break by higher score, then
/// lower index.
std::optional<std::size_t> get_matched(const Box3D& rectified,
                                       const std::vector<Detection>& pool);

/// Motion-based interpolation over one keyframe pair. Second-keyframe boxes
/// must already be expressed in the first keyframe's coordinates.
PropagationResult propagate(const KeyframePair& pair, const TrackContext& tracks = {});

enum class ExtendDirection { kForward, kBackward };

/// Up to kExtensionFrames extrapolated boxes past a track end, stopping at
/// the first box whose center leaves the BEV bounds.
std::vector<Box3D> extend_track(const Box3D& last_box, const Velocity& v,
                                const BevBounds& bounds, ExtendDirection direction);

}  // namespace streamtrack
