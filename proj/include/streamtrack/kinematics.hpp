#pragma once

#include "streamtrack/geometry.hpp"

namespace streamtrack {

/// Co-occurrence gate: a pair of keyframe observations is treated as the same
/// physical object when p_co reaches this value.
inline constexpr double kCoOccurrenceGate = 0.5;

/// EMA blending factor of the constant-velocity motion model.
inline constexpr double kVelocityAlpha = 0.8;

/// Floor applied to the yaw normalizer so offsets stay bounded near ry = 0.
inline constexpr double kYawDenomFloor = 0.1;

/// Normalized center/yaw displacement between a keyframe pair.
/// dx and dz are in units of the reference box's width and length; dry is in
/// units of yaw_denom(reference ry).
struct OffsetDelta {
  double dx = 0.0;
  double dz = 0.0;
  double dry = 0.0;
};

/// Per-track velocity in BEV space, in units per frame.
struct Velocity {
  double vx = 0.0;
  double vz = 0.0;
  double vry = 0.0;
};

/// Probability that one physical object appears on both keyframes of a pair.
struct CoOccurrence {
  double p_co = 0.0;

  CoOccurrence() = default;
  explicit CoOccurrence(double p);

  bool gate() const { return p_co >= kCoOccurrenceGate; }
};

/// Yaw normalizer: sign(ry) * max(|ry|, 0.1), with sign(0) = +1. Keeps the
/// offset encoding invertible and bounded around ry = 0.
double yaw_denom(double ry);

/// Offset label between two boxes. Gated: below the co-occurrence threshold
/// the offsets are defined as zero.
OffsetDelta encode_offsets(const Box3D& b_t, const Box3D& b_next, const CoOccurrence& co);

/// Applies decoded offsets to a box: center moves by (w*dx, 0, l*dz), yaw by
/// yaw_denom(ry)*dry. Strict inverse of encode_offsets for the same reference.
Box3D decode_offsets(const Box3D& d, const OffsetDelta& delta);

/// Flips a detection yaw by pi when it disagrees with the track orientation
/// by more than pi/2 (wrapped). Result is in [-pi, pi).
double correct_orientation(double track_ry, double det_ry);

/// EMA update: alpha*v + (1-alpha) * (delta/tau) * (w, l, yaw_denom(ry)).
/// dims are (w, l, ry) of the matched first-keyframe box. Throws on tau < 1.
Velocity update_velocity(const Velocity& v, const OffsetDelta& delta, int tau,
                         const Box3D& dims, double alpha = kVelocityAlpha);

/// Advances a box by steps frames of constant velocity; steps may be negative.
Box3D extrapolate(const Box3D& box, const Velocity& v, int steps);

}  // namespace streamtrack
