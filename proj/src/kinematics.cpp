#include "streamtrack/kinematics.hpp"

#include <cmath>
#include <stdexcept>

namespace streamtrack {

CoOccurrence::CoOccurrence(double p) : p_co(p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("co-occurrence probability must be in [0, 1]");
  }
}

double yaw_denom(double ry) {
  const double sign = (ry < 0.0) ? -1.0 : 1.0;
  return sign * std::max(std::abs(ry), kYawDenomFloor);
}

OffsetDelta encode_offsets(const Box3D& b_t, const Box3D& b_next, const CoOccurrence& co) {
  if (!co.gate()) return OffsetDelta{};
  OffsetDelta delta;
  delta.dx = (b_next.x - b_t.x) / b_t.w;
  delta.dz = (b_next.z - b_t.z) / b_t.l;
  // Yaw displacement along the shortest wrapped path, so the encoding stays
  // invertible across the [-pi, pi) seam.
  delta.dry = angle_diff(b_next.ry, b_t.ry) / yaw_denom(b_t.ry);
  return delta;
}

Box3D decode_offsets(const Box3D& d, const OffsetDelta& delta) {
  return Box3D(d.x + d.w * delta.dx, d.y, d.z + d.l * delta.dz, d.w, d.l, d.h,
               normalize_angle(d.ry + yaw_denom(d.ry) * delta.dry));
}

double correct_orientation(double track_ry, double det_ry) {
  const double diff = angle_diff(det_ry, track_ry);
  if (std::abs(diff) > M_PI / 2.0) {
    return normalize_angle(det_ry + M_PI);
  }
  return normalize_angle(det_ry);
}

Velocity update_velocity(const Velocity& v, const OffsetDelta& delta, int tau,
                         const Box3D& dims, double alpha) {
  if (tau < 1) throw std::invalid_argument("update_velocity: tau must be >= 1");
  const double blend = (1.0 - alpha) / static_cast<double>(tau);
  Velocity out;
  out.vx = alpha * v.vx + blend * delta.dx * dims.w;
  out.vz = alpha * v.vz + blend * delta.dz * dims.l;
  out.vry = alpha * v.vry + blend * delta.dry * yaw_denom(dims.ry);
  return out;
}

Box3D extrapolate(const Box3D& box, const Velocity& v, int steps) {
  const double s = static_cast<double>(steps);
  return Box3D(box.x + s * v.vx, box.y, box.z + s * v.vz, box.w, box.l, box.h,
               normalize_angle(box.ry + s * v.vry));
}

}  // namespace streamtrack
