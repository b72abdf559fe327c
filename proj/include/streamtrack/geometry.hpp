#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <vector>

namespace streamtrack {

/// Wraps an angle to [-pi, pi).
double normalize_angle(double a);

/// Shortest signed difference a - b, wrapped to [-pi, pi).
double angle_diff(double a, double b);

/// Oriented 3D box in camera-style coordinates (x right, y down, z forward).
/// (x, y, z) is the box center; w spans local x, l spans local z, h spans y.
/// ry is the yaw about the vertical axis, kept in [-pi, pi).
struct Box3D {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double w = 1.0;
  double l = 1.0;
  double h = 1.0;
  double ry = 0.0;

  Box3D() = default;
  Box3D(double x, double y, double z, double w, double l, double h, double ry);

  struct RectBEV bev() const;
};

/// Bird's-eye-view footprint of a Box3D: oriented rectangle in the x-z plane.
struct RectBEV {
  double x = 0.0;
  double z = 0.0;
  double w = 1.0;
  double l = 1.0;
  double ry = 0.0;

  RectBEV() = default;
  RectBEV(double x, double z, double w, double l, double ry);

  double area() const { return w * l; }
  /// Corners in counter-clockwise order in the (x, z) plane.
  std::array<Eigen::Vector2d, 4> corners() const;
};

/// Axis-aligned rectangle in the BEV plane.
struct AxisAlignedRectBEV {
  double x_min = 0.0;
  double x_max = 0.0;
  double z_min = 0.0;
  double z_max = 0.0;

  bool contains(const Eigen::Vector2d& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= z_min && p.y() <= z_max;
  }
};

/// Rigid ego-to-world transform of one frame. Rotation must be orthonormal
/// with determinant +1 (checked to 1e-9 on construction).
class Pose {
 public:
  Pose() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static Pose identity() { return Pose(); }
  /// Pure yaw rotation (about the vertical axis) plus translation.
  static Pose from_yaw(double yaw, const Eigen::Vector3d& translation = Eigen::Vector3d::Zero());

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Pose inverse() const;
  /// Composition: (*this) after other, i.e. this->apply(other.apply(p)).
  Pose compose(const Pose& other) const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const;
  /// Yaw component of the rotation, atan2(R(2,0), R(0,0)).
  double yaw() const;

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

/// Crop extents of the BEV feature area. Defaults match the usual
/// camera-view crop of [-40, 40] x [0, 70] x [0, 2.5] meters.
struct BevBounds {
  double x_min = -40.0;
  double x_max = 40.0;
  double z_min = 0.0;
  double z_max = 70.0;
  double y_min = 0.0;
  double y_max = 2.5;

  bool valid() const { return x_min < x_max && z_min < z_max && y_min < y_max; }
};

/// Intersection-over-union of two oriented BEV rectangles, in [0, 1].
double iou_bev(const RectBEV& a, const RectBEV& b);
double iou_bev(const Box3D& a, const Box3D& b);

/// Volumetric IoU: oriented BEV overlap times vertical overlap, in [0, 1].
double iou_3d(const Box3D& a, const Box3D& b);

/// Area of the intersection polygon of two oriented rectangles.
double intersection_area_bev(const RectBEV& a, const RectBEV& b);

/// Applies a relative rigid transform to a box: center is mapped through the
/// transform, ry is shifted by the yaw component of the relative rotation.
Box3D transform_box(const Box3D& box, const Pose& relative);

/// target^-1 o source; transform_box with the result maps boxes expressed in
/// the source frame into the target frame.
Pose relative_pose(const Pose& source, const Pose& target);

/// Smallest axis-aligned rectangle containing every corner of every footprint.
/// Throws std::invalid_argument on an empty list.
AxisAlignedRectBEV axis_aligned_union(const std::vector<RectBEV>& footprints);

/// True iff the box center lies inside the closed x/z ranges of the bounds.
bool in_bounds(const Box3D& box, const BevBounds& bounds);

}  // namespace streamtrack
