#include "streamtrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace streamtrack {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

void check_positive_dims(double w, double l, double h) {
  if (!(w > 0.0) || !(l > 0.0) || !(h > 0.0)) {
    throw std::invalid_argument("Box3D dimensions must be positive");
  }
}

// Shoelace formula; vertices in CCW order give a positive value.
double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    acc += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(acc);
}

// Sutherland-Hodgman clip of a convex subject polygon against one directed
// edge (a -> b) of a CCW clip polygon; keeps the half-plane to the left.
std::vector<Eigen::Vector2d> clip_edge(const std::vector<Eigen::Vector2d>& subject,
                                       const Eigen::Vector2d& a,
                                       const Eigen::Vector2d& b) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(subject.size() + 1);
  const Eigen::Vector2d dir = b - a;
  auto side = [&](const Eigen::Vector2d& p) {
    return dir.x() * (p.y() - a.y()) - dir.y() * (p.x() - a.x());
  };
  const size_t n = subject.size();
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& cur = subject[i];
    const Eigen::Vector2d& nxt = subject[(i + 1) % n];
    const double sc = side(cur);
    const double sn = side(nxt);
    if (sc >= 0.0) out.push_back(cur);
    if ((sc > 0.0 && sn < 0.0) || (sc < 0.0 && sn > 0.0)) {
      const double t = sc / (sc - sn);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

}  // namespace

double normalize_angle(double a) {
  double r = std::fmod(a + M_PI, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r - M_PI;
}

double angle_diff(double a, double b) { return normalize_angle(a - b); }

Box3D::Box3D(double x, double y, double z, double w, double l, double h, double ry)
    : x(x), y(y), z(z), w(w), l(l), h(h), ry(normalize_angle(ry)) {
  check_positive_dims(w, l, h);
}

RectBEV Box3D::bev() const { return RectBEV(x, z, w, l, ry); }

RectBEV::RectBEV(double x, double z, double w, double l, double ry)
    : x(x), z(z), w(w), l(l), ry(normalize_angle(ry)) {
  if (!(w > 0.0) || !(l > 0.0)) {
    throw std::invalid_argument("RectBEV dimensions must be positive");
  }
}

std::array<Eigen::Vector2d, 4> RectBEV::corners() const {
  const double c = std::cos(ry);
  const double s = std::sin(ry);
  const double hw = 0.5 * w;
  const double hl = 0.5 * l;
  // Local (x, z) corner offsets in CCW order; rotation preserves orientation.
  const std::array<Eigen::Vector2d, 4> local = {
      Eigen::Vector2d(hw, hl), Eigen::Vector2d(-hw, hl),
      Eigen::Vector2d(-hw, -hl), Eigen::Vector2d(hw, -hl)};
  std::array<Eigen::Vector2d, 4> out;
  for (size_t i = 0; i < 4; ++i) {
    const double u = local[i].x();
    const double v = local[i].y();
    out[i] = Eigen::Vector2d(x + c * u - s * v, z + s * u + c * v);
  }
  return out;
}

Pose::Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  const Eigen::Matrix3d gram = rotation * rotation.transpose();
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("Pose rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw std::invalid_argument("Pose rotation must have determinant +1");
  }
}

Pose Pose::from_yaw(double yaw, const Eigen::Vector3d& translation) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Eigen::Matrix3d r;
  r << c, 0.0, -s,
       0.0, 1.0, 0.0,
       s, 0.0, c;
  return Pose(r, translation);
}

Pose Pose::inverse() const {
  return Pose(rotation_.transpose(), -(rotation_.transpose() * translation_));
}

Pose Pose::compose(const Pose& other) const {
  return Pose(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
}

Eigen::Vector3d Pose::apply(const Eigen::Vector3d& p) const {
  return rotation_ * p + translation_;
}

double Pose::yaw() const { return std::atan2(rotation_(2, 0), rotation_(0, 0)); }

double intersection_area_bev(const RectBEV& a, const RectBEV& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  std::vector<Eigen::Vector2d> poly(ca.begin(), ca.end());
  for (size_t i = 0; i < 4 && !poly.empty(); ++i) {
    poly = clip_edge(poly, cb[i], cb[(i + 1) % 4]);
  }
  return polygon_area(poly);
}

double iou_bev(const RectBEV& a, const RectBEV& b) {
  const double inter = intersection_area_bev(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_bev(const Box3D& a, const Box3D& b) { return iou_bev(a.bev(), b.bev()); }

double iou_3d(const Box3D& a, const Box3D& b) {
  const double y_lo = std::max(a.y - 0.5 * a.h, b.y - 0.5 * b.h);
  const double y_hi = std::min(a.y + 0.5 * a.h, b.y + 0.5 * b.h);
  const double y_overlap = std::max(0.0, y_hi - y_lo);
  if (y_overlap <= 0.0) return 0.0;
  const double inter = intersection_area_bev(a.bev(), b.bev()) * y_overlap;
  const double uni = a.w * a.l * a.h + b.w * b.l * b.h - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Box3D transform_box(const Box3D& box, const Pose& relative) {
  const Eigen::Vector3d c = relative.apply(Eigen::Vector3d(box.x, box.y, box.z));
  return Box3D(c.x(), c.y(), c.z(), box.w, box.l, box.h,
               normalize_angle(box.ry + relative.yaw()));
}

Pose relative_pose(const Pose& source, const Pose& target) {
  return target.inverse().compose(source);
}

AxisAlignedRectBEV axis_aligned_union(const std::vector<RectBEV>& footprints) {
  if (footprints.empty()) {
    throw std::invalid_argument("axis_aligned_union: empty trajectory");
  }
  AxisAlignedRectBEV out;
  out.x_min = out.z_min = std::numeric_limits<double>::infinity();
  out.x_max = out.z_max = -std::numeric_limits<double>::infinity();
  for (const auto& rect : footprints) {
    for (const auto& corner : rect.corners()) {
      out.x_min = std::min(out.x_min, corner.x());
      out.x_max = std::max(out.x_max, corner.x());
      out.z_min = std::min(out.z_min, corner.y());
      out.z_max = std::max(out.z_max, corner.y());
    }
  }
  return out;
}

bool in_bounds(const Box3D& box, const BevBounds& bounds) {
  return box.x >= bounds.x_min && box.x <= bounds.x_max &&
         box.z >= bounds.z_min && box.z <= bounds.z_max;
}

}  // namespace streamtrack
