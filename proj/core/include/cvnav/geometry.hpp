#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cvnav {

// Planar pose algebra in an east-north local frame. Headings are ENU yaw:
// measured counter-clockwise from east, stored wrapped to (-pi, pi].

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  if (!std::isfinite(a)) {
    throw std::invalid_argument("wrap_angle: non-finite angle");
  }
  double w = std::remainder(a, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) {
    w += 2.0 * std::numbers::pi;
  }
  return w;
}

struct Pose2 {
  double x = 0.0;      // metres east
  double y = 0.0;      // metres north
  double theta = 0.0;  // radians, wrapped at construction

  Pose2() = default;
  Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw std::invalid_argument("Pose2: non-finite position");
    }
  }
};

// Rigid motion expressed in the body frame of the starting pose:
// d_fwd along the heading, d_lat to the vehicle's left.
struct BodyIncrement {
  double d_fwd = 0.0;
  double d_lat = 0.0;
  double d_theta = 0.0;  // wrapped at construction

  BodyIncrement() = default;
  BodyIncrement(double fwd, double lat, double dtheta)
      : d_fwd(fwd), d_lat(lat), d_theta(wrap_angle(dtheta)) {
    if (!std::isfinite(d_fwd) || !std::isfinite(d_lat)) {
      throw std::invalid_argument("BodyIncrement: non-finite translation");
    }
  }
};

// 2x2 rotation matrix, checked orthonormal (R^T R = I, det = +1) to 1e-9.
struct Rot2 {
  double r00 = 1.0, r01 = 0.0;
  double r10 = 0.0, r11 = 1.0;

  Rot2() = default;
  Rot2(double a00, double a01, double a10, double a11) : r00(a00), r01(a01), r10(a10), r11(a11) {
    constexpr double kTol = 1e-9;
    const double c0 = r00 * r00 + r10 * r10;
    const double c1 = r01 * r01 + r11 * r11;
    const double dot = r00 * r01 + r10 * r11;
    const double det = r00 * r11 - r01 * r10;
    if (std::abs(c0 - 1.0) > kTol || std::abs(c1 - 1.0) > kTol || std::abs(dot) > kTol ||
        std::abs(det - 1.0) > kTol) {
      throw std::invalid_argument("Rot2: matrix is not a proper rotation");
    }
  }

  static Rot2 from_angle(double a) {
    const double c = std::cos(a);
    const double s = std::sin(a);
    Rot2 r;
    r.r00 = c;
    r.r01 = -s;
    r.r10 = s;
    r.r11 = c;
    return r;
  }
};

/// Applies a body-frame increment to a pose.
inline Pose2 compose(const Pose2& p, const BodyIncrement& inc) {
  const double c = std::cos(p.theta);
  const double s = std::sin(p.theta);
  return Pose2(p.x + c * inc.d_fwd - s * inc.d_lat,
               p.y + s * inc.d_fwd + c * inc.d_lat,
               p.theta + inc.d_theta);
}

/// Body-frame increment taking pose a to pose b: compose(a, between(a, b)) == b.
inline BodyIncrement between(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  return BodyIncrement(c * dx + s * dy, -s * dx + c * dy, b.theta - a.theta);
}

/// Converts an east-CCW ENU yaw into the image-up heading of a north-up tile.
inline double enu_yaw_to_image_heading(double psi_enu) {
  return wrap_angle(0.5 * std::numbers::pi - psi_enu);
}

/// Rotation angle encoded by a Rot2, in (-pi, pi].
inline double yaw_residual(const Rot2& r) {
  return wrap_angle(std::atan2(r.r10, r.r00));
}

}  // namespace cvnav
