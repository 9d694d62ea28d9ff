#include "orient/so3.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace orient {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_finite(double theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("rotation angle must be finite");
}

}  // namespace

Mat3 axis_rotation(Axis axis, double theta) {
  require_finite(theta);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat3 r;
  switch (axis) {
    case Axis::x:
      r << 1, 0, 0,
           0, c, -s,
           0, s, c;
      break;
    case Axis::y:
      r << c, 0, s,
           0, 1, 0,
           -s, 0, c;
      break;
    case Axis::z:
      r << c, -s, 0,
           s, c, 0,
           0, 0, 1;
      break;
  }
  return r;
}

Mat3 axis_rotation_derivative(Axis axis, double theta) {
  require_finite(theta);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat3 d;
  switch (axis) {
    case Axis::x:
      d << 0, 0, 0,
           0, -s, -c,
           0, c, -s;
      break;
    case Axis::y:
      d << -s, 0, c,
           0, 0, 0,
           -c, 0, -s;
      break;
    case Axis::z:
      d << -s, -c, 0,
           c, -s, 0,
           0, 0, 0;
      break;
  }
  return d;
}

Mat3 compose_euler(const EulerAngles& angles) {
  return axis_rotation(Axis::x, angles.theta_x) * axis_rotation(Axis::y, angles.theta_y) *
         axis_rotation(Axis::z, angles.theta_z);
}

Points rotate_points(const Mat3& rotation, const Points& points) {
  if (rotation == Mat3::Identity()) return points;
  // Row-per-point storage: (M p)^T = p^T M^T.
  return points * rotation.transpose();
}

PointCloud apply_rotation(const Mat3& rotation, const PointCloud& cloud) {
  PointCloud out;
  out.id = cloud.id;
  out.label = cloud.label;
  out.points = rotate_points(rotation, cloud.points);
  return out;
}

std::array<double, 3> grad_euler(const EulerAngles& angles, const Points& points,
                                 const Points& grad_rotated) {
  if (points.rows() != grad_rotated.rows()) {
    throw std::invalid_argument("grad_euler: upstream gradient has " +
                                std::to_string(grad_rotated.rows()) + " rows, cloud has " +
                                std::to_string(points.rows()));
  }
  if (!points.allFinite() || !grad_rotated.allFinite()) {
    throw std::invalid_argument("grad_euler: non-finite input");
  }
  const Mat3 rx = axis_rotation(Axis::x, angles.theta_x);
  const Mat3 ry = axis_rotation(Axis::y, angles.theta_y);
  const Mat3 rz = axis_rotation(Axis::z, angles.theta_z);
  const Mat3 dx = axis_rotation_derivative(Axis::x, angles.theta_x);
  const Mat3 dy = axis_rotation_derivative(Axis::y, angles.theta_y);
  const Mat3 dz = axis_rotation_derivative(Axis::z, angles.theta_z);

  // dL/dtheta = sum_i g_i . (dM p_i) = <G, dM>_F with G = sum_i g_i p_i^T.
  const Mat3 outer = grad_rotated.transpose() * points;
  return {(outer.array() * (dx * ry * rz).array()).sum(),
          (outer.array() * (rx * dy * rz).array()).sum(),
          (outer.array() * (rx * ry * dz).array()).sum()};
}

double wrap_angle(double theta) {
  require_finite(theta);
  // remainder() is exact and lands in [-pi, pi].
  double r = std::remainder(theta, kTwoPi);
  if (r >= kPi) r -= kTwoPi;
  if (r < -kPi) r = -kPi;
  return r;
}

EulerAngles wrap_angles(const EulerAngles& angles) {
  return {wrap_angle(angles.theta_x), wrap_angle(angles.theta_y), wrap_angle(angles.theta_z)};
}

bool in_canonical_range(const EulerAngles& a) {
  auto ok = [](double t) { return t >= -kPi && t < kPi; };
  return ok(a.theta_x) && ok(a.theta_y) && ok(a.theta_z);
}

double orthonormality_error(const Mat3& m) {
  return (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace orient
