#pragma once

#include <array>

#include "orient/linalg.hpp"
#include "orient/point_cloud.hpp"

namespace orient {

/// Rotation parameters. Every producer in the library keeps each component in
/// [-pi, pi); arbitrary finite values are still accepted by compose_euler.
struct EulerAngles {
  double theta_x = 0.0;
  double theta_y = 0.0;
  double theta_z = 0.0;

  friend bool operator==(const EulerAngles&, const EulerAngles&) = default;
};

enum class Axis { x, y, z };

Mat3 axis_rotation(Axis axis, double theta);

/// Element-wise derivative of axis_rotation with respect to theta.
Mat3 axis_rotation_derivative(Axis axis, double theta);

/// R_x(theta_x) * R_y(theta_y) * R_z(theta_z).
Mat3 compose_euler(const EulerAngles& angles);

/// Rotates every point as a column vector: p' = M p. Identity matrices return
/// the input untouched.
PointCloud apply_rotation(const Mat3& rotation, const PointCloud& cloud);
Points rotate_points(const Mat3& rotation, const Points& points);

/// Gradient of a scalar loss with respect to the Euler angles, given the
/// loss gradient with respect to the rotated points M P.
std::array<double, 3> grad_euler(const EulerAngles& angles, const Points& points,
                                 const Points& grad_rotated);

/// Maps theta to [-pi, pi); pi itself maps to -pi.
double wrap_angle(double theta);
EulerAngles wrap_angles(const EulerAngles& angles);
bool in_canonical_range(const EulerAngles& angles);

/// Largest entry of |M^T M - I|.
double orthonormality_error(const Mat3& m);

}  // namespace orient
