#include <cmath>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "orient/so3.hpp"

namespace orient {
namespace {

using testing::central_difference;
using testing::relative_error;
constexpr double pi = std::numbers::pi;

TEST(AxisRotation, ZeroAngleIsIdentity) {
  EXPECT_EQ(axis_rotation(Axis::z, 0.0), Mat3::Identity());
}

TEST(AxisRotation, QuarterTurnAboutZ) {
  const Vec3 p = axis_rotation(Axis::z, pi / 2.0) * Vec3(1, 0, 0);
  EXPECT_NEAR((p - Vec3(0, 1, 0)).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(AxisRotation, HalfTurnAboutX) {
  const Vec3 p = axis_rotation(Axis::x, pi) * Vec3(0, 1, 0);
  EXPECT_NEAR((p - Vec3(0, -1, 0)).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(AxisRotation, RejectsNonFiniteAngle) {
  EXPECT_THROW(axis_rotation(Axis::x, std::numeric_limits<double>::quiet_NaN()), std::invalid_argument);
  EXPECT_THROW(axis_rotation_derivative(Axis::y, std::numeric_limits<double>::infinity()),
               std::invalid_argument);
}

TEST(AxisRotationDerivative, XAtZero) {
  Mat3 expected;
  expected << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  EXPECT_EQ(axis_rotation_derivative(Axis::x, 0.0), expected);
}

TEST(AxisRotationDerivative, ZHasConstantThirdRow) {
  for (double theta : {-2.0, 0.3, 1.7}) {
    EXPECT_EQ(axis_rotation_derivative(Axis::z, theta).row(2), Eigen::RowVector3d::Zero());
  }
}

TEST(AxisRotationDerivative, MatchesFiniteDifference) {
  Rng rng(11);
  for (Axis axis : {Axis::x, Axis::y, Axis::z}) {
    for (int trial = 0; trial < 20; ++trial) {
      double theta = uniform_angle(rng);
      const Mat3 analytic = axis_rotation_derivative(axis, theta);
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          const double fd = central_difference([&] { return axis_rotation(axis, theta)(r, c); }, theta, 1e-6);
          EXPECT_NEAR(analytic(r, c), fd, 1e-8);
        }
      }
    }
  }
}

TEST(ComposeEuler, ZeroIsIdentity) { EXPECT_EQ(compose_euler({0, 0, 0}), Mat3::Identity()); }

TEST(ComposeEuler, SingleAxisMatchesAxisRotation) {
  EXPECT_NEAR((compose_euler({0, 0, pi / 2}) - axis_rotation(Axis::z, pi / 2)).cwiseAbs().maxCoeff(), 0.0,
              1e-15);
}

TEST(ComposeEuler, MultipliesXThenYThenZ) {
  const EulerAngles a{0.4, -1.1, 2.5};
  const Mat3 expected = axis_rotation(Axis::x, a.theta_x) * axis_rotation(Axis::y, a.theta_y) *
                        axis_rotation(Axis::z, a.theta_z);
  EXPECT_NEAR((compose_euler(a) - expected).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(ComposeEuler, RandomAnglesGiveRotations) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Mat3 m = compose_euler(testing::random_angles(rng));
    EXPECT_LT(orthonormality_error(m), 1e-12);
    EXPECT_NEAR(m.determinant(), 1.0, 1e-12);
  }
}

TEST(ComposeEuler, PeriodicUnderWrap) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const EulerAngles a{testing::uniform(rng, -20, 20), testing::uniform(rng, -20, 20),
                        testing::uniform(rng, -20, 20)};
    EXPECT_LT((compose_euler(a) - compose_euler(wrap_angles(a))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ApplyRotation, IdentityIsBitExact) {
  Rng rng(1);
  const PointCloud cloud = testing::random_cloud(rng, 50, 3, 42);
  const PointCloud out = apply_rotation(Mat3::Identity(), cloud);
  EXPECT_EQ(out.points, cloud.points);
  EXPECT_EQ(out.id, 42u);
  EXPECT_EQ(out.label, 3);
}

TEST(ApplyRotation, TransposeInverts) {
  Rng rng(2);
  const PointCloud cloud = testing::random_cloud(rng, 64);
  const Mat3 m = compose_euler(testing::random_angles(rng));
  const PointCloud back = apply_rotation(m.transpose(), apply_rotation(m, cloud));
  EXPECT_LT((back.points - cloud.points).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ApplyRotation, TreatsPointsAsColumnVectors) {
  const Mat3 m = compose_euler({0.3, 0.9, -1.2});
  Points p(1, 3);
  p << 0.5, -0.25, 2.0;
  const Vec3 expected = m * Vec3(0.5, -0.25, 2.0);
  const Points out = rotate_points(m, p);
  EXPECT_LT((out.row(0).transpose() - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ApplyRotation, PreservesPairwiseDistances) {
  Rng rng(4);
  const PointCloud cloud = testing::random_cloud(rng, 40);
  const PointCloud out = apply_rotation(compose_euler(testing::random_angles(rng)), cloud);
  for (Eigen::Index i = 0; i < 40; ++i) {
    for (Eigen::Index j = i + 1; j < 40; ++j) {
      EXPECT_NEAR((cloud.points.row(i) - cloud.points.row(j)).norm(),
                  (out.points.row(i) - out.points.row(j)).norm(), 1e-9);
    }
  }
}

TEST(GradEuler, ZeroUpstreamGivesZero) {
  Rng rng(6);
  const Points p = testing::random_points(rng, 10);
  const auto g = grad_euler({0.1, 0.2, 0.3}, p, Points::Zero(10, 3));
  EXPECT_EQ(g, (std::array<double, 3>{0, 0, 0}));
}

TEST(GradEuler, OriginPointGivesZero) {
  Rng rng(7);
  const auto g = grad_euler({0.7, -0.2, 1.3}, Points::Zero(1, 3), testing::random_points(rng, 1));
  EXPECT_EQ(g, (std::array<double, 3>{0, 0, 0}));
}

TEST(GradEuler, RejectsShapeMismatchAndNonFinite) {
  EXPECT_THROW(grad_euler({}, Points::Zero(3, 3), Points::Zero(4, 3)), std::invalid_argument);
  Points bad = Points::Zero(2, 3);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(grad_euler({}, Points::Zero(2, 3), bad), std::invalid_argument);
}

// Non-linear scalar loss of the rotated points: sum w . tanh(p) + 0.5 |p|^2 c.
double toy_loss(const Points& rotated, const Points& weights) {
  return (weights.array() * rotated.array().tanh()).sum() + 0.1 * rotated.array().square().sum();
}

Points toy_loss_grad(const Points& rotated, const Points& weights) {
  return (weights.array() * (1.0 - rotated.array().tanh().square())).matrix() + 0.2 * rotated;
}

TEST(GradEuler, MatchesFiniteDifferenceThroughALoss) {
  Rng rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    EulerAngles a = testing::random_angles(rng);
    const Points p = testing::random_points(rng, 12);
    const Points w = testing::random_points(rng, 12);
    const Points rotated = rotate_points(compose_euler(a), p);
    const auto g = grad_euler(a, p, toy_loss_grad(rotated, w));
    auto loss = [&] { return toy_loss(rotate_points(compose_euler(a), p), w); };
    const double fd[3] = {central_difference(loss, a.theta_x, 1e-5),
                          central_difference(loss, a.theta_y, 1e-5),
                          central_difference(loss, a.theta_z, 1e-5)};
    for (int k = 0; k < 3; ++k) worst = std::max(worst, relative_error(g[static_cast<std::size_t>(k)], fd[k]));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(WrapAngle, Examples) {
  EXPECT_EQ(wrap_angle(0.5), 0.5);
  EXPECT_NEAR(wrap_angle(3.0 * pi / 2.0), -pi / 2.0, 1e-15);
  EXPECT_EQ(wrap_angle(pi), -pi);
  EXPECT_EQ(wrap_angle(-pi), -pi);
  EXPECT_EQ(wrap_angle(2.0 * pi), 0.0);
}

TEST(WrapAngle, AlwaysInCanonicalRange) {
  Rng rng(9);
  for (int i = 0; i < 10000; ++i) {
    const double theta = testing::uniform(rng, -100, 100);
    const double w = wrap_angle(theta);
    EXPECT_GE(w, -pi);
    EXPECT_LT(w, pi);
    EXPECT_NEAR(std::remainder(theta - w, 2.0 * pi), 0.0, 1e-12);
  }
}

TEST(PointCloud, NormalizeCentersAndScales) {
  Rng rng(10);
  PointCloud cloud = testing::random_cloud(rng, 100);
  cloud.points.array() += 3.0;
  const PointCloud n = normalize(cloud);
  EXPECT_LT(centroid(n.points).norm(), 1e-9);
  EXPECT_NEAR(max_norm(n.points), 1.0, 1e-9);
  EXPECT_THROW(normalize(PointCloud{0, Points::Ones(5, 3), 0}), std::invalid_argument);
  EXPECT_THROW(validate_cloud(PointCloud{0, Points(0, 3), 0}), std::invalid_argument);
}

}  // namespace
}  // namespace orient
