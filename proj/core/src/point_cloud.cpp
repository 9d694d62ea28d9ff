#include "orient/point_cloud.hpp"

#include <stdexcept>
#include <string>

namespace orient {

void validate_cloud(const PointCloud& cloud) {
  if (cloud.points.rows() < 1) {
    throw std::invalid_argument("point cloud " + std::to_string(cloud.id) + " is empty");
  }
  if (!cloud.points.allFinite()) {
    throw std::invalid_argument("point cloud " + std::to_string(cloud.id) +
                                " has non-finite coordinates");
  }
}

Vec3 centroid(const Points& points) { return points.colwise().mean().transpose(); }

double max_norm(const Points& points) {
  return points.rows() == 0 ? 0.0 : points.rowwise().norm().maxCoeff();
}

PointCloud normalize(PointCloud cloud) {
  validate_cloud(cloud);
  const Vec3 c = centroid(cloud.points);
  cloud.points.rowwise() -= c.transpose();
  const double scale = max_norm(cloud.points);
  if (!(scale > 0.0)) {
    throw std::invalid_argument("point cloud " + std::to_string(cloud.id) +
                                " is degenerate (all points coincide)");
  }
  cloud.points /= scale;
  return cloud;
}

}  // namespace orient
