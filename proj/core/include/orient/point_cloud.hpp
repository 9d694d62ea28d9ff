#pragma once

#include <cstdint>

#include "orient/linalg.hpp"

namespace orient {

using SampleId = std::uint64_t;

struct PointCloud {
  SampleId id = 0;
  Points points;
  int label = 0;
};

/// Throws std::invalid_argument when the cloud is empty or holds a
/// non-finite coordinate.
void validate_cloud(const PointCloud& cloud);

/// Translates the centroid to the origin and scales so the farthest point has
/// unit norm. A cloud whose points all coincide cannot be normalized.
PointCloud normalize(PointCloud cloud);

Vec3 centroid(const Points& points);
double max_norm(const Points& points);

}  // namespace orient
