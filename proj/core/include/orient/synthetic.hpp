#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orient/point_cloud.hpp"
#include "orient/rng.hpp"
#include "orient/so3.hpp"

namespace orient {

// Class ids of the procedural primitives.
enum class Primitive : int { cuboid = 0, cylinder = 1, cone = 2, torus = 3 };
inline constexpr int kPrimitiveCount = 4;

std::string_view primitive_name(int class_id);

/// Un-normalized surface sample, z-up. `dims` holds the randomized shape
/// parameters: cuboid half extents (a, b, c); cylinder (radius, half height,
/// 0); cone (base radius, height, 0); torus (major, minor, 0).
struct RawShape {
  Points points;
  std::array<double, 3> dims{};
};

/// Area-uniform samples on the primitive's surface with randomized aspect.
RawShape sample_primitive_surface(int class_id, int n_points, Rng& rng);

/// sample_primitive_surface followed by normalize().
PointCloud generate_shape(int class_id, int n_points, Rng& rng, SampleId id = 0);

/// Acquisition style of one domain. All-zero jitter, bias and occlusion with
/// aniso_scale = 1 leaves a normalized cloud unchanged.
struct DomainProfile {
  std::string name = "domain";
  double jitter_sigma = 0.0;        // coordinate noise std
  double density_bias = 0.0;        // exponent of the directional resampling weight
  double occlusion_fraction = 0.0;  // share of points cut by a random half-space, [0, 0.5]
  double aniso_scale = 1.0;         // per-axis scale drawn log-uniformly in [1/s, s], s >= 1

  void validate() const;
};

/// Anisotropic scale, density-biased resampling, half-space occlusion with
/// resampling back to the input count, jitter, then renormalization.
PointCloud apply_domain_style(const PointCloud& cloud, const DomainProfile& profile, Rng& rng);

/// Adds N(0, sigma^2) noise per coordinate, clipped to [-clip, clip].
Points jitter_points(const Points& points, double sigma, double clip, Rng& rng);

struct AugmentOptions {
  double min_keep = 0.8;
  double max_keep = 1.0;
  bool rotate = true;  // Euler angles uniform over [-pi, pi]^3
  double jitter_sigma = 0.01;
  double jitter_clip = 0.05;
};

/// Random down-sampling (kept points stay in order, then random duplicates
/// re-pad to the input count), random rotation and clipped jitter.
PointCloud augment_baseline(const PointCloud& cloud, Rng& rng, const AugmentOptions& options = {});

enum class Split { train, test };
std::string_view split_name(Split split);

struct Sample {
  PointCloud cloud;
  std::string domain;
  Split split = Split::train;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;

  /// Clouds of one split, or all of them.
  std::vector<PointCloud> clouds(std::optional<Split> split = std::nullopt) const;
};

struct BenchmarkSpec {
  int classes = 4;
  int per_class = 200;
  int points = 256;
  double train_fraction = 0.8;
  DomainProfile source{"source", 0.0, 0.0, 0.0, 1.1};
  DomainProfile target{"target", 0.02, 1.5, 0.25, 1.3};
  std::uint64_t seed = 1;

  void validate() const;
};

struct Benchmark {
  Dataset source;
  Dataset target;
};

/// Same generator for both domains, one style profile each, per-class
/// train/test split inside each domain. Deterministic in spec.seed.
Benchmark build_benchmark(const BenchmarkSpec& spec, int workers = 1);

/// Writes <dir>/source and <dir>/target.
void write_benchmark(const Benchmark& benchmark, const std::filesystem::path& dir);

// Dataset directory: manifest.csv (id,domain,split,class,path) plus one .xyz
// file per cloud, one "x y z" line per point at 17 significant digits.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace orient
