#include "orient/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "orient/parallel.hpp"

namespace orient {
namespace {

constexpr double kPi = std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 random_direction(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Vec3 v(n(rng), n(rng), n(rng));
    const double len = v.norm();
    if (len > 1e-12) return v / len;
  }
}

// Picks an index with probability proportional to weights.
std::size_t pick_weighted(const std::vector<double>& weights, Rng& rng) {
  return std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng);
}

Points sample_cuboid(int n, double a, double b, double c, Rng& rng) {
  // Faces in +-x, +-y, +-z order; areas of each pair.
  const std::vector<double> area{b * c, b * c, a * c, a * c, a * b, a * b};
  Points pts(n, 3);
  for (int i = 0; i < n; ++i) {
    const auto face = pick_weighted(area, rng);
    const double sign = (face % 2 == 0) ? 1.0 : -1.0;
    const double u = uniform(rng, -1.0, 1.0);
    const double v = uniform(rng, -1.0, 1.0);
    switch (face / 2) {
      case 0: pts.row(i) << sign * a, u * b, v * c; break;
      case 1: pts.row(i) << u * a, sign * b, v * c; break;
      default: pts.row(i) << u * a, v * b, sign * c; break;
    }
  }
  return pts;
}

Points sample_cylinder(int n, double r, double half_h, Rng& rng) {
  const std::vector<double> area{2.0 * kPi * r * 2.0 * half_h, kPi * r * r, kPi * r * r};
  Points pts(n, 3);
  for (int i = 0; i < n; ++i) {
    const auto part = pick_weighted(area, rng);
    const double phi = uniform(rng, 0.0, 2.0 * kPi);
    if (part == 0) {
      pts.row(i) << r * std::cos(phi), r * std::sin(phi), uniform(rng, -half_h, half_h);
    } else {
      const double rho = r * std::sqrt(uniform(rng, 0.0, 1.0));
      pts.row(i) << rho * std::cos(phi), rho * std::sin(phi), part == 1 ? half_h : -half_h;
    }
  }
  return pts;
}

Points sample_cone(int n, double r, double h, Rng& rng) {
  const double slant = std::hypot(r, h);
  const std::vector<double> area{kPi * r * slant, kPi * r * r};
  Points pts(n, 3);
  for (int i = 0; i < n; ++i) {
    const auto part = pick_weighted(area, rng);
    const double phi = uniform(rng, 0.0, 2.0 * kPi);
    if (part == 0) {
      // Lateral area grows linearly with distance from the apex.
      const double t = std::sqrt(uniform(rng, 0.0, 1.0));
      pts.row(i) << t * r * std::cos(phi), t * r * std::sin(phi), h * (1.0 - t);
    } else {
      const double rho = r * std::sqrt(uniform(rng, 0.0, 1.0));
      pts.row(i) << rho * std::cos(phi), rho * std::sin(phi), 0.0;
    }
  }
  return pts;
}

Points sample_torus(int n, double major, double minor, Rng& rng) {
  Points pts(n, 3);
  for (int i = 0; i < n; ++i) {
    const double theta = uniform(rng, 0.0, 2.0 * kPi);
    double phi = 0.0;
    // Area element is proportional to (major + minor cos phi).
    for (;;) {
      phi = uniform(rng, 0.0, 2.0 * kPi);
      if (uniform(rng, 0.0, major + minor) <= major + minor * std::cos(phi)) break;
    }
    const double ring = major + minor * std::cos(phi);
    pts.row(i) << ring * std::cos(theta), ring * std::sin(theta), minor * std::sin(phi);
  }
  return pts;
}

// Resamples `count` rows with replacement from the survivors.
Points repad(const Points& kept, Eigen::Index count, Rng& rng) {
  Points out(count, 3);
  out.topRows(kept.rows()) = kept;
  std::uniform_int_distribution<Eigen::Index> pick(0, kept.rows() - 1);
  for (Eigen::Index i = kept.rows(); i < count; ++i) out.row(i) = kept.row(pick(rng));
  return out;
}

}  // namespace

std::string_view primitive_name(int class_id) {
  switch (class_id) {
    case 0: return "cuboid";
    case 1: return "cylinder";
    case 2: return "cone";
    case 3: return "torus";
    default: throw std::invalid_argument("unknown primitive class " + std::to_string(class_id));
  }
}

RawShape sample_primitive_surface(int class_id, int n_points, Rng& rng) {
  if (n_points < 32) throw std::invalid_argument("n_points must be >= 32");
  RawShape shape;
  switch (class_id) {
    case 0: {
      const double a = uniform(rng, 0.3, 1.0), b = uniform(rng, 0.3, 1.0), c = uniform(rng, 0.3, 1.0);
      shape.dims = {a, b, c};
      shape.points = sample_cuboid(n_points, a, b, c, rng);
      break;
    }
    case 1: {
      const double r = uniform(rng, 0.3, 0.7), half_h = uniform(rng, 0.4, 1.0);
      shape.dims = {r, half_h, 0.0};
      shape.points = sample_cylinder(n_points, r, half_h, rng);
      break;
    }
    case 2: {
      const double r = uniform(rng, 0.4, 0.8), h = uniform(rng, 0.8, 1.6);
      shape.dims = {r, h, 0.0};
      shape.points = sample_cone(n_points, r, h, rng);
      break;
    }
    case 3: {
      const double major = uniform(rng, 0.6, 0.9), minor = uniform(rng, 0.15, 0.35);
      shape.dims = {major, minor, 0.0};
      shape.points = sample_torus(n_points, major, minor, rng);
      break;
    }
    default:
      throw std::invalid_argument("unknown primitive class " + std::to_string(class_id));
  }
  return shape;
}

PointCloud generate_shape(int class_id, int n_points, Rng& rng, SampleId id) {
  PointCloud cloud;
  cloud.id = id;
  cloud.label = class_id;
  cloud.points = sample_primitive_surface(class_id, n_points, rng).points;
  return normalize(std::move(cloud));
}

void DomainProfile::validate() const {
  if (!(jitter_sigma >= 0.0)) throw std::invalid_argument("jitter_sigma must be >= 0");
  if (!(density_bias >= 0.0)) throw std::invalid_argument("density_bias must be >= 0");
  if (!(occlusion_fraction >= 0.0 && occlusion_fraction <= 0.5)) {
    throw std::invalid_argument("occlusion_fraction must lie in [0, 0.5]");
  }
  if (!(aniso_scale >= 1.0)) throw std::invalid_argument("aniso_scale must be >= 1");
}

Points jitter_points(const Points& points, double sigma, double clip, Rng& rng) {
  if (sigma <= 0.0) return points;
  std::normal_distribution<double> noise(0.0, sigma);
  Points out = points;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (int k = 0; k < 3; ++k) out(i, k) += std::clamp(noise(rng), -clip, clip);
  }
  return out;
}

PointCloud apply_domain_style(const PointCloud& cloud, const DomainProfile& profile, Rng& rng) {
  profile.validate();
  validate_cloud(cloud);
  const Eigen::Index n = cloud.points.rows();
  Points pts = cloud.points;

  if (profile.aniso_scale > 1.0) {
    const double log_s = std::log(profile.aniso_scale);
    for (int k = 0; k < 3; ++k) pts.col(k) *= std::exp(uniform(rng, -log_s, log_s));
  }

  if (profile.density_bias > 0.0) {
    const Vec3 dir = random_direction(rng);
    std::vector<double> w(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      w[static_cast<std::size_t>(i)] = std::exp(profile.density_bias * pts.row(i).dot(dir));
    }
    std::discrete_distribution<Eigen::Index> pick(w.begin(), w.end());
    Points resampled(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) resampled.row(i) = pts.row(pick(rng));
    pts = std::move(resampled);
  }

  if (profile.occlusion_fraction > 0.0) {
    const Vec3 dir = random_direction(rng);
    const auto drop = static_cast<Eigen::Index>(std::floor(profile.occlusion_fraction * static_cast<double>(n)));
    if (drop > 0 && drop < n) {
      std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      const Vector proj = pts * dir;
      std::stable_sort(order.begin(), order.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return proj(a) < proj(b); });
      // Keep the points on the near side of the cutting plane, in input order.
      std::vector<Eigen::Index> keep(order.begin(), order.end() - drop);
      std::sort(keep.begin(), keep.end());
      Points kept(static_cast<Eigen::Index>(keep.size()), 3);
      for (std::size_t i = 0; i < keep.size(); ++i) kept.row(static_cast<Eigen::Index>(i)) = pts.row(keep[i]);
      pts = repad(kept, n, rng);
    }
  }

  pts = jitter_points(pts, profile.jitter_sigma, 4.0 * profile.jitter_sigma, rng);

  PointCloud out;
  out.id = cloud.id;
  out.label = cloud.label;
  out.points = std::move(pts);
  return normalize(std::move(out));
}

PointCloud augment_baseline(const PointCloud& cloud, Rng& rng, const AugmentOptions& options) {
  validate_cloud(cloud);
  const Eigen::Index n = cloud.points.rows();
  const double keep_fraction = options.max_keep > options.min_keep
                                   ? uniform(rng, options.min_keep, options.max_keep)
                                   : options.max_keep;
  const auto keep = std::clamp<Eigen::Index>(
      static_cast<Eigen::Index>(std::ceil(keep_fraction * static_cast<double>(n))), 1, n);

  Points pts;
  if (keep == n) {
    pts = cloud.points;
  } else {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(keep));
    std::sort(idx.begin(), idx.end());
    Points kept(keep, 3);
    for (Eigen::Index i = 0; i < keep; ++i) kept.row(i) = cloud.points.row(idx[static_cast<std::size_t>(i)]);
    pts = repad(kept, n, rng);
  }

  if (options.rotate) {
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    const EulerAngles a{angle(rng), angle(rng), angle(rng)};
    pts = rotate_points(compose_euler(a), pts);
  }
  pts = jitter_points(pts, options.jitter_sigma, options.jitter_clip, rng);

  PointCloud out;
  out.id = cloud.id;
  out.label = cloud.label;
  out.points = std::move(pts);
  return out;
}

std::string_view split_name(Split split) { return split == Split::train ? "train" : "test"; }

std::vector<PointCloud> Dataset::clouds(std::optional<Split> split) const {
  std::vector<PointCloud> out;
  for (const auto& s : samples) {
    if (!split || s.split == *split) out.push_back(s.cloud);
  }
  return out;
}

void BenchmarkSpec::validate() const {
  if (classes < 2 || classes > kPrimitiveCount) {
    throw std::invalid_argument("classes must lie in [2, " + std::to_string(kPrimitiveCount) + "]");
  }
  if (per_class < 10) throw std::invalid_argument("per_class must be >= 10");
  if (points < 32) throw std::invalid_argument("points must be >= 32");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  }
  source.validate();
  target.validate();
}

Benchmark build_benchmark(const BenchmarkSpec& spec, int workers) {
  spec.validate();
  const auto per_domain = static_cast<std::size_t>(spec.classes * spec.per_class);
  const auto train_count =
      static_cast<int>(std::lround(spec.train_fraction * static_cast<double>(spec.per_class)));

  auto make_domain = [&](int domain_index, const DomainProfile& profile) {
    Dataset ds;
    for (int c = 0; c < spec.classes; ++c) ds.class_names.emplace_back(primitive_name(c));
    ds.samples.resize(per_domain);
    parallel_for(per_domain, workers, [&](std::size_t k) {
      const int c = static_cast<int>(k) / spec.per_class;
      const int i = static_cast<int>(k) % spec.per_class;
      const auto key = {static_cast<std::uint64_t>(domain_index), static_cast<std::uint64_t>(c),
                        static_cast<std::uint64_t>(i)};
      Rng shape_rng = make_stream(derive_seed(spec.seed, {stream::kShape}), key);
      Rng style_rng = make_stream(derive_seed(spec.seed, {stream::kStyle}), key);
      const SampleId id = static_cast<SampleId>(domain_index) * per_domain + k;
      PointCloud raw = generate_shape(c, spec.points, shape_rng, id);
      Sample& s = ds.samples[k];
      s.cloud = apply_domain_style(raw, profile, style_rng);
      s.domain = profile.name;
      s.split = i < train_count ? Split::train : Split::test;
    });
    return ds;
  };
  return {make_domain(0, spec.source), make_domain(1, spec.target)};
}

void write_benchmark(const Benchmark& benchmark, const std::filesystem::path& dir) {
  save_dataset(benchmark.source, dir / "source");
  save_dataset(benchmark.target, dir / "target");
}

}  // namespace orient
