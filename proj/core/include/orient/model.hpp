#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orient/linalg.hpp"
#include "orient/point_cloud.hpp"

namespace orient {

// Shared per-point MLP 3 -> 64 -> 64 -> 128 (ReLU), max pool over points,
// then a head 128 -> 64 (ReLU) -> K. Not rotation invariant.
inline constexpr int kPointHidden1 = 64;
inline constexpr int kPointHidden2 = 64;
inline constexpr int kFeatureDim = 128;
inline constexpr int kHeadHidden = 64;

enum class Layer : int { point1 = 0, point2, point3, head1, head2 };
inline constexpr int kNumLayers = 5;

struct ParamSegment {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::size_t offset = 0;
  bool is_bias = false;

  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

/// Weights and biases of one network, stored in a single 64-byte aligned flat
/// buffer; segments may be separated by zero padding that is never trained.
/// Weight matrices are (fan_in x fan_out) so a layer computes x W + b on row
/// vectors. Every mutation refreshes stamp(), which forward caches record.
class ModelParams {
 public:
  explicit ModelParams(int num_classes);
  ModelParams(const ModelParams& other);
  ModelParams& operator=(const ModelParams& other);
  ModelParams(ModelParams&&) noexcept = default;
  ModelParams& operator=(ModelParams&&) noexcept = default;

  int num_classes() const { return num_classes_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> mutable_values();
  const std::vector<ParamSegment>& segments() const { return segments_; }
  const ParamSegment& weight_segment(Layer layer) const;
  const ParamSegment& bias_segment(Layer layer) const;

  Eigen::Map<const RowMatrix> weight(Layer layer) const;
  Eigen::Map<const Vector> bias(Layer layer) const;
  Eigen::Map<RowMatrix> mutable_weight(Layer layer);
  Eigen::Map<Vector> mutable_bias(Layer layer);

  std::uint64_t stamp() const { return stamp_; }
  bool all_finite() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.num_classes_ == b.num_classes_ && a.values_ == b.values_;
  }

 private:
  void touch();

  int num_classes_;
  std::vector<double, Eigen::aligned_allocator<double>> values_;
  std::vector<ParamSegment> segments_;
  std::uint64_t stamp_;
};

std::vector<ParamSegment> param_layout(int num_classes);

/// Scaled-uniform fan-in initialization, biases zero. Deterministic in seed.
ModelParams init_params(std::uint64_t seed, int num_classes);

struct CloudCache {
  Points input;
  RowMatrix h1;  // post-ReLU, N x 64
  RowMatrix h2;  // post-ReLU, N x 64
  std::array<Eigen::Index, kFeatureDim> argmax{};
  Vector feature;  // max-pooled, 128
  Vector hidden;   // head post-ReLU, 64
};

struct ForwardCache {
  std::uint64_t params_stamp = 0;
  int num_classes = 0;
  std::vector<CloudCache> clouds;
};

struct ForwardOutput {
  RowMatrix features;  // B x 128
  RowMatrix logits;    // B x K
  ForwardCache cache;
};

enum class CacheMode { keep, discard };

ForwardOutput forward(const ModelParams& params, std::span<const PointCloud> batch,
                      int workers = 1, CacheMode mode = CacheMode::keep);

struct Gradients {
  ModelParams params;
  std::vector<Points> points;
};

/// Exact gradients of sum(dlogits .* logits) + sum(dfeatures .* features).
/// An empty dfeatures matrix is treated as zero. Max pooling routes gradient
/// to the lowest-index argmax point of each channel. Throws invalid_state if
/// the cache was not produced by `params` in its current state, or its batch
/// size disagrees with the upstream gradients.
Gradients backward(const ModelParams& params, const ForwardCache& cache, const RowMatrix& dlogits,
                   const RowMatrix& dfeatures, int workers = 1);

}  // namespace orient
