#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "orient/model.hpp"
#include "orient/point_cloud.hpp"
#include "orient/rng.hpp"
#include "orient/so3.hpp"

namespace orient {

struct MiningConfig {
  int repetitions = 10;     // AT: mined triples kept per sample
  int steps = 20;           // ascent iterations; 0 keeps the random inits
  double step_size = 0.1;   // radians per step, on the inf-norm-normalized gradient
  int refresh_period = 20;  // T: epochs between rebuilds of the intricate set

  void validate() const;
};

/// Cross-entropy of `model` on `cloud` rotated by compose_euler(angles).
double rotated_loss(const ModelParams& model, const PointCloud& cloud, int label,
                    const EulerAngles& angles);

struct RotatedLossGrad {
  double loss = 0.0;
  std::array<double, 3> grad{};
};

/// Loss and its gradient w.r.t. the Euler angles (network point gradient
/// chained through grad_euler).
RotatedLossGrad rotated_loss_grad(const ModelParams& model, const PointCloud& cloud, int label,
                                  const EulerAngles& angles);

struct MinedOrientation {
  EulerAngles angles;
  double loss = 0.0;          // loss at `angles`
  double initial_loss = 0.0;  // loss at the initialization
};

/// Normalized gradient ascent on the classification loss over Euler angles,
/// wrapping into [-pi, pi) after each step. Returns the best iterate seen, so
/// the reported loss never falls below the loss at `init`. Stops early on a
/// zero gradient or a non-finite loss.
MinedOrientation mine_orientation(const ModelParams& model, const PointCloud& cloud, int label,
                                  const EulerAngles& init, const MiningConfig& config);

/// Per-sample mined orientations, AT entries each.
class IntricateSet {
 public:
  IntricateSet() = default;
  explicit IntricateSet(int refresh_epoch) : refresh_epoch_(refresh_epoch) {}

  int refresh_epoch() const { return refresh_epoch_; }
  void set(SampleId id, std::vector<EulerAngles> entries);
  /// Throws not_found for an unknown id.
  const std::vector<EulerAngles>& at(SampleId id) const;
  bool contains(SampleId id) const { return entries_.contains(id); }
  std::size_t sample_count() const { return entries_.size(); }
  std::size_t entry_count() const;
  const std::map<SampleId, std::vector<EulerAngles>>& entries() const { return entries_; }

  friend bool operator==(const IntricateSet&, const IntricateSet&) = default;

 private:
  int refresh_epoch_ = 0;
  std::map<SampleId, std::vector<EulerAngles>> entries_;
};

/// Mines AT orientations per sample from uniform random starts. The start for
/// (sample id, repetition) comes from a stream derived from `seed`, so the
/// result is independent of `workers`. A failed run keeps its random start.
IntricateSet build_intricate_set(const ModelParams& model, std::span<const PointCloud> dataset,
                                 const MiningConfig& config, std::uint64_t seed, int workers = 1,
                                 int refresh_epoch = 0);

/// `count` distinct entries drawn uniformly without replacement.
std::vector<EulerAngles> sample_intricate(const IntricateSet& set, SampleId id, int count, Rng& rng);

/// CSV with header `id,rep,theta_x,theta_y,theta_z`, 17 significant digits.
void write_intricate_csv(const std::filesystem::path& path, const IntricateSet& set);
IntricateSet read_intricate_csv(const std::filesystem::path& path);

}  // namespace orient
