#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "orient/evaluation.hpp"
#include "orient/losses.hpp"
#include "orient/mining.hpp"
#include "orient/model.hpp"
#include "orient/point_cloud.hpp"

namespace orient {

/// Which pairing feeds the orientation consistency term.
enum class OcTarget {
  /// Teacher sees the intricate view, student sees the original.
  teacher_on_intricate,
  /// Teacher sees the original, student sees the intricate view.
  teacher_on_original,
};

std::string_view oc_target_name(OcTarget target);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  int num_classes = 4;
  std::uint64_t seed = 1;
  int workers = 1;  // 0 means all available; never changes results
  double lr0 = 1e-3;
  double gamma = 10.0;
  double beta = 0.75;
  double weight_decay = 1e-4;
  double ema_momentum = 0.99;
  MiningConfig mining;
  LossWeights weights;
  int variants = 5;  // V
  OcTarget oc_target = OcTarget::teacher_on_intricate;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double l_cls = 0.0;  // batch means
  double l_oc = 0.0;
  double l_ms = 0.0;
  double l_final = 0.0;
  double lr = 0.0;
  bool refreshed = false;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  ModelParams student;
  ModelParams teacher;
  TrainLog log;
};

struct BatchReport {
  int epoch = 0;
  int batch = 0;
  double l_cls = 0.0;
  double l_oc = 0.0;
  double l_ms = 0.0;
  double l_final = 0.0;
};

struct TrainCallbacks {
  std::function<void(const BatchReport&, const ModelParams& student, const ModelParams& teacher)> on_batch;
  std::function<void(const EpochRecord&, const ModelParams& student, const ModelParams& teacher)> on_epoch;
};

/// Alternates intricate-set refreshes (epoch 0 and every T epochs, mined with
/// the student frozen at the epoch start) with per-batch student updates on
/// L_cls + lambda_oc L_oc + lambda_ms L_ms, each followed by an EMA teacher
/// update. Bit-identical for a fixed config regardless of `workers`. Throws
/// numeric_divergence naming the epoch and batch on a non-finite loss.
TrainResult train(const TrainConfig& config, std::span<const PointCloud> dataset,
                  const TrainCallbacks& callbacks = {});

/// CSV with header epoch,l_cls,l_oc,l_ms,l_final,lr,refreshed.
void write_train_log_csv(const std::filesystem::path& path, const TrainLog& log);

enum class Variant { baseline, iom_only, iom_oc, iom_ms, random_oc_ms, full };
inline constexpr std::array<Variant, 6> kAllVariants = {
    Variant::baseline, Variant::iom_only,     Variant::iom_oc,
    Variant::iom_ms,   Variant::random_oc_ms, Variant::full};

/// baseline, V1, V2, V3, V4, full.
std::string_view variant_name(Variant variant);

/// Maps a variant onto loss weights and mining toggles:
///   baseline      random rotations, no OC, no MS
///   V1 iom_only   mined rotations, no OC, no MS
///   V2 iom_oc     mined rotations, OC
///   V3 iom_ms     mined rotations, MS
///   V4 random_oc_ms random rotations, OC and MS
///   full          mined rotations, OC and MS
/// "Random rotations" means zero ascent steps, so the intricate set keeps its
/// uniform random starts. Mined variants keep config.mining.steps, or use 20
/// when it is 0.
TrainConfig configure_variant(TrainConfig config, Variant variant);

struct AblationRow {
  std::uint64_t seed = 0;
  Variant variant = Variant::full;
  double acc_mean = 0.0;
  double acc_std = 0.0;
  double avg_mean = 0.0;
  double avg_std = 0.0;
  double cst = 0.0;
};

struct AblationOptions {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  bool evaluate_teacher = false;
  EvalOptions eval;
};

/// Trains every variant for every seed on `train_set` and evaluates on
/// `eval_set`. Rows are seed-major, variants in kAllVariants order.
std::vector<AblationRow> run_ablation_matrix(const TrainConfig& config,
                                             std::span<const PointCloud> train_set,
                                             std::span<const PointCloud> eval_set,
                                             const AblationOptions& options = {});

void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows);

}  // namespace orient
