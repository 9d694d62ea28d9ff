#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "orient/linalg.hpp"
#include "orient/model.hpp"
#include "orient/point_cloud.hpp"
#include "orient/so3.hpp"

namespace orient {

inline constexpr int kSeriesLength = 64;

/// The 4 x 4 x 4 grid of {pi/2, pi, 3pi/2, 2pi} per axis in lexicographic
/// (x, y, z) order, wrapped into [-pi, pi). The last entry is the identity.
std::vector<EulerAngles> test_rotation_series();

struct SeriesMetrics {
  EulerAngles angles;
  double acc = 0.0;  // micro accuracy
  double avg = 0.0;  // macro precision
};

/// Per-class mean probability P_m and mean p log p (Ent_m, non-positive) of
/// one sample over the rotation series.
struct EntropyMap {
  Vector mean_probability;
  Vector entropy;
};

struct EvalReport {
  int num_classes = 0;
  std::vector<SeriesMetrics> series;
  double acc_mean = 0.0;
  double acc_std = 0.0;  // population std over the series
  double avg_mean = 0.0;
  double avg_std = 0.0;
  double cst = 0.0;
  std::vector<std::vector<long>> confusion;  // identity series, [true][predicted]
  std::vector<EntropyMap> per_sample;        // filled when requested
};

/// Maps a batch of clouds to class probabilities, one row per cloud.
using Predictor = std::function<RowMatrix(std::span<const PointCloud>)>;

struct EvalOptions {
  int workers = 1;
  bool per_sample_maps = false;
};

EvalReport evaluate_predictor(const Predictor& predict, std::span<const PointCloud> dataset,
                              int num_classes, const EvalOptions& options = {});

/// Softmax of the model's logits under every rotation of the test series.
EvalReport evaluate(const ModelParams& model, std::span<const PointCloud> dataset,
                    const EvalOptions& options = {});

/// Index of the largest entry per row; ties go to the lowest index.
std::vector<int> argmax_rows(const RowMatrix& scores);

double micro_accuracy(std::span<const int> predicted, std::span<const int> labels);

/// Mean over all classes of TP / (TP + FP); a class never predicted counts 0.
double macro_precision(std::span<const int> predicted, std::span<const int> labels, int num_classes);

/// Mean over the rows of KL(row || mean row), for one sample's A x K matrix.
double sample_consistency(const RowMatrix& probabilities);

/// Dataset Cst.: mean of sample_consistency over samples.
double consistency_metric(std::span<const RowMatrix> per_sample);

EntropyMap entropy_map(const RowMatrix& probabilities);

/// Median Euclidean distance over all pairs of the pooled rows.
double median_pairwise_distance(const RowMatrix& a, const RowMatrix& b);

/// Unbiased U-statistic MMD^2 with a Gaussian kernel exp(-d^2 / (2 s^2)).
/// The bandwidth s defaults to the pooled median pairwise distance, or 1
/// when that median is 0.
double mmd2(const RowMatrix& a, const RowMatrix& b, std::optional<double> bandwidth = std::nullopt);

void write_metrics_json(const std::filesystem::path& path, const EvalReport& report);
void write_series_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace orient
