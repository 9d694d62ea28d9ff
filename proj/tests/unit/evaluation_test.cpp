#include <cmath>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "orient/evaluation.hpp"

namespace orient {
namespace {

constexpr double pi = std::numbers::pi;

std::vector<PointCloud> balanced_set(int classes, int per_class, std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<PointCloud> out;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      out.push_back(testing::random_cloud(rng, 16, c, static_cast<SampleId>(out.size())));
    }
  }
  return out;
}

RowMatrix one_hot_rows(const std::vector<int>& classes, int k) {
  RowMatrix p = RowMatrix::Zero(static_cast<Eigen::Index>(classes.size()), k);
  for (std::size_t i = 0; i < classes.size(); ++i) p(static_cast<Eigen::Index>(i), classes[i]) = 1.0;
  return p;
}

TEST(RotationSeries, SixtyFourWrappedRotationsEndingInIdentity) {
  const auto series = test_rotation_series();
  ASSERT_EQ(series.size(), 64u);
  EXPECT_EQ(series.back(), (EulerAngles{0.0, 0.0, 0.0}));
  EXPECT_LT((compose_euler(series.back()) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  for (const auto& a : series) {
    EXPECT_TRUE(in_canonical_range(a));
    const Mat3 m = compose_euler(a);
    EXPECT_LT(orthonormality_error(m), 1e-12);
    EXPECT_NEAR(m.determinant(), 1.0, 1e-12);
  }
  // Lexicographic with x outermost: grid values pi/2, pi, 3pi/2, 2pi wrapped.
  EXPECT_NEAR(series[0].theta_x, pi / 2, 1e-15);
  EXPECT_NEAR(series[0].theta_z, pi / 2, 1e-15);
  EXPECT_EQ(series[1].theta_z, -pi);
  EXPECT_NEAR(series[2].theta_z, -pi / 2, 1e-15);
  EXPECT_EQ(series[4].theta_y, -pi);
  EXPECT_EQ(series[16].theta_x, -pi);
  for (std::size_t i = 0; i < series.size(); ++i) {
    for (std::size_t j = i + 1; j < series.size(); ++j) EXPECT_FALSE(series[i] == series[j]);
  }
}

TEST(Metrics, HandCountedFixtures) {
  // Constant predictor on a balanced 4-class set.
  const std::vector<int> labels{0, 0, 1, 1, 2, 2, 3, 3};
  const std::vector<int> constant(8, 2);
  EXPECT_NEAR(micro_accuracy(constant, labels), 0.25, 1e-9);
  EXPECT_NEAR(macro_precision(constant, labels, 4), 0.0625, 1e-9);

  // Class A: 2 of 2 predictions correct; class B: 1 of 2 correct.
  const std::vector<int> truth{0, 0, 1, 0};
  const std::vector<int> pred{0, 0, 1, 1};
  EXPECT_NEAR(macro_precision(pred, truth, 2), 0.75, 1e-9);
  EXPECT_NEAR(micro_accuracy(pred, truth), 0.75, 1e-9);

  // Equal per-class precision makes macro equal micro.
  const std::vector<int> t2{0, 1, 1, 0};
  const std::vector<int> p2{0, 0, 1, 1};
  EXPECT_EQ(macro_precision(p2, t2, 2), micro_accuracy(p2, t2));

  EXPECT_THROW(micro_accuracy(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
  EXPECT_THROW(macro_precision(std::vector<int>{5}, std::vector<int>{0}, 2), std::invalid_argument);
}

TEST(Consistency, Fixtures) {
  const RowMatrix same = RowMatrix::Constant(64, 3, 1.0 / 3.0);
  EXPECT_NEAR(sample_consistency(same), 0.0, 1e-12);

  std::vector<int> alternating;
  for (int a = 0; a < 64; ++a) alternating.push_back(a % 2);
  EXPECT_NEAR(sample_consistency(one_hot_rows(alternating, 2)), std::log(2.0), 1e-9);

  const std::vector<RowMatrix> both{same, one_hot_rows(alternating, 3)};
  EXPECT_NEAR(consistency_metric(both), 0.5 * std::log(2.0), 1e-9);

  RowMatrix invalid = same;
  invalid(0, 0) = 0.9;
  EXPECT_THROW(sample_consistency(invalid), std::invalid_argument);
  invalid = same;
  invalid(3, 1) = -1e-3;
  invalid(3, 2) += 1e-3;
  EXPECT_THROW(sample_consistency(invalid), std::invalid_argument);
}

TEST(Consistency, NonNegativeAndZeroOnlyForEqualRows) {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    RowMatrix p = testing::random_matrix(rng, 64, 4).array().exp();
    for (Eigen::Index r = 0; r < p.rows(); ++r) p.row(r) /= p.row(r).sum();
    EXPECT_GT(sample_consistency(p), 0.0);
  }
}

TEST(EntropyMap, Fixtures) {
  const EntropyMap one_hot = entropy_map(one_hot_rows(std::vector<int>(64, 1), 3));
  EXPECT_EQ(one_hot.mean_probability, (Vector(3) << 0, 1, 0).finished());
  EXPECT_EQ(one_hot.entropy, Vector::Zero(3));

  const EntropyMap uniform = entropy_map(RowMatrix::Constant(64, 2, 0.5));
  EXPECT_NEAR(uniform.mean_probability(0), 0.5, 1e-15);
  EXPECT_NEAR(uniform.entropy(0), 0.5 * std::log(0.5), 1e-12);
  EXPECT_NEAR(uniform.entropy(1), -0.34657359027997264, 1e-12);

  Rng rng(3);
  RowMatrix p = testing::random_matrix(rng, 64, 5).array().exp();
  for (Eigen::Index r = 0; r < p.rows(); ++r) p.row(r) /= p.row(r).sum();
  EXPECT_NEAR(entropy_map(p).mean_probability.sum(), 1.0, 1e-9);
}

TEST(Mmd, IdenticalPointSetsGiveZero) {
  const RowMatrix a = RowMatrix::Constant(5, 4, 0.3);
  EXPECT_NEAR(mmd2(a, a), 0.0, 1e-15);
  EXPECT_THROW(mmd2(RowMatrix::Zero(1, 4), a), std::invalid_argument);
  EXPECT_THROW(mmd2(a, RowMatrix::Zero(3, 5)), std::invalid_argument);
  EXPECT_THROW(mmd2(a, a, 0.0), std::invalid_argument);
}

TEST(Mmd, SeparatedBlobsAndSymmetry) {
  Rng rng(4);
  const RowMatrix a = testing::random_matrix(rng, 60, 8, 0.1);
  RowMatrix b = testing::random_matrix(rng, 50, 8, 0.1);
  b.array() += 5.0;
  EXPECT_GT(mmd2(a, b), 0.5);
  EXPECT_NEAR(mmd2(a, b), mmd2(b, a), 1e-12);
}

TEST(Mmd, SameDistributionHalvesConcentrateNearZero) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const RowMatrix a = testing::random_matrix(rng, 200, 128);
    const RowMatrix b = testing::random_matrix(rng, 200, 128);
    EXPECT_LT(std::abs(mmd2(a, b)), 0.05) << "seed " << seed;
  }
}

TEST(Mmd, MedianHeuristic) {
  RowMatrix a(2, 1), b(2, 1);
  a << 0, 1;
  b << 3, 7;
  // Pairwise distances 1, 3, 7, 2, 6, 4: median (3 + 4) / 2.
  EXPECT_DOUBLE_EQ(median_pairwise_distance(a, b), 3.5);
  EXPECT_DOUBLE_EQ(mmd2(a, b), mmd2(a, b, 3.5));
}

TEST(Evaluate, PerfectClassifier) {
  const auto data = balanced_set(4, 5);
  const Predictor perfect = [](std::span<const PointCloud> batch) {
    std::vector<int> labels;
    for (const auto& c : batch) labels.push_back(c.label);
    return one_hot_rows(labels, 4);
  };
  const EvalReport r = evaluate_predictor(perfect, data, 4, {2, false});
  ASSERT_EQ(r.series.size(), 64u);
  for (const auto& s : r.series) {
    EXPECT_EQ(s.acc, 1.0);
    EXPECT_EQ(s.avg, 1.0);
  }
  EXPECT_EQ(r.acc_mean, 1.0);
  EXPECT_EQ(r.acc_std, 0.0);
  EXPECT_EQ(r.avg_std, 0.0);
  EXPECT_EQ(r.cst, 0.0);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(r.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)], 5);
}

TEST(Evaluate, ConstantOutputModel) {
  ModelParams constant(4);
  constant.mutable_bias(Layer::head2) << 0.1, 0.7, -0.2, 0.0;
  const auto data = balanced_set(4, 3);
  const EvalReport r = evaluate(constant, data, {1, true});
  EXPECT_NEAR(r.acc_mean, 0.25, 1e-12);
  EXPECT_NEAR(r.avg_mean, 0.0625, 1e-12);
  EXPECT_EQ(r.acc_std, 0.0);
  EXPECT_NEAR(r.cst, 0.0, 1e-15);
  ASSERT_EQ(r.per_sample.size(), data.size());
  EXPECT_NEAR(r.per_sample[0].mean_probability.sum(), 1.0, 1e-9);
}

TEST(Evaluate, IdentitySeriesMatchesUnrotatedData) {
  const auto data = balanced_set(3, 6, 5);
  const ModelParams model = init_params(5, 3);
  const EvalReport r = evaluate(model, data, {3, false});
  const auto logits = forward(model, data).logits;
  const auto pred = argmax_rows(logits);
  std::vector<int> labels;
  for (const auto& c : data) labels.push_back(c.label);
  EXPECT_EQ(r.series.back().acc, micro_accuracy(pred, labels));
  EXPECT_EQ(r.series.back().avg, macro_precision(pred, labels, 3));
  long total = 0;
  for (const auto& row : r.confusion) for (long v : row) total += v;
  EXPECT_EQ(total, static_cast<long>(data.size()));
  EXPECT_GE(r.acc_std, 0.0);
  EXPECT_GE(r.avg_std, 0.0);
}

TEST(Evaluate, WorkerCountDoesNotChangeTheReport) {
  const auto data = balanced_set(3, 4, 6);
  const ModelParams model = init_params(6, 3);
  const EvalReport a = evaluate(model, data, {1, false});
  const EvalReport b = evaluate(model, data, {4, false});
  EXPECT_EQ(a.acc_mean, b.acc_mean);
  EXPECT_EQ(a.avg_std, b.avg_std);
  EXPECT_EQ(a.cst, b.cst);
}

TEST(Evaluate, RejectsBadInput) {
  const std::vector<PointCloud> empty;
  EXPECT_THROW(evaluate(init_params(1, 2), empty), std::invalid_argument);
  auto data = balanced_set(2, 2);
  data[0].label = 5;
  EXPECT_THROW(evaluate(init_params(1, 2), data), std::invalid_argument);
  const Predictor wrong = [](std::span<const PointCloud> batch) {
    return RowMatrix::Constant(static_cast<Eigen::Index>(batch.size()), 3, 1.0 / 3.0);
  };
  EXPECT_THROW(evaluate_predictor(wrong, balanced_set(2, 2), 2), std::invalid_argument);
}

TEST(Evaluate, WritesMetricsAndSeries) {
  const auto dir = testing::scratch_dir("evaluation");
  const EvalReport r = evaluate(init_params(2, 2), balanced_set(2, 3));
  write_metrics_json(dir / "metrics.json", r);
  write_series_csv(dir / "series.csv", r);
  std::ifstream in(dir / "metrics.json");
  const auto doc = nlohmann::json::parse(in);
  for (const char* key : {"acc_mean", "acc_std", "avg_mean", "avg_std", "cst", "series_acc", "series_avg",
                          "confusion"}) {
    EXPECT_TRUE(doc.contains(key)) << key;
  }
  EXPECT_EQ(doc["series_acc"].size(), 64u);
  EXPECT_DOUBLE_EQ(doc["cst"].get<double>(), r.cst);
  const std::string csv = testing::read_bytes(dir / "series.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 65);
  EXPECT_EQ(csv.substr(0, 28), "theta_x,theta_y,theta_z,acc,");
}

}  // namespace
}  // namespace orient
