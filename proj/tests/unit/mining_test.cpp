#include <algorithm>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "orient/errors.hpp"
#include "orient/mining.hpp"

namespace orient {
namespace {

std::vector<PointCloud> small_dataset(std::uint64_t seed, int n, int points = 24) {
  Rng rng(seed);
  std::vector<PointCloud> out;
  for (int i = 0; i < n; ++i) out.push_back(normalize(testing::random_cloud(rng, points, i % 2, static_cast<SampleId>(100 + i))));
  return out;
}

MiningConfig quick_config(int repetitions = 10, int steps = 5) {
  MiningConfig c;
  c.repetitions = repetitions;
  c.steps = steps;
  return c;
}

TEST(MiningConfig, DefaultsAndValidation) {
  const MiningConfig c;
  EXPECT_EQ(c.repetitions, 10);
  EXPECT_EQ(c.refresh_period, 20);
  EXPECT_EQ(c.steps, 20);
  EXPECT_EQ(c.step_size, 0.1);
  MiningConfig bad = c;
  bad.repetitions = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = c;
  bad.step_size = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = c;
  bad.refresh_period = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = c;
  bad.steps = -1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(RotatedLossGrad, MatchesFiniteDifferences) {
  const auto data = small_dataset(1, 6);
  const ModelParams model = init_params(3, 2);
  Rng rng(2);
  double worst = 0.0;
  for (const auto& cloud : data) {
    EulerAngles a = testing::random_angles(rng);
    const RotatedLossGrad g = rotated_loss_grad(model, cloud, cloud.label, a);
    EXPECT_DOUBLE_EQ(g.loss, rotated_loss(model, cloud, cloud.label, a));
    auto f = [&] { return rotated_loss(model, cloud, cloud.label, a); };
    const double fd[3] = {testing::central_difference(f, a.theta_x, 1e-5),
                          testing::central_difference(f, a.theta_y, 1e-5),
                          testing::central_difference(f, a.theta_z, 1e-5)};
    for (int k = 0; k < 3; ++k) worst = std::max(worst, testing::relative_error(g.grad[static_cast<std::size_t>(k)], fd[k]));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(MineOrientation, FlatModelReturnsInit) {
  const auto data = small_dataset(2, 1);
  const ModelParams flat(2);
  const EulerAngles init{0.3, -1.2, 2.0};
  const MinedOrientation m = mine_orientation(flat, data[0], 0, init, quick_config());
  EXPECT_EQ(m.angles, init);
  EXPECT_EQ(m.loss, m.initial_loss);
}

TEST(MineOrientation, NeverLosesToItsStart) {
  const auto data = small_dataset(3, 8);
  const ModelParams model = init_params(4, 2);
  Rng rng(3);
  int improved = 0;
  for (const auto& cloud : data) {
    const EulerAngles init = testing::random_angles(rng);
    const MinedOrientation m = mine_orientation(model, cloud, cloud.label, init, quick_config(10, 10));
    EXPECT_GE(m.loss, m.initial_loss - 1e-12);
    EXPECT_DOUBLE_EQ(m.initial_loss, rotated_loss(model, cloud, cloud.label, init));
    EXPECT_DOUBLE_EQ(m.loss, rotated_loss(model, cloud, cloud.label, m.angles));
    EXPECT_TRUE(in_canonical_range(m.angles));
    if (m.loss > m.initial_loss) ++improved;
  }
  EXPECT_GT(improved, 0);
}

TEST(MineOrientation, ZeroStepsKeepsInit) {
  const auto data = small_dataset(4, 1);
  const EulerAngles init{0.5, 0.25, -0.75};
  const MinedOrientation m = mine_orientation(init_params(1, 2), data[0], 1, init, quick_config(10, 0));
  EXPECT_EQ(m.angles, init);
}

TEST(IntricateSet, SizeRangeAndDeterminism) {
  const auto data = small_dataset(5, 5);
  const ModelParams model = init_params(5, 2);
  const IntricateSet a = build_intricate_set(model, data, quick_config(10, 3), 77, 1, 4);
  EXPECT_EQ(a.sample_count(), 5u);
  EXPECT_EQ(a.entry_count(), 50u);
  EXPECT_EQ(a.refresh_epoch(), 4);
  for (const auto& [id, entries] : a.entries()) {
    EXPECT_EQ(entries.size(), 10u);
    for (const auto& e : entries) EXPECT_TRUE(in_canonical_range(e));
  }
  EXPECT_EQ(a, build_intricate_set(model, data, quick_config(10, 3), 77, 1, 4));
  EXPECT_EQ(a, build_intricate_set(model, data, quick_config(10, 3), 77, 3, 4));
  EXPECT_FALSE(a == build_intricate_set(model, data, quick_config(10, 3), 78, 1, 4));
}

TEST(IntricateSet, ZeroStepsStoresUniformStarts) {
  const auto data = small_dataset(6, 3);
  const IntricateSet set = build_intricate_set(init_params(6, 2), data, quick_config(4, 0), 9);
  for (const auto& cloud : data) {
    const auto& entries = set.at(cloud.id);
    for (std::size_t r = 0; r < entries.size(); ++r) {
      Rng rng = make_stream(9, {stream::kMining, cloud.id, r});
      const EulerAngles expected{uniform_angle(rng), uniform_angle(rng), uniform_angle(rng)};
      EXPECT_EQ(entries[r], expected);
    }
  }
}

TEST(IntricateSet, RejectsEmptyDatasetAndUnknownId) {
  const std::vector<PointCloud> empty;
  EXPECT_THROW(build_intricate_set(init_params(1, 2), empty, quick_config(), 1), std::invalid_argument);
  IntricateSet set;
  EXPECT_THROW(set.at(3), not_found);
}

TEST(SampleIntricate, DrawsDistinctStoredEntries) {
  IntricateSet set;
  std::vector<EulerAngles> entries;
  for (int i = 0; i < 10; ++i) entries.push_back({0.1 * i, 0.0, 0.0});
  set.set(7, entries);

  Rng rng(1);
  auto all = sample_intricate(set, 7, 10, rng);
  auto by_x = [](const EulerAngles& a, const EulerAngles& b) { return a.theta_x < b.theta_x; };
  std::sort(all.begin(), all.end(), by_x);
  EXPECT_EQ(all, entries);

  const auto one = sample_intricate(set, 7, 1, rng);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_NE(std::find(entries.begin(), entries.end(), one[0]), entries.end());

  const auto five = sample_intricate(set, 7, 5, rng);
  for (std::size_t i = 0; i < five.size(); ++i) {
    for (std::size_t j = i + 1; j < five.size(); ++j) EXPECT_FALSE(five[i] == five[j]);
  }

  Rng r1(5), r2(5);
  EXPECT_EQ(sample_intricate(set, 7, 4, r1), sample_intricate(set, 7, 4, r2));

  EXPECT_THROW(sample_intricate(set, 8, 1, rng), not_found);
  EXPECT_THROW(sample_intricate(set, 7, 11, rng), std::invalid_argument);
  EXPECT_THROW(sample_intricate(set, 7, 0, rng), std::invalid_argument);
}

TEST(IntricateCsv, RoundTripIsExact) {
  const auto data = small_dataset(7, 4);
  const IntricateSet set = build_intricate_set(init_params(7, 2), data, quick_config(3, 2), 5);
  const auto dir = testing::scratch_dir("intricate");
  write_intricate_csv(dir / "set.csv", set);
  const IntricateSet back = read_intricate_csv(dir / "set.csv");
  EXPECT_EQ(back.entries(), set.entries());
  EXPECT_EQ(testing::read_bytes(dir / "set.csv").substr(0, 26), "id,rep,theta_x,theta_y,the");
  EXPECT_THROW(read_intricate_csv(dir / "absent.csv"), std::runtime_error);
}

}  // namespace
}  // namespace orient
