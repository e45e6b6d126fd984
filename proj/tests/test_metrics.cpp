#include <gtest/gtest.h>

#include "crackguide/metrics.hpp"
#include "support.hpp"

namespace crackguide::metrics {
namespace {

MaskGrid with_pixels(int h, int w, std::initializer_list<std::pair<int, int>> on) {
  MaskGrid m(h, w, 0);
  for (auto [y, x] : on) m.at(y, x) = 1;
  return m;
}

TEST(Disc, OffsetCounts) {
  EXPECT_EQ(disc_offsets(0).size(), 1u);
  EXPECT_EQ(disc_offsets(1).size(), 5u);
  EXPECT_EQ(disc_offsets(3).size(), 29u);
  EXPECT_THROW(disc_offsets(-1), ValidationError);
}

TEST(Dilate, ZeroRadiusIsIdentityAndSinglePixelGrowsToDisc) {
  Rng rng(1);
  const auto m = testing::random_mask(9, 11, 0.3, rng);
  EXPECT_EQ(dilate_disc(m, 0), m);
  EXPECT_EQ(count_set(dilate_disc(with_pixels(15, 15, {{7, 7}}), 3)), 29u);
  // Clipped at the corner: the quarter disc including both axes.
  EXPECT_EQ(count_set(dilate_disc(with_pixels(15, 15, {{0, 0}}), 3)), 11u);
}

TEST(Dilate, MonotoneInRadius) {
  Rng rng(2);
  const auto m = testing::random_mask(20, 20, 0.05, rng);
  MaskGrid prev = m;
  for (int r = 1; r <= 4; ++r) {
    const auto d = dilate_disc(m, r);
    for (std::size_t i = 0; i < d.size(); ++i) ASSERT_GE(d[i], prev[i]);
    prev = d;
  }
}

TEST(TolerantCounts, WorkedExamples) {
  const auto near = tolerant_counts(with_pixels(8, 8, {{0, 0}}), with_pixels(8, 8, {{0, 2}}), 3);
  EXPECT_EQ(near, (TolerantCounts{1, 0, 0, 3}));
  const auto far = tolerant_counts(with_pixels(8, 8, {{0, 5}}), with_pixels(8, 8, {{0, 0}}), 3);
  EXPECT_EQ(far, (TolerantCounts{0, 1, 1, 3}));
  // Exactly on the disc boundary counts as a hit.
  EXPECT_EQ(tolerant_counts(with_pixels(8, 8, {{0, 0}}), with_pixels(8, 8, {{0, 3}}), 3).tp, 1);
  EXPECT_EQ(tolerant_counts(with_pixels(8, 8, {{0, 0}}), with_pixels(8, 8, {{2, 3}}), 3).tp, 0);
}

TEST(TolerantCounts, MatchesBruteForce) {
  Rng rng(3);
  for (int t = 0; t < 30; ++t)
    for (int r : {0, 1, 2, 3}) {
      const auto p = testing::random_mask(12, 12, 0.1, rng), g = testing::random_mask(12, 12, 0.1, rng);
      ASSERT_EQ(tolerant_counts(p, g, r), testing::brute_tolerant_counts(p, g, r));
    }
}

TEST(TolerantCounts, RadiusZeroIsExactMatching) {
  Rng rng(4);
  const auto p = testing::random_mask(10, 10, 0.3, rng), g = testing::random_mask(10, 10, 0.3, rng);
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    tp += p[i] && g[i];
    fp += p[i] && !g[i];
    fn += !p[i] && g[i];
  }
  EXPECT_EQ(tolerant_counts(p, g, 0), (TolerantCounts{tp, fp, fn, 0}));
}

TEST(TolerantCounts, ScoresNonDecreasingInRadius) {
  Rng rng(5);
  const auto p = testing::random_mask(16, 16, 0.08, rng), g = testing::random_mask(16, 16, 0.08, rng);
  double prev = -1;
  for (int r = 0; r <= 5; ++r) {
    const auto c = tolerant_counts(p, g, r);
    EXPECT_EQ(c.tp + c.fp, static_cast<std::int64_t>(count_set(p)));
    const double f1 = score(c).f1;
    EXPECT_GE(f1, prev);
    prev = f1;
  }
}

TEST(TolerantCounts, RejectsBadInput) {
  EXPECT_THROW(tolerant_counts(MaskGrid(3, 3, 0), MaskGrid(3, 4, 0), 1), ValidationError);
  EXPECT_THROW(tolerant_counts(MaskGrid(3, 3, 0), MaskGrid(3, 3, 0), -1), ValidationError);
}

TEST(Score, Formulas) {
  const auto perfect = score({10, 0, 0, 3});
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
  EXPECT_EQ(perfect.iou, 1.0);
  EXPECT_EQ(perfect.dice, 1.0);

  const auto mixed = score({5, 5, 5, 3});
  EXPECT_DOUBLE_EQ(mixed.precision, 0.5);
  EXPECT_DOUBLE_EQ(mixed.recall, 0.5);
  EXPECT_DOUBLE_EQ(mixed.f1, 0.5);
  EXPECT_DOUBLE_EQ(mixed.iou, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(mixed.dice, 0.5);

  const auto miss = score({0, 3, 4, 3});
  EXPECT_EQ(miss.precision, 0.0);
  EXPECT_EQ(miss.recall, 0.0);
  EXPECT_EQ(miss.f1, 0.0);
  EXPECT_EQ(miss.iou, 0.0);

  const auto empty = score({0, 0, 0, 3});
  EXPECT_EQ(empty.f1, 1.0);
  EXPECT_EQ(empty.iou, 1.0);
  EXPECT_THROW(score({-1, 0, 0, 3}), ValidationError);
}

TEST(ComputeMetrics, AggregatesFromSummedCounts) {
  Rng rng(6);
  std::vector<ImageRow> rows;
  TolerantCounts total{0, 0, 0, 2};
  double dice_sum = 0;
  for (int i = 0; i < 6; ++i) {
    const auto p = testing::random_mask(12, 12, 0.1, rng), g = testing::random_mask(12, 12, 0.1, rng);
    const auto c = tolerant_counts(p, g, 2);
    rows.push_back({"img" + std::to_string(i), c, {}});
    total += c;
    dice_sum += score(c).dice;
  }
  const auto rep = compute_metrics(rows);
  EXPECT_EQ(rep.total, total);
  const auto expect = score(total);
  EXPECT_NEAR(rep.aggregate.precision, expect.precision, 1e-9);
  EXPECT_NEAR(rep.aggregate.recall, expect.recall, 1e-9);
  EXPECT_NEAR(rep.f1(), expect.f1, 1e-9);
  EXPECT_NEAR(rep.iou(), expect.iou, 1e-9);
  EXPECT_NEAR(rep.dice(), dice_sum / 6, 1e-9);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_DOUBLE_EQ(rep.per_image[i].scores.f1, score(rows[i].counts).f1);
}

TEST(ComputeMetrics, SelfEvaluationIsPerfect) {
  Rng rng(7);
  const auto g = testing::random_mask(14, 14, 0.2, rng);
  const auto s = compute_metrics(tolerant_counts(g, g, 3)).aggregate;
  EXPECT_EQ(s.precision, 1.0);
  EXPECT_EQ(s.recall, 1.0);
  EXPECT_EQ(s.f1, 1.0);
  EXPECT_EQ(s.iou, 1.0);
  EXPECT_EQ(s.dice, 1.0);
}

TEST(Threshold, HalfIsCrack) {
  ProbMap p(1, 3);
  p[0] = 0.49;
  p[1] = 0.5;
  p[2] = 0.51;
  const auto m = threshold(p);
  EXPECT_EQ(m[0], 0);
  EXPECT_EQ(m[1], 1);
  EXPECT_EQ(m[2], 1);
}

TEST(Report, HasHeaderRowsAndAggregate) {
  const auto rep = compute_metrics(std::vector<ImageRow>{{"a", {3, 1, 2, 3}, {}}, {"b", {0, 0, 4, 3}, {}}});
  const auto text = format_report(rep);
  EXPECT_EQ(text.rfind("id,", 0), 0u);
  EXPECT_NE(text.find("\na,3,1,2,"), std::string::npos);
  EXPECT_NE(text.find("\nb,0,0,4,"), std::string::npos);
  EXPECT_NE(text.find("\naggregate,3,1,6,"), std::string::npos);
}

}  // namespace
}  // namespace crackguide::metrics
