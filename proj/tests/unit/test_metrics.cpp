#include <gtest/gtest.h>

#include <cmath>

#include "sess/errors.hpp"
#include "sess/metrics.hpp"

namespace {

using namespace sess;

RasterImage top_left_image(int side = 224) {
  RasterImage img(side, side, 0.1f);
  for (int y = 0; y < side / 2; ++y) {
    for (int x = 0; x < side / 2; ++x) {
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = 0.9f;
    }
  }
  return img;
}

GrayMap top_left_saliency(int side = 224) {
  GrayMap m(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      // peaked at the center of the top-left quadrant
      const double d = std::hypot(x - side / 4.0, y - side / 4.0);
      m.at(y, x) = static_cast<float>(std::exp(-d / (side / 4.0)));
    }
  }
  return m;
}

double forward(const ClassifierBackend& b, const RasterImage& img, int c) {
  const std::vector<RasterImage> batch{img};
  return class_scores(b, batch, c, 1).front();
}

TEST(CurveArithmetic, PixelsPerStep) {
  EXPECT_EQ(pixels_per_step(224 * 224, 0.036), 1806u);
  EXPECT_EQ(pixels_per_step(10, 0.01), 1u);
  EXPECT_THROW(pixels_per_step(100, 0.0), InvalidArgument);
}

TEST(CurveArithmetic, DeletionStepsAt224) {
  const auto mock = make_quadrant_mock();
  const auto r = deletion_curve(top_left_image(), top_left_saliency(), *mock, 0);
  EXPECT_EQ(r.pixels_per_step, 1806u);
  EXPECT_EQ(r.steps, 28u);
  ASSERT_EQ(r.fractions.size(), 29u);
  ASSERT_EQ(r.scores.size(), 29u);
  EXPECT_EQ(r.fractions.front(), 0.0);
  EXPECT_EQ(r.fractions.back(), 1.0);
  for (std::size_t i = 1; i < r.fractions.size(); ++i) EXPECT_LT(r.fractions[i - 1], r.fractions[i]);
}

TEST(Trapezoid, KnownAreas) {
  const std::vector<double> x{0, 0.5, 1}, y{1, 1, 1}, ramp{0, 0.5, 1};
  EXPECT_DOUBLE_EQ(trapezoid_auc(x, y), 1.0);
  EXPECT_DOUBLE_EQ(trapezoid_auc(x, ramp), 0.5);
  const std::vector<double> one{0};
  EXPECT_THROW(trapezoid_auc(one, one), InvalidArgument);
}

TEST(SaliencyOrder, TiesAreRowMajor) {
  const GrayMap flat(3, 4, 0.2f);
  const auto order = saliency_order(flat);
  for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(order[i], i);
  const GrayMap m(1, 4, {0.1f, 0.5f, 0.5f, 0.9f});
  EXPECT_EQ(saliency_order(m), (std::vector<std::size_t>{3, 1, 2, 0}));
}

TEST(OverallScore, TableArithmetic) {
  CurveResult ins, del;
  ins.kind = CurveKind::kInsertion;
  del.kind = CurveKind::kDeletion;
  ins.auc = 0.681;
  del.auc = 0.121;
  EXPECT_NEAR(overall_score(ins, del), 0.560, 1e-12);
  ins.auc = 0.686;
  del.auc = 0.113;
  EXPECT_NEAR(overall_score(ins, del), 0.573, 1e-12);
  del.auc = 0.686;
  EXPECT_DOUBLE_EQ(overall_score(ins, del), 0.0);
  EXPECT_THROW(overall_score(del, ins), InvalidArgument);
  del.target = 2;
  EXPECT_THROW(overall_score(ins, del), InvalidArgument);
}

TEST(Curves, Endpoints) {
  const auto mock = make_quadrant_mock();
  const auto img = top_left_image();
  const auto sal = top_left_saliency();
  const auto del = deletion_curve(img, sal, *mock, 0);
  const auto ins = insertion_curve(img, sal, *mock, 0);
  EXPECT_EQ(del.scores.front(), forward(*mock, img, 0));
  EXPECT_EQ(del.scores.back(), forward(*mock, RasterImage(224, 224), 0));
  EXPECT_EQ(ins.scores.back(), forward(*mock, img, 0));
  for (const auto* r : {&del, &ins}) {
    EXPECT_GE(r->auc, 0.0);
    EXPECT_LE(r->auc, 1.0);
  }
}

TEST(Curves, CorrectSaliencyGivesPositiveOverall) {
  const auto mock = make_quadrant_mock();
  const auto img = top_left_image();
  const auto sal = top_left_saliency();
  const auto ins = insertion_curve(img, sal, *mock, 0);
  const auto del = deletion_curve(img, sal, *mock, 0);
  EXPECT_GT(overall_score(ins, del), 0.0);
}

TEST(Curves, PeakedSaliencyDeletesFasterThanUniform) {
  const auto mock = make_quadrant_mock();
  const auto img = top_left_image();
  const auto peaked = deletion_curve(img, top_left_saliency(), *mock, 0);
  const auto uniform = deletion_curve(img, GrayMap(224, 224, 1.0f), *mock, 0);
  for (std::size_t i = 1; i <= 4; ++i) EXPECT_LT(peaked.scores[i], uniform.scores[i]);
}

TEST(Curves, DescendingOrderBeatsAscending) {
  const auto mock = make_quadrant_mock();
  const auto img = top_left_image();
  const auto sal = top_left_saliency();
  GrayMap reversed = sal;
  for (auto& v : reversed.values()) v = 1.0f - v;
  EXPECT_LE(deletion_curve(img, sal, *mock, 0).auc, deletion_curve(img, reversed, *mock, 0).auc);
}

TEST(Curves, ZeroSaliencyIsDefined) {
  const auto mock = make_quadrant_mock();
  const auto r = insertion_curve(top_left_image(), GrayMap(224, 224), *mock, 0);
  EXPECT_EQ(r.scores.size(), 29u);
  EXPECT_TRUE(std::isfinite(r.auc));
}

TEST(Curves, ResamplesToModelInput) {
  const auto mock = make_quadrant_mock();
  const auto r = deletion_curve(top_left_image(300), top_left_saliency(300), *mock, 0);
  EXPECT_EQ(r.pixels_per_step, 1806u);
}

TEST(Curves, MeanFillDeletion) {
  const auto mock = make_quadrant_mock();
  CurveOptions opts;
  opts.deletion_fill = DeletionFill::kMean;
  const auto r = deletion_curve(top_left_image(), top_left_saliency(), *mock, 0, opts);
  // A flat gray image scores uniformly under the mock.
  EXPECT_NEAR(r.scores.back(), 0.25, 1e-6);
}

TEST(Curves, RejectsMismatchedInputs) {
  const auto mock = make_quadrant_mock();
  EXPECT_THROW(deletion_curve(top_left_image(), GrayMap(224, 200), *mock, 0), ShapeMismatch);
  GrayMap bad(224, 224);
  bad.at(3, 3) = std::nanf("");
  EXPECT_THROW(insertion_curve(top_left_image(), bad, *mock, 0), NonFiniteOutput);
}

GrayMap peak_at(int h, int w, int px, int py) {
  GrayMap m(h, w, 0.1f);
  m.at(py, px) = 1.0f;
  return m;
}

TEST(PointingGame, Containment) {
  const std::vector<Box> box{{0, 0, 20, 20}};
  EXPECT_TRUE(pointing_game(peak_at(40, 40, 10, 10), box));
  EXPECT_FALSE(pointing_game(peak_at(40, 40, 30, 10), box));
  EXPECT_TRUE(pointing_game(peak_at(40, 40, 20, 20), box));  // inclusive edge
  EXPECT_FALSE(pointing_game(peak_at(40, 40, 21, 20), box));
}

TEST(PointingGame, AnyBoxCounts) {
  const std::vector<Box> boxes{{0, 0, 5, 5}, {25, 5, 35, 15}};
  EXPECT_TRUE(pointing_game(peak_at(40, 40, 30, 10), boxes));
}

TEST(PointingGame, TieTakesFirstRowMajor) {
  GrayMap m(40, 40, 0.0f);
  m.at(5, 30) = 1.0f;  // first in row-major order
  m.at(30, 5) = 1.0f;
  const std::vector<Box> right{{25, 0, 39, 10}}, left{{0, 25, 10, 39}};
  EXPECT_TRUE(pointing_game(m, right));
  EXPECT_FALSE(pointing_game(m, left));
}

TEST(PointingGame, Tolerance) {
  const std::vector<Box> box{{0, 0, 20, 20}};
  EXPECT_FALSE(pointing_game(peak_at(40, 40, 30, 10), box));
  EXPECT_TRUE(pointing_game(peak_at(40, 40, 30, 10), box, 15.0));
  EXPECT_THROW(pointing_game(peak_at(40, 40, 30, 10), box, -1.0), InvalidArgument);
}

TEST(PointingGame, MonotoneRescaleInvariance) {
  GrayMap m(30, 30);
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 30; ++x) m.at(y, x) = static_cast<float>(std::sin(x * 0.3) * std::cos(y * 0.2));
  }
  GrayMap t = m;
  for (auto& v : t.values()) v = std::exp(3.0f * v) - 2.0f;
  const std::vector<Box> box{{0, 0, 14, 29}};
  EXPECT_EQ(pointing_game(m, box), pointing_game(t, box));
  EXPECT_EQ(saliency_peak(m).x, saliency_peak(t).x);
  EXPECT_EQ(saliency_peak(m).y, saliency_peak(t).y);
}

TEST(PointingGame, EmptyBoxesRejected) {
  EXPECT_THROW(pointing_game(peak_at(10, 10, 1, 1), {}), InvalidArgument);
}

TEST(AggregatePointing, Arithmetic) {
  const std::vector<PointingRecord> recs{{0, true}, {0, true}, {0, false}, {0, true},
                                         {1, true}, {1, false}};
  const auto r = aggregate_pointing(recs);
  EXPECT_DOUBLE_EQ(r.per_class.at(0).acc, 0.75);
  EXPECT_DOUBLE_EQ(r.per_class.at(1).acc, 0.5);
  EXPECT_DOUBLE_EQ(r.mean_acc, 0.625);
  const std::vector<PointingRecord> all_hits{{4, true}, {4, true}};
  EXPECT_DOUBLE_EQ(aggregate_pointing(all_hits).mean_acc, 1.0);
}

}  // namespace
