#include <gtest/gtest.h>

#include <random>

#include "generators.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "wicketlens/detections.hpp"
#include "wicketlens/segmenter.hpp"

namespace wl = wicketlens;

namespace {

wl::Detection det(double cx, double cy, double w, double h, std::optional<double> conf = std::nullopt, int cat = 0) {
  return {cat, {cx, cy, w, h}, conf};
}

// Box from corner coordinates in [0,1].
wl::BBoxNorm corners(double x0, double y0, double x1, double y1) {
  return {(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
}

void expect_kind(wl::ErrorKind kind, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << wl::to_string(kind);
  } catch (const wl::Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

}  // namespace

TEST(Yolo, WorkedExamples) {
  auto d = wl::parse_yolo_text("0 0.5 0.5 0.1 0.2");
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].category, 0);
  EXPECT_EQ(d[0].bbox, (wl::BBoxNorm{0.5, 0.5, 0.1, 0.2}));
  EXPECT_FALSE(d[0].confidence);
  d = wl::parse_yolo_text("0 0.5 0.5 0.1 0.2 0.93");
  ASSERT_TRUE(d[0].confidence);
  EXPECT_DOUBLE_EQ(*d[0].confidence, 0.93);
  expect_kind(wl::ErrorKind::Validation, [] { (void)wl::parse_yolo_text("0 1.5 0.5 0.1 0.2"); });
}

TEST(Yolo, ErrorsCarryLineNumbers) {
  try {
    (void)wl::parse_yolo_text("0 0.5 0.5 0.1 0.2\n\n0 0.5 x 0.1 0.2\n", "f.txt");
    FAIL();
  } catch (const wl::Error& e) {
    EXPECT_EQ(e.kind(), wl::ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("f.txt:3"), std::string::npos) << e.what();
  }
  expect_kind(wl::ErrorKind::Parse, [] { (void)wl::parse_yolo_text("0 0.5 0.5 0.1"); });
  expect_kind(wl::ErrorKind::Parse, [] { (void)wl::parse_yolo_text("a 0.5 0.5 0.1 0.1"); });
  expect_kind(wl::ErrorKind::Parse, [] { (void)wl::parse_yolo_text("0 0.5 0.5 0.1 0.1 0.3 9"); });
  expect_kind(wl::ErrorKind::Validation, [] { (void)wl::parse_yolo_text("0 0.5 0.5 0 0.1"); });
  expect_kind(wl::ErrorKind::Validation, [] { (void)wl::parse_yolo_text("0 0.5 0.5 0.1 0.1 1.2"); });
  expect_kind(wl::ErrorKind::Validation, [] { (void)wl::parse_yolo_text("-1 0.5 0.5 0.1 0.1"); });
}

TEST(Yolo, FormatParseRoundTrip) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<wl::Detection> dets;
  for (int i = 0; i < 50; ++i)
    dets.push_back(det(u(rng), u(rng), 0.001 + 0.999 * u(rng), 0.001 + 0.999 * u(rng),
                       i % 2 ? std::optional<double>(u(rng)) : std::nullopt, i % 3));
  EXPECT_EQ(wl::parse_yolo_text(wl::format_yolo(dets)), dets);
}

TEST(Iou, WorkedExamples) {
  const wl::BBoxNorm a{0.5, 0.5, 0.2, 0.2};
  EXPECT_DOUBLE_EQ(wl::iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(wl::iou(a, {0.1, 0.1, 0.05, 0.05}), 0.0);
  EXPECT_NEAR(wl::iou(corners(0, 0, 0.5, 0.5), corners(0.25, 0.25, 0.75, 0.75)), 1.0 / 7.0, 1e-15);
}

TEST(Iou, SymmetricBoundedAndMatchesOracle) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const wl::BBoxNorm a{u(rng), u(rng), 0.01 + 0.99 * u(rng), 0.01 + 0.99 * u(rng)};
    const wl::BBoxNorm b{u(rng), u(rng), 0.01 + 0.99 * u(rng), 0.01 + 0.99 * u(rng)};
    const double v = wl::iou(a, b);
    ASSERT_EQ(v, wl::iou(b, a));
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
    ASSERT_NEAR(v, wl::oracle::iou(a, b), 1e-12);
  }
}

TEST(Iou, CornersClippedToUnitSquare) {
  // Both boxes hang off the left edge; only the in-frame parts count.
  const wl::BBoxNorm a{0.0, 0.5, 0.4, 0.4};  // x in [0, 0.2]
  const wl::BBoxNorm b{0.1, 0.5, 0.2, 0.4};  // x in [0, 0.2]
  EXPECT_DOUBLE_EQ(wl::iou(a, b), 1.0);
}

TEST(Match, WorkedExamples) {
  const auto gt = det(0.5, 0.5, 0.2, 0.2);
  // IoU 0.6 via a horizontal shift: overlap w*(0.2-dx)/(w*(0.2+dx)) = 0.6 -> dx = 0.05.
  auto m = wl::match_detections({det(0.55, 0.5, 0.2, 0.2, 0.9)}, {gt}, 0.5);
  EXPECT_EQ(m.tp_count(), 1);
  EXPECT_EQ(m.fp_count(), 0);
  EXPECT_EQ(m.fn, 0);

  m = wl::match_detections({det(0.52, 0.5, 0.2, 0.2, 0.8), det(0.505, 0.5, 0.2, 0.2, 0.9)}, {gt}, 0.5);
  EXPECT_EQ(m.tp_count(), 1);
  EXPECT_EQ(m.fp_count(), 1);
  EXPECT_TRUE(m.tp[1]);  // the 0.9 prediction claims the ground truth

  m = wl::match_detections({}, {gt, det(0.1, 0.1, 0.1, 0.1)}, 0.5);
  EXPECT_EQ(m.fn, 2);
}

TEST(Match, TiesGoToInputOrder) {
  const auto gt = det(0.5, 0.5, 0.2, 0.2);
  const auto m = wl::match_detections({det(0.5, 0.5, 0.2, 0.2, 0.7), det(0.5, 0.5, 0.2, 0.2, 0.7)}, {gt}, 0.5);
  EXPECT_TRUE(m.tp[0]);
  EXPECT_FALSE(m.tp[1]);
}

TEST(AveragePrecision, WorkedExamples) {
  EXPECT_DOUBLE_EQ(wl::average_precision({true, true, true}, 3), 1.0);
  EXPECT_DOUBLE_EQ(wl::average_precision({true, false}, 1), 1.0);
  EXPECT_NEAR(wl::average_precision({true, false, true}, 2), 0.5 + 0.5 * 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(wl::average_precision({}, 0), 1.0);
  EXPECT_DOUBLE_EQ(wl::average_precision({false}, 0), 0.0);
  EXPECT_DOUBLE_EQ(wl::average_precision({}, 4), 0.0);
}

TEST(Evaluate, IdenticalPredictionsArePerfect) {
  std::vector<wl::ImageDetections> images;
  for (int i = 0; i < 3; ++i) {
    wl::ImageDetections im{"f" + std::to_string(i), {}, {}};
    for (int j = 0; j <= i; ++j) {
      im.gts.push_back(det(0.2 + 0.2 * j, 0.5, 0.1, 0.1));
      im.preds.push_back(det(0.2 + 0.2 * j, 0.5, 0.1, 0.1, 1.0));
    }
    images.push_back(im);
  }
  const auto r = wl::evaluate_dataset(images);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.ap50, 1.0);
  EXPECT_EQ(r.map50_95, 1.0);
  ASSERT_EQ(r.per_threshold.size(), 10u);
  for (const auto& t : r.per_threshold) EXPECT_EQ(t.ap, 1.0);
  EXPECT_DOUBLE_EQ(r.per_threshold[9].iou, 0.95);
}

TEST(Evaluate, HandPlannedCounts) {
  // 5 images: 7 ground-truth boxes, 6 matched, 2 spurious predictions.
  std::vector<wl::ImageDetections> images;
  auto box = [](int k) { return det(0.1 + 0.15 * k, 0.5, 0.1, 0.1); };
  auto pred = [](int k, double c) { return det(0.1 + 0.15 * k, 0.5, 0.1, 0.1, c); };
  images.push_back({"a", {pred(0, 0.9), pred(1, 0.8)}, {box(0), box(1)}});
  images.push_back({"b", {pred(0, 0.7)}, {box(0)}});
  images.push_back({"c", {pred(2, 0.6), pred(4, 0.5)}, {box(2)}});                  // 1 FP
  images.push_back({"d", {pred(1, 0.95), pred(3, 0.4)}, {box(1), box(5)}});         // 1 FP, 1 FN
  images.push_back({"e", {pred(3, 0.85), pred(2, 0.1)}, {box(3)}});                 // below conf
  const auto r = wl::evaluate_dataset(images);
  EXPECT_EQ(r.tp, 6);
  EXPECT_EQ(r.fp, 2);
  EXPECT_EQ(r.fn, 1);
  EXPECT_DOUBLE_EQ(r.precision, 0.75);
  EXPECT_DOUBLE_EQ(r.recall, 6.0 / 7.0);
}

TEST(Evaluate, ShiftedPredictionsScoreLower) {
  std::vector<wl::ImageDetections> perfect, shifted;
  for (int i = 0; i < 4; ++i) {
    const auto g = det(0.3 + 0.1 * i, 0.5, 0.1, 0.2);
    perfect.push_back({"s" + std::to_string(i), {det(g.bbox.cx, 0.5, 0.1, 0.2, 0.9)}, {g}});
    shifted.push_back({"s" + std::to_string(i), {det(g.bbox.cx + 0.05, 0.5, 0.1, 0.2, 0.9)}, {g}});
  }
  EXPECT_LT(wl::evaluate_dataset(shifted).ap50, wl::evaluate_dataset(perfect).ap50);
}

TEST(Evaluate, MatchesBruteForceOracleOnRandomDatasets) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto images = wl::testing::random_dataset(rng);
    const auto r = wl::evaluate_dataset(images);
    ASSERT_NEAR(r.ap50, wl::oracle::mean_ap(images, 0.5), 1e-12) << trial;
    double sum = 0.0;
    for (int i = 0; i < 10; ++i) {
      const double t = (50 + 5 * i) / 100.0;
      const double o = wl::oracle::mean_ap(images, t);
      ASSERT_NEAR(r.per_threshold[i].ap, o, 1e-12) << trial << " @" << t;
      sum += o;
    }
    ASSERT_NEAR(r.map50_95, sum / 10.0, 1e-12);
    const auto c = wl::oracle::operating_counts(images, 0.5, 0.25);
    ASSERT_EQ(r.tp, c.tp);
    ASSERT_EQ(r.fp, c.fp);
    ASSERT_EQ(r.fn, c.fn);
  }
}

TEST(Evaluate, ApDependsOnlyOnConfidenceOrder) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    auto images = wl::testing::random_dataset(rng);
    const auto base = wl::evaluate_dataset(images);
    for (auto& im : images)
      for (auto& p : im.preds) p.confidence = 0.1 + 0.5 * *p.confidence * *p.confidence;
    const auto rescaled = wl::evaluate_dataset(images);
    EXPECT_EQ(base.ap50, rescaled.ap50);
    EXPECT_EQ(base.map50_95, rescaled.map50_95);
  }
}

TEST(Evaluate, EmptyDatasetAndZeroDenominators) {
  expect_kind(wl::ErrorKind::EmptyInput, [] { (void)wl::evaluate_dataset({}); });
  const auto r = wl::evaluate_dataset({{"x", {}, {}}});
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.ap50, 1.0);
  const auto missed = wl::evaluate_dataset({{"x", {}, {det(0.5, 0.5, 0.1, 0.1)}}});
  EXPECT_EQ(missed.precision, 0.0);
  EXPECT_EQ(missed.recall, 0.0);
  EXPECT_EQ(missed.ap50, 0.0);
}

TEST(Evaluate, DirectoriesPairByStem) {
  wl::testing::TempDir dir;
  const auto preds = dir / "p";
  const auto gts = dir / "g";
  wl::write_text_file(preds / "a.txt", "0 0.5 0.5 0.2 0.2 0.9\n");
  wl::write_text_file(gts / "a.txt", "0 0.5 0.5 0.2 0.2\n");
  wl::write_text_file(preds / "only_pred.txt", "0 0.5 0.5 0.2 0.2 0.9\n");
  wl::write_text_file(gts / "only_gt.txt", "0 0.5 0.5 0.2 0.2\n");
  wl::write_text_file(gts / "notes.md", "ignored\n");
  const auto r = wl::evaluate(preds, gts);
  EXPECT_EQ(r.ap50, 1.0);
  EXPECT_EQ(r.skipped, (std::vector<std::string>{"only_gt", "only_pred"}));
  const auto json = nlohmann::json::parse(wl::report_json(r));
  EXPECT_EQ(json["ap50"], 1.0);
  EXPECT_EQ(json["per_threshold"].size(), 10u);
  EXPECT_NE(wl::report_table(r).find("mAP50"), std::string::npos);

  wl::testing::TempDir empty;
  std::filesystem::create_directories(empty / "p");
  std::filesystem::create_directories(empty / "g");
  expect_kind(wl::ErrorKind::EmptyInput, [&] { (void)wl::evaluate(empty / "p", empty / "g"); });
  expect_kind(wl::ErrorKind::Io, [&] { (void)wl::evaluate(empty / "missing", empty / "g"); });
}

TEST(BestBall, WorkedExamples) {
  const auto a = det(0.1, 0.1, 0.1, 0.1, 0.7);
  const auto b = det(0.2, 0.2, 0.1, 0.1, 0.9);
  EXPECT_EQ(wl::best_ball_per_frame({a, b}), b);
  EXPECT_FALSE(wl::best_ball_per_frame({}));
  const auto c = det(0.3, 0.3, 0.1, 0.1, 0.9);
  EXPECT_EQ(wl::best_ball_per_frame({b, c}), b);
}
