#include <doctest.h>

#include <algorithm>

#include "brute_det.hpp"
#include "gen.hpp"
#include "r2s/det_eval.hpp"

using namespace r2s;

namespace {

DetectionBox3D car_at(double x, double y, double score = 1.0) {
  DetectionBox3D b;
  b.center = {x, y, 0};
  b.size = {2, 4, 1.5};
  b.score = score;
  return b;
}

void check_against_oracle(const FrameBoxes& preds, const FrameBoxes& gts,
                          const DetEvalConfig& cfg) {
  const auto got = evaluate_detections(preds, gts, cfg);
  const auto want = oracle::brute_detection_eval(preds, gts, cfg);
  CHECK(std::abs(got.map_score - want.map) < 1e-9);
  CHECK(std::abs(got.nds - want.nds) < 1e-9);
  CHECK(std::abs(got.mean_tp.ate - want.mate) < 1e-9);
  CHECK(std::abs(got.mean_tp.ase - want.mase) < 1e-9);
  CHECK(std::abs(got.mean_tp.aoe - want.maoe) < 1e-9);
  CHECK(std::abs(got.mean_tp.ave - want.mave) < 1e-9);
  CHECK(std::abs(got.mean_tp.aae - want.maae) < 1e-9);
  for (DetClass c : kAllDetClasses) {
    const auto& w = want.classes[static_cast<int>(c)];
    const auto it = got.per_class.find(c);
    REQUIRE((it != got.per_class.end()) == w.evaluated);
    if (!w.evaluated) continue;
    const auto& r = it->second;
    REQUIRE(r.ap.size() == w.ap.size());
    for (std::size_t t = 0; t < r.ap.size(); ++t) CHECK(std::abs(r.ap[t] - w.ap[t]) < 1e-9);
    CHECK(std::abs(r.tp.ate - w.ate) < 1e-9);
    CHECK(std::abs(r.tp.ase - w.ase) < 1e-9);
    CHECK(std::abs(r.tp.aoe - w.aoe) < 1e-9);
    REQUIRE(r.tp.ave.has_value() == w.ave.has_value());
    if (w.ave) {
      CHECK(std::abs(*r.tp.ave - *w.ave) < 1e-9);
      CHECK(std::abs(*r.tp.aae - *w.aae) < 1e-9);
    }
  }
}

}  // namespace

TEST_SUITE("det_eval") {

TEST_CASE("single prediction on its ground truth") {
  const std::vector<FrameBox> preds = {{"f", car_at(5, 5)}};
  const std::vector<FrameBox> gts = {{"f", car_at(5, 5)}};
  const auto m = match_class(preds, gts, 2.0);
  REQUIRE(m.size() == 1);
  CHECK(m[0].tp);
  CHECK(m[0].gt_idx == 0u);
  CHECK(m[0].distance == 0.0);
}

TEST_CASE("higher score wins a contested ground truth") {
  const std::vector<FrameBox> preds = {{"f", car_at(5.5, 5, 0.8)}, {"f", car_at(5.2, 5, 0.9)}};
  const std::vector<FrameBox> gts = {{"f", car_at(5, 5)}};
  const auto m = match_class(preds, gts, 2.0);
  REQUIRE(m.size() == 2);
  CHECK(m[0].pred_idx == 1);
  CHECK(m[0].tp);
  CHECK(m[1].pred_idx == 0);
  CHECK_FALSE(m[1].tp);
}

TEST_CASE("matching never crosses frames and respects the threshold") {
  const std::vector<FrameBox> preds = {{"f1", car_at(0, 0)}, {"f2", car_at(0, 2.5)}};
  const std::vector<FrameBox> gts = {{"f2", car_at(0, 0)}};
  const auto m = match_class(preds, gts, 2.0);
  CHECK_FALSE(m[0].tp);
  CHECK_FALSE(m[1].tp);
  CHECK(match_class(preds, gts, 2.5)[1].tp);  // boundary is inclusive
}

TEST_CASE("greedy matching agrees with brute force on small random cases") {
  gen::Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    FrameBoxes preds, gts;
    for (int i = 0; i < 5; ++i) {
      auto b = car_at(gen::uniform(rng, -3, 3), gen::uniform(rng, -3, 3), gen::uniform(rng, 0, 1));
      preds[rng() % 2 ? "a" : "b"].push_back(b);
    }
    for (int i = 0; i < 4; ++i) {
      gts[rng() % 2 ? "a" : "b"].push_back(car_at(gen::uniform(rng, -3, 3), gen::uniform(rng, -3, 3)));
    }
    gts["a"];
    gts["b"];
    DetEvalConfig cfg;
    cfg.dist_thresholds = {0.5, 1.0, 2.0};
    check_against_oracle(preds, gts, cfg);
  }
}

TEST_CASE("average precision hand cases") {
  std::vector<Match> perfect(3);
  for (std::size_t i = 0; i < 3; ++i) perfect[i] = {i, i, true, 0.0};
  CHECK(*average_precision(perfect, 3, 0.1, 0.1) == doctest::Approx(1.0));
  CHECK(*average_precision({}, 4, 0.1, 0.1) == 0.0);
  CHECK_FALSE(average_precision({}, 0, 0.1, 0.1).has_value());

  // FP at rank 1 then two TPs over two GTs: interpolated precision is 2/3 at
  // every recall point, so AP = (2/3 - 0.1) / 0.9 = 17/27.
  const std::vector<Match> m = {{0, std::nullopt, false, 0}, {1, 0, true, 0}, {2, 1, true, 0}};
  CHECK(*average_precision(m, 2, 0.1, 0.1) == doctest::Approx(17.0 / 27.0).epsilon(1e-12));
  CHECK(*average_precision_unclipped({false, true, true}, 2) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("average precision below the precision floor is zero") {
  // One TP after nine FPs: precision 0.1 never exceeds the floor.
  std::vector<Match> m;
  for (std::size_t i = 0; i < 9; ++i) m.push_back({i, std::nullopt, false, 0});
  m.push_back({9, 0, true, 0});
  CHECK(*average_precision(m, 1, 0.1, 0.1) == 0.0);
}

TEST_CASE("true-positive error definitions") {
  DetectionBox3D a = car_at(1, 1);
  CHECK(tp_error_metrics({{a, a}}, DetClass::kCar).ate == 0.0);
  const auto zero = tp_error_metrics({{a, a}}, DetClass::kCar);
  CHECK(zero.ase == 0.0);
  CHECK(zero.aoe == 0.0);
  CHECK(*zero.ave == 0.0);
  CHECK(*zero.aae == 0.0);

  DetectionBox3D b = a;
  b.yaw = kPi / 2;
  const auto e = tp_error_metrics({{b, a}}, DetClass::kCar);
  CHECK(e.aoe == doctest::Approx(kPi / 2));
  CHECK(e.ase == 0.0);

  DetectionBox3D flipped = a;
  flipped.yaw = kPi;
  flipped.class_name = DetClass::kBarrier;
  DetectionBox3D barrier = a;
  barrier.class_name = DetClass::kBarrier;
  const auto eb = tp_error_metrics({{flipped, barrier}}, DetClass::kBarrier);
  CHECK(eb.aoe == doctest::Approx(0.0));
  CHECK_FALSE(eb.ave.has_value());
  CHECK_FALSE(eb.aae.has_value());

  DetectionBox3D moving = a;
  moving.velocity = Vec2(3, 4);
  moving.attribute = "moving";
  const auto ev = tp_error_metrics({{moving, a}}, DetClass::kCar);
  CHECK(*ev.ave == doctest::Approx(5.0));
  CHECK(*ev.aae == 1.0);

  DetectionBox3D big = a;
  big.size = {4, 4, 1.5};
  CHECK(aligned_size_iou(big.size, a.size) == doctest::Approx(0.5));
  CHECK(tp_error_metrics({}, DetClass::kCar).ate == 1.0);
}

TEST_CASE("yaw difference wraps") {
  CHECK(yaw_difference(kPi - 0.1, -kPi + 0.1, 2 * kPi) == doctest::Approx(0.2));
  CHECK(yaw_difference(0.0, kPi, kPi) == doctest::Approx(0.0));
  CHECK(yaw_difference(0.3, -0.3, 2 * kPi) == doctest::Approx(0.6));
}

TEST_CASE("nds formula") {
  CHECK(nds(1.0, {0, 0, 0, 0, 0}) == 1.0);
  CHECK(nds(0.0, {1, 1, 2, 1, 5}) == 0.0);
  CHECK(nds(0.5, {0.2, 0.1, 0.3, 2.0, 0.0}) == doctest::Approx(0.59).epsilon(1e-12));
}

TEST_CASE("identical predictions score perfectly") {
  gen::Rng rng(8);
  auto gts = gen::random_detections(rng, gen::frame_ids(3), 30);
  auto preds = gts;
  for (auto& [f, list] : gts) {
    for (auto& b : list) b.score = 1.0;
  }
  const auto r = evaluate_detections(preds, gts, {});
  CHECK(r.map_score == doctest::Approx(1.0));
  CHECK(r.nds == doctest::Approx(1.0));
}

TEST_CASE("empty predictions score zero") {
  gen::Rng rng(9);
  const auto gts = gen::random_detections(rng, gen::frame_ids(2), 10);
  const auto r = evaluate_detections({}, gts, {});
  CHECK(r.map_score == 0.0);
  CHECK(r.nds == doctest::Approx(0.0));
  const auto none = evaluate_detections({}, {}, {});
  CHECK(none.per_class.empty());
  CHECK(none.nds == 0.0);
}

TEST_CASE("prediction frames must exist in the ground truth") {
  FrameBoxes preds{{"x", {car_at(0, 0)}}};
  FrameBoxes gts{{"y", {car_at(0, 0)}}};
  CHECK_THROWS_AS(evaluate_detections(preds, gts, {}), FrameMismatchError);
}

TEST_CASE("range filter drops distant boxes per class") {
  FrameBoxes boxes{{"f", {car_at(45, 0)}}};
  auto ped = car_at(45, 0);
  ped.class_name = DetClass::kPedestrian;
  boxes["f"].push_back(ped);
  const auto kept = filter_by_range(boxes, {});
  REQUIRE(kept.at("f").size() == 1);
  CHECK(kept.at("f")[0].class_name == DetClass::kCar);
  CHECK(filter_by_range(boxes, {}, 0.5).at("f").empty());
}

TEST_CASE("random scenes match the brute-force evaluator") {
  gen::Rng rng(1234);
  for (int trial = 0; trial < 40; ++trial) {
    const auto frames = gen::frame_ids(3);
    const auto gts = gen::random_detections(rng, frames, 1 + rng() % 30);
    const auto preds = gen::perturb_detections(rng, gts, 1.0, 0.2, rng() % 6);
    DetEvalConfig cfg;
    if (trial % 2) cfg.tp_averaging = TpAveraging::kRecallWeighted;
    check_against_oracle(preds, gts, cfg);
  }
}

TEST_CASE("gap percent") {
  CHECK(std::abs(gap_percent(32.2, 13.5) - 58.1) < 0.05);
  CHECK(std::abs(gap_percent(38.4, 29.1) - 24.2) < 0.05);
  CHECK(gap_percent(20.0, 20.0) == 0.0);
  CHECK(gap_percent(10.0, 12.0) == doctest::Approx(-20.0));
  CHECK_THROWS_AS(gap_percent(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(gap_percent(-1.0, 1.0), DomainError);
}

TEST_CASE("report rendering") {
  gen::Rng rng(4);
  const auto gts = gen::random_detections(rng, gen::frame_ids(2), 12);
  const auto r = evaluate_detections(gts, gts, {});
  const auto json = report_json(r);
  CHECK(json.find("\"nds\"") != std::string::npos);
  const auto row = report_markdown_row("BEVFormer", r, 76.6, 24.2);
  CHECK(row.rfind("| BEVFormer |", 0) == 0);
  CHECK(row.find("| 76.6 | 24.2 |") != std::string::npos);
}

}
