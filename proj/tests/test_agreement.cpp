#include <doctest.h>

#include "brute_det.hpp"
#include "gen.hpp"
#include "r2s/agreement.hpp"

using namespace r2s;

namespace {

std::size_t count(const FrameBoxes& m) {
  std::size_t n = 0;
  for (const auto& [f, l] : m) n += l.size();
  return n;
}

/// DA from the brute-force evaluator, both directions.
double oracle_da(const FrameBoxes& a, const FrameBoxes& b) {
  DetEvalConfig det;
  det.dist_thresholds = {2.0};
  det.tp_threshold = 2.0;
  const auto as_gt = [](FrameBoxes m) {
    for (auto& [f, list] : m) {
      for (auto& x : list) x.score = 1.0;
    }
    return m;
  };
  const auto dir = [&](const FrameBoxes& p, const FrameBoxes& g) {
    const std::size_t np = count(filter_by_range(p, det));
    const std::size_t ng = count(filter_by_range(g, det));
    if (np == 0 && ng == 0) return 1.0;
    if (np == 0 || ng == 0) return 0.0;
    return oracle::brute_detection_eval(p, as_gt(g), det).nds;
  };
  return 50.0 * (dir(a, b) + dir(b, a));
}

}  // namespace

TEST_SUITE("agreement") {

TEST_CASE("self agreement is 100") {
  gen::Rng rng(5);
  const auto a = gen::random_detections(rng, gen::frame_ids(3), 25);
  const auto r = detection_agreement(a, a, {});
  CHECK(r.da == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(r.da_ab == r.da_ba);
}

TEST_CASE("agreement is symmetric and matches composed oracles") {
  gen::Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto frames = gen::frame_ids(1 + rng() % 3);
    const auto a = gen::random_detections(rng, frames, 1 + rng() % 20);
    const auto b = gen::perturb_detections(rng, a, 1.5, 0.3, rng() % 4);
    const auto ab = detection_agreement(a, b, {});
    const auto ba = detection_agreement(b, a, {});
    CHECK(ab.da == ba.da);
    CHECK(ab.da_ab == ba.da_ba);
    CHECK(std::abs(ab.da - oracle_da(a, b)) < 1e-7);
    CHECK(ab.da >= 0.0);
    CHECK(ab.da <= 100.0);
  }
}

TEST_CASE("empty sides") {
  const FrameBoxes empty{{"f", {}}};
  gen::Rng rng(1);
  FrameBoxes one{{"f", {gen::random_box(rng, DetClass::kCar, 10.0)}}};
  CHECK(detection_agreement(empty, empty, {}).da == 100.0);
  CHECK(detection_agreement(one, empty, {}).da == 0.0);
  CHECK(detection_agreement(empty, one, {}).da == 0.0);
}

TEST_CASE("frame sets must agree") {
  const FrameBoxes a{{"f1", {}}};
  const FrameBoxes b{{"f2", {}}};
  CHECK_THROWS_AS(detection_agreement(a, b, {}), FrameMismatchError);
  CHECK_THROWS_AS(agreement_range_curve(a, b, {}), FrameMismatchError);
  CHECK_THROWS_AS(map_agreement(FramePolylines{{"x", {}}}, FramePolylines{}, {}), FrameMismatchError);
}

TEST_CASE("pseudo ground truth resets scores and filters") {
  gen::Rng rng(3);
  auto a = gen::random_detections(rng, {"f"}, 20);
  const auto pg = pseudo_ground_truth(a, 0.5);
  std::size_t expected = 0;
  for (const auto& b : a["f"]) expected += b.score >= 0.5;
  CHECK(pg.at("f").size() == expected);
  for (const auto& b : pg.at("f")) CHECK(b.score == 1.0);
}

TEST_CASE("map agreement") {
  gen::Rng rng(12);
  const auto a = gen::random_polylines(rng, gen::frame_ids(2), 8);
  CHECK(map_agreement(a, a, {}).da == doctest::Approx(100.0));
  FramePolylines empty;
  for (const auto& [f, _] : a) empty[f];
  CHECK(map_agreement(a, empty, {}).da == 0.0);
  CHECK(map_agreement(empty, empty, {}).da == 100.0);
}

TEST_CASE("range curve") {
  gen::Rng rng(13);
  const auto a = gen::random_detections(rng, gen::frame_ids(2), 30);
  for (const auto& [f, da] : agreement_range_curve(a, a, {})) CHECK(da == doctest::Approx(100.0));

  // Sets that differ only beyond half range: identical curve up to f = 0.5.
  FrameBoxes near, b;
  for (int i = 0; i < 6; ++i) {
    auto box = gen::random_box(rng, DetClass::kCar, 10.0);
    near["f"].push_back(box);
  }
  b = near;
  auto far = gen::random_box(rng, DetClass::kCar);
  far.center = {30, 0, 0};
  b["f"].push_back(far);
  const auto curve = agreement_range_curve(near, b, {});
  for (const auto& [f, da] : curve) {
    if (f <= 0.5) {
      CHECK(da == doctest::Approx(100.0));
    } else {
      CHECK(da < 100.0);
    }
  }
  CHECK(curve.back().second == detection_agreement(near, b, {}).da);
}

TEST_CASE("serialization") {
  AgreementResult r{87.5, 90.0, 85.0};
  CHECK(agreement_json(r) == R"({"da":87.5,"da_ab":90.0,"da_ba":85.0})");
  CHECK(range_curve_csv({{0.5, 100.0}, {1.0, 87.25}}) == "fraction,da\n0.5,100.000000\n1,87.250000\n");
}

}
