#include "r2s/agreement.hpp"

#include <cstdio>

#include <json.hpp>

namespace r2s {

namespace {

template <typename Map>
void require_same_frames(const Map& a, const Map& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end() && ib != b.end(); ++ia, ++ib) {
    if (ia->first != ib->first) {
      throw FrameMismatchError("frame sets differ at '" +
                               (ia->first < ib->first ? ia->first : ib->first) + "'");
    }
  }
  if (ia != a.end() || ib != b.end()) {
    throw FrameMismatchError("frame sets differ in size (" + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()) + ")");
  }
}

template <typename Map>
std::size_t count_items(const Map& m) {
  std::size_t n = 0;
  for (const auto& [_, list] : m) n += list.size();
  return n;
}

DetEvalConfig da_det_config(const AgreementConfig& config, double range_scale) {
  DetEvalConfig det = config.det;
  det.dist_thresholds = {config.da_threshold};
  det.tp_threshold = config.da_threshold;
  for (double& r : det.class_ranges) r *= range_scale;
  return det;
}

/// NDS of `preds` against `gts` as pseudo-GT; empties resolve to 1 (both) or 0.
double directional_nds(const FrameBoxes& preds, const FrameBoxes& pseudo_gt,
                       const DetEvalConfig& det) {
  const std::size_t n_pred = count_items(filter_by_range(preds, det));
  const std::size_t n_gt = count_items(filter_by_range(pseudo_gt, det));
  if (n_pred == 0 && n_gt == 0) return 1.0;
  if (n_pred == 0 || n_gt == 0) return 0.0;
  return evaluate_detections(preds, pseudo_gt, det).nds;
}

double directional_map(const FramePolylines& preds, const FramePolylines& pseudo_gt,
                       const MapEvalConfig& map) {
  const std::size_t n_pred = count_items(crop_and_resample(preds, map));
  const std::size_t n_gt = count_items(crop_and_resample(pseudo_gt, map));
  if (n_pred == 0 && n_gt == 0) return 1.0;
  if (n_pred == 0 || n_gt == 0) return 0.0;
  return evaluate_map(preds, pseudo_gt, map).map_score.value_or(0.0);
}

AgreementResult combine(double ab, double ba) {
  AgreementResult r;
  r.da_ab = 100.0 * ab;
  r.da_ba = 100.0 * ba;
  r.da = 100.0 * 0.5 * (ab + ba);
  return r;
}

AgreementResult detection_agreement_scaled(const FrameBoxes& a, const FrameBoxes& b,
                                           const AgreementConfig& config, double range_scale) {
  const DetEvalConfig det = da_det_config(config, range_scale);
  const double ab = directional_nds(a, pseudo_ground_truth(b, config.pseudo_gt_score_min), det);
  const double ba = directional_nds(b, pseudo_ground_truth(a, config.pseudo_gt_score_min), det);
  return combine(ab, ba);
}

}  // namespace

void validate(const AgreementConfig& config) {
  if (!(config.da_threshold > 0.0)) throw ValidationError("da_threshold must be positive");
  if (!(config.pseudo_gt_score_min >= 0.0 && config.pseudo_gt_score_min <= 1.0)) {
    throw ValidationError("pseudo_gt_score_min must lie in [0, 1]");
  }
  for (std::size_t i = 0; i < config.range_fractions.size(); ++i) {
    const double f = config.range_fractions[i];
    if (!(f > 0.0 && f <= 1.0)) throw ValidationError("range fractions must lie in (0, 1]");
    if (i > 0 && !(f > config.range_fractions[i - 1])) {
      throw ValidationError("range fractions must be sorted ascending");
    }
  }
  validate(da_det_config(config, 1.0));
  validate(config.map);
}

FrameBoxes pseudo_ground_truth(const FrameBoxes& dets, double score_min) {
  FrameBoxes out;
  for (const auto& [frame, list] : dets) {
    auto& kept = out[frame];
    for (DetectionBox3D b : list) {
      if (b.score < score_min) continue;
      b.score = 1.0;
      kept.push_back(std::move(b));
    }
  }
  return out;
}

FramePolylines pseudo_ground_truth(const FramePolylines& lines, double score_min) {
  FramePolylines out;
  for (const auto& [frame, list] : lines) {
    auto& kept = out[frame];
    for (MapPolyline l : list) {
      if (l.score < score_min) continue;
      l.score = 1.0;
      kept.push_back(std::move(l));
    }
  }
  return out;
}

AgreementResult detection_agreement(const FrameBoxes& a, const FrameBoxes& b,
                                    const AgreementConfig& config) {
  validate(config);
  require_same_frames(a, b);
  return detection_agreement_scaled(a, b, config, 1.0);
}

AgreementResult map_agreement(const FramePolylines& a, const FramePolylines& b,
                              const AgreementConfig& config) {
  validate(config);
  require_same_frames(a, b);
  const double ab = directional_map(a, pseudo_ground_truth(b, config.pseudo_gt_score_min), config.map);
  const double ba = directional_map(b, pseudo_ground_truth(a, config.pseudo_gt_score_min), config.map);
  return combine(ab, ba);
}

std::vector<std::pair<double, double>> agreement_range_curve(const FrameBoxes& a,
                                                             const FrameBoxes& b,
                                                             const AgreementConfig& config) {
  validate(config);
  require_same_frames(a, b);
  std::vector<std::pair<double, double>> curve;
  curve.reserve(config.range_fractions.size());
  for (double f : config.range_fractions) {
    curve.emplace_back(f, detection_agreement_scaled(a, b, config, f).da);
  }
  return curve;
}

std::string agreement_json(const AgreementResult& result) {
  nlohmann::json j;
  j["da"] = result.da;
  j["da_ab"] = result.da_ab;
  j["da_ba"] = result.da_ba;
  return j.dump();
}

std::string range_curve_csv(const std::vector<std::pair<double, double>>& curve) {
  std::string out = "fraction,da\n";
  char buf[64];
  for (const auto& [f, da] : curve) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6f\n", f, da);
    out += buf;
  }
  return out;
}

}  // namespace r2s
