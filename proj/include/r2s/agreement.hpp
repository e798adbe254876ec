#pragma once

#include <string>
#include <utility>
#include <vector>

#include "r2s/core.hpp"
#include "r2s/det_eval.hpp"
#include "r2s/map_eval.hpp"

namespace r2s {

struct AgreementConfig {
  double da_threshold = 2.0;
  double pseudo_gt_score_min = 0.0;
  std::vector<double> range_fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  /// Class ranges and the remaining detection protocol settings. The distance
  /// and TP thresholds are overridden by da_threshold.
  DetEvalConfig det;
  MapEvalConfig map;
};

void validate(const AgreementConfig& config);

struct AgreementResult {
  double da = 0.0;     // 100 * mean of both directions
  double da_ab = 0.0;  // 100 * score(a as predictions, b as pseudo-GT)
  double da_ba = 0.0;
};

/// The boxes of `dets` kept as pseudo ground truth, scores reset to 1.
FrameBoxes pseudo_ground_truth(const FrameBoxes& dets, double score_min);
FramePolylines pseudo_ground_truth(const FramePolylines& lines, double score_min);

/// Symmetric detection agreement in [0, 100]. Throws FrameMismatchError.
AgreementResult detection_agreement(const FrameBoxes& a, const FrameBoxes& b,
                                    const AgreementConfig& config);

/// Same construction using map mAP. Throws FrameMismatchError.
AgreementResult map_agreement(const FramePolylines& a, const FramePolylines& b,
                              const AgreementConfig& config);

/// DA with every class range scaled by each configured fraction.
std::vector<std::pair<double, double>> agreement_range_curve(const FrameBoxes& a,
                                                             const FrameBoxes& b,
                                                             const AgreementConfig& config);

std::string agreement_json(const AgreementResult& result);
/// "fraction,da" header plus one row per point.
std::string range_curve_csv(const std::vector<std::pair<double, double>>& curve);

}  // namespace r2s
