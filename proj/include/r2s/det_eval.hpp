#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "r2s/core.hpp"

namespace r2s {

/// How per-class TP errors are averaged over the matched pairs.
enum class TpAveraging {
  kSimple,          // plain mean over all matches at the TP threshold
  kRecallWeighted,  // cumulative mean sampled on the recall grid (nuScenes devkit style)
};

struct DetEvalConfig {
  std::vector<double> dist_thresholds = {0.5, 1.0, 2.0, 4.0};
  /// Max BEV range per class, indexed by DetClass.
  std::array<double, kNumDetClasses> class_ranges = {50, 50, 50, 50, 50, 40, 40, 40, 30, 30};
  double min_recall = 0.1;
  double min_precision = 0.1;
  double tp_threshold = 2.0;
  TpAveraging tp_averaging = TpAveraging::kSimple;

  double range(DetClass c) const { return class_ranges[static_cast<std::size_t>(c)]; }
};

/// Throws ValidationError.
void validate(const DetEvalConfig& config);

/// True-positive error terms. `ave`/`aae` are empty where they do not apply
/// (traffic_cone and barrier).
struct TPErrors {
  double ate = 1.0;
  double ase = 1.0;
  double aoe = 1.0;
  std::optional<double> ave = 1.0;
  std::optional<double> aae = 1.0;

  /// Empty-match sentinel: every applicable term at 1.0.
  static TPErrors worst(DetClass c);
};

struct FrameBox {
  std::string frame_id;
  DetectionBox3D box;
};

struct Match {
  std::size_t pred_idx = 0;
  std::optional<std::size_t> gt_idx;
  bool tp = false;
  double distance = 0.0;  // BEV center distance to the matched GT, 0 for FPs
};

/// Greedy score-descending matching of one class. Ties in score keep input
/// order; ties in distance pick the lowest GT index. Output is in processing
/// order.
std::vector<Match> match_class(const std::vector<FrameBox>& preds,
                               const std::vector<FrameBox>& gts, double threshold);

/// 101-point interpolated AP with min_recall/min_precision clipping.
/// `matches` must be in score order. Returns nullopt when n_gt == 0.
std::optional<double> average_precision(const std::vector<Match>& matches, std::size_t n_gt,
                                        double min_recall, double min_precision);

/// 101-point interpolated AP without clipping (mean over all grid points).
std::optional<double> average_precision_unclipped(const std::vector<bool>& tp_flags,
                                                  std::size_t n_gt);

/// Per-definition TP errors of matched (pred, gt) pairs of one class.
/// Missing velocities count as zero velocity; missing attributes compare equal
/// only to missing attributes.
TPErrors tp_error_metrics(const std::vector<std::pair<DetectionBox3D, DetectionBox3D>>& pairs,
                          DetClass cls);

/// Recall-weighted variant: errors follow the score-ordered TP sequence.
TPErrors tp_error_metrics_recall_weighted(
    const std::vector<std::pair<DetectionBox3D, DetectionBox3D>>& tp_pairs_in_score_order,
    std::size_t n_gt, DetClass cls, double min_recall);

/// Class-averaged TP errors, already reduced to one value per term.
struct MeanTPErrors {
  double ate = 1.0;
  double ase = 1.0;
  double aoe = 1.0;
  double ave = 1.0;
  double aae = 1.0;
};

/// (1/10) * (5 * mAP + sum of max(1 - mTP, 0)).
double nds(double map_score, const MeanTPErrors& errors);

/// Size-only IoU of two boxes after aligning centers and yaw.
double aligned_size_iou(const Vec3& size_a, const Vec3& size_b);
/// Smallest absolute yaw difference with the given period.
double yaw_difference(double a, double b, double period);

struct ClassResult {
  std::vector<double> ap;  // one per distance threshold
  TPErrors tp;
  std::size_t n_gt = 0;
  std::size_t n_pred = 0;
};

struct DetEvalReport {
  std::vector<double> thresholds;
  /// Only classes with ground truth inside range are present.
  std::map<DetClass, ClassResult> per_class;
  MeanTPErrors mean_tp;
  double map_score = 0.0;
  double nds = 0.0;

  std::optional<double> ap(DetClass c, std::size_t threshold_idx) const;
};

/// Keeps boxes whose BEV distance from the ego origin is within the class range
/// scaled by `range_scale`.
FrameBoxes filter_by_range(const FrameBoxes& boxes, const DetEvalConfig& config,
                           double range_scale = 1.0);

/// Full nuScenes-style evaluation. Throws FrameMismatchError if predictions
/// reference frames absent from the ground truth.
DetEvalReport evaluate_detections(const FrameBoxes& preds, const FrameBoxes& gts,
                                  const DetEvalConfig& config);

/// 100 * (real - sim) / real; throws DomainError if real <= 0.
double gap_percent(double real_metric, double sim_metric);

std::string report_json(const DetEvalReport& report, int indent = 2);

/// One Markdown table row: | label | mAP | NDS | DA | Gap (%) |, values in percent.
std::string report_markdown_row(const std::string& label, const DetEvalReport& report,
                                std::optional<double> da, std::optional<double> gap);

}  // namespace r2s
