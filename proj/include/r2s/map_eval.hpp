#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "r2s/core.hpp"

namespace r2s {

struct MapEvalConfig {
  std::vector<double> chamfer_thresholds = {0.5, 1.0, 1.5};
  std::size_t resample_points = 100;
  /// Half extents of the ego-frame crop box: |x| <= x_half (forward),
  /// |y| <= y_half (lateral).
  double x_half = 30.0;
  double y_half = 15.0;
};

void validate(const MapEvalConfig& config);

/// n points evenly spaced by arc length; endpoints preserved exactly.
/// Throws DegenerateError for zero total length, ValidationError for n < 2.
MapPolyline resample_polyline(const MapPolyline& line, std::size_t n);

/// Symmetric mean nearest-point distance of two resampled polylines.
double chamfer_distance(const MapPolyline& a, const MapPolyline& b);

/// Drops elements with no resampled point inside the crop box. Inputs are
/// resampled to config.resample_points on the way.
FramePolylines crop_and_resample(const FramePolylines& lines, const MapEvalConfig& config);

struct MapEvalReport {
  std::vector<double> thresholds;
  /// AP per class and threshold; empty for classes without ground truth.
  std::array<std::vector<double>, kNumMapClasses> per_class_ap;
  /// Mean over every defined (class, threshold) AP; nullopt if no class has GT.
  std::optional<double> map_score;
};

MapEvalReport evaluate_map(const FramePolylines& preds, const FramePolylines& gts,
                           const MapEvalConfig& config);

std::string map_report_json(const MapEvalReport& report, int indent = 2);
/// | label | divider | boundary | crossing | mAP |, values in percent.
std::string map_report_markdown_row(const std::string& label, const MapEvalReport& report);

}  // namespace r2s
