#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "r2s/img_metrics.hpp"

namespace r2s {

/// Sample Pearson correlation. Throws DegenerateError for fewer than 3
/// points or zero variance, ShapeMismatchError for unequal lengths.
double pearson(std::span<const double> x, std::span<const double> y);

/// Average ranks (ties share the mean of their positions), 1-based.
std::vector<double> average_ranks(std::span<const double> v);

/// Pearson on average-tie ranks.
double spearman(std::span<const double> x, std::span<const double> y);

struct CorrelationResult {
  std::string metric_name;
  std::string group;
  double pearson_r = 0.0;
  double spearman_rho = 0.0;
  std::size_t n_scenes = 0;
  std::vector<std::pair<double, double>> points;  // (metric value, da)
};

/// Scene metric by name: psnr, ssim, lpips or fid. nullopt when absent.
std::optional<double> scene_metric(const SceneMetrics& s, const std::string& name);

/// Correlates `metric` against DA over the scenes that carry both values.
CorrelationResult correlate(const std::vector<SceneMetrics>& scenes, const std::string& metric,
                            const std::string& group);

std::string correlation_json(const std::vector<CorrelationResult>& results);

// ---------------------------------------------------------------------------
// Gap tables

struct MethodResult {
  std::string method;
  std::map<std::string, double> real;  // column -> value
  std::map<std::string, double> sim;
};

struct GapTable {
  std::vector<std::string> columns;
  std::string baseline;
  std::vector<MethodResult> rows;
  /// method -> column -> gap percent against the baseline's real row.
  std::map<std::string, std::map<std::string, double>> gaps;

  std::string markdown() const;
  std::string csv() const;
};

/// Gap(%) of every method's sim row against the baseline method's real row.
/// Throws MissingBaselineError if the baseline or one of its real columns is absent.
GapTable gap_table(const std::vector<std::string>& columns, const std::vector<MethodResult>& results,
                   const std::string& baseline);

/// Reads {"columns": [...], "baseline": "...", "methods": [{"method", "real": {...}, "sim": {...}}]}.
GapTable gap_table_from_json(std::string_view json_text);

// ---------------------------------------------------------------------------
// SVG scatter

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  std::string group;
};

struct ScatterStyle {
  int width = 640;
  int height = 480;
  int margin_left = 70;
  int margin_right = 130;
  int margin_top = 30;
  int margin_bottom = 60;
  double marker_radius = 4.0;
};

/// Self-contained, byte-deterministic SVG with one <circle class="marker">
/// per point. Throws EmptyInputError.
std::string scatter_svg(const std::vector<ScatterPoint>& points, const std::string& x_label,
                        const std::string& y_label, const ScatterStyle& style = {});

}  // namespace r2s
