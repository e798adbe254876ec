#include "r2s/map_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "r2s/det_eval.hpp"
#include "r2s/parallel.hpp"

namespace r2s {

void validate(const MapEvalConfig& config) {
  if (config.chamfer_thresholds.empty()) {
    throw ValidationError("chamfer_thresholds must not be empty");
  }
  for (std::size_t i = 0; i < config.chamfer_thresholds.size(); ++i) {
    if (!(config.chamfer_thresholds[i] > 0.0) ||
        (i > 0 && !(config.chamfer_thresholds[i] > config.chamfer_thresholds[i - 1]))) {
      throw ValidationError("chamfer_thresholds must be positive and strictly increasing");
    }
  }
  if (config.resample_points < 2) throw ValidationError("resample_points must be >= 2");
  if (!(config.x_half > 0.0 && config.y_half > 0.0)) {
    throw ValidationError("BEV crop half extents must be positive");
  }
}

MapPolyline resample_polyline(const MapPolyline& line, std::size_t n) {
  if (n < 2) throw ValidationError("resample count must be >= 2");
  if (line.points.size() < 2) throw ValidationError("polyline needs at least 2 points");

  const auto& pts = line.points;
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
  const double total = cum.back();
  if (!(total > 0.0)) throw DegenerateError("polyline has zero arc length");

  MapPolyline out;
  out.class_name = line.class_name;
  out.score = line.score;
  out.points.reserve(n);
  out.points.push_back(pts.front());
  std::size_t seg = 0;
  for (std::size_t j = 1; j + 1 < n; ++j) {
    const double t = total * static_cast<double>(j) / static_cast<double>(n - 1);
    while (seg + 2 < pts.size() && cum[seg + 1] < t) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double u = len > 0.0 ? (t - cum[seg]) / len : 0.0;
    out.points.push_back(pts[seg] + u * (pts[seg + 1] - pts[seg]));
  }
  out.points.push_back(pts.back());
  return out;
}

namespace {

double mean_nearest(const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
  double sum = 0.0;
  for (const Vec2& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& q : to) best = std::min(best, (p - q).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(from.size());
}

bool inside_crop(const MapPolyline& line, const MapEvalConfig& config) {
  return std::any_of(line.points.begin(), line.points.end(), [&](const Vec2& p) {
    return std::abs(p.x()) <= config.x_half && std::abs(p.y()) <= config.y_half;
  });
}

struct Element {
  std::string_view frame_id;
  const MapPolyline* line;
};

}  // namespace

double chamfer_distance(const MapPolyline& a, const MapPolyline& b) {
  if (a.points.empty() || b.points.empty()) {
    throw ValidationError("chamfer distance needs nonempty polylines");
  }
  return 0.5 * (mean_nearest(a.points, b.points) + mean_nearest(b.points, a.points));
}

FramePolylines crop_and_resample(const FramePolylines& lines, const MapEvalConfig& config) {
  FramePolylines out;
  for (const auto& [frame, list] : lines) {
    auto& kept = out[frame];
    for (const MapPolyline& l : list) {
      MapPolyline r = resample_polyline(l, config.resample_points);
      if (inside_crop(r, config)) kept.push_back(std::move(r));
    }
  }
  return out;
}

MapEvalReport evaluate_map(const FramePolylines& preds, const FramePolylines& gts,
                           const MapEvalConfig& config) {
  validate(config);
  for (const auto& [frame, _] : preds) {
    if (!gts.contains(frame)) {
      throw FrameMismatchError("prediction frame '" + frame + "' has no ground-truth frame");
    }
  }
  const FramePolylines pred_r = crop_and_resample(preds, config);
  const FramePolylines gt_r = crop_and_resample(gts, config);

  std::array<std::vector<Element>, kNumMapClasses> pred_by_class;
  std::array<std::vector<Element>, kNumMapClasses> gt_by_class;
  for (const auto& [frame, list] : pred_r) {
    for (const auto& l : list) pred_by_class[static_cast<std::size_t>(l.class_name)].push_back({frame, &l});
  }
  for (const auto& [frame, list] : gt_r) {
    for (const auto& l : list) gt_by_class[static_cast<std::size_t>(l.class_name)].push_back({frame, &l});
  }

  MapEvalReport report;
  report.thresholds = config.chamfer_thresholds;
  parallel_for(kNumMapClasses, [&](std::size_t ci) {
    const auto& p = pred_by_class[ci];
    const auto& g = gt_by_class[ci];
    if (g.empty()) return;

    // Same-frame Chamfer distances, computed once and reused per threshold.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> cd(p.size() * g.size(), inf);
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (p[i].frame_id == g[j].frame_id) cd[i * g.size() + j] = chamfer_distance(*p[i].line, *g[j].line);
      }
    }
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return p[a].line->score > p[b].line->score;
    });

    std::vector<double> aps;
    for (double thr : config.chamfer_thresholds) {
      std::vector<bool> taken(g.size(), false);
      std::vector<bool> flags;
      flags.reserve(p.size());
      for (const std::size_t i : order) {
        double best = inf;
        std::size_t best_j = g.size();
        for (std::size_t j = 0; j < g.size(); ++j) {
          if (!taken[j] && cd[i * g.size() + j] < best) {
            best = cd[i * g.size() + j];
            best_j = j;
          }
        }
        const bool tp = best_j < g.size() && best < thr;
        if (tp) taken[best_j] = true;
        flags.push_back(tp);
      }
      aps.push_back(*average_precision_unclipped(flags, g.size()));
    }
    report.per_class_ap[ci] = std::move(aps);
  });

  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& aps : report.per_class_ap) {
    for (double ap : aps) {
      sum += ap;
      ++count;
    }
  }
  if (count > 0) report.map_score = sum / static_cast<double>(count);
  return report;
}

std::string map_report_json(const MapEvalReport& report, int indent) {
  using nlohmann::json;
  json j;
  j["thresholds"] = report.thresholds;
  j["map"] = report.map_score ? json(*report.map_score) : json(nullptr);
  json classes = json::object();
  for (std::size_t ci = 0; ci < kNumMapClasses; ++ci) {
    const auto name = std::string(to_string(kAllMapClasses[ci]));
    classes[name] = report.per_class_ap[ci].empty() ? json(nullptr) : json(report.per_class_ap[ci]);
  }
  j["per_class_ap"] = std::move(classes);
  return j.dump(indent);
}

std::string map_report_markdown_row(const std::string& label, const MapEvalReport& report) {
  const auto fmt = [](std::optional<double> v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *v);
    return std::string(buf);
  };
  std::string row = "| " + label + " |";
  for (const auto& aps : report.per_class_ap) {
    std::optional<double> mean;
    if (!aps.empty()) mean = std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
    row += " " + fmt(mean) + " |";
  }
  row += " " + fmt(report.map_score) + " |";
  return row;
}

}  // namespace r2s
