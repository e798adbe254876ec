#include "r2s/det_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "r2s/parallel.hpp"

namespace r2s {

namespace {

bool has_velocity_terms(DetClass c) {
  return c != DetClass::kTrafficCone && c != DetClass::kBarrier;
}

double bev_distance(const Vec3& a, const Vec3& b) {
  return std::hypot(a.x() - b.x(), a.y() - b.y());
}

/// Stable score-descending order of prediction indices.
std::vector<std::size_t> score_order(const std::vector<FrameBox>& preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].box.score > preds[b].box.score;
  });
  return order;
}

/// Interpolated precision on the 101-point recall grid: for grid point i the
/// max precision over all operating points with recall >= i / 100 (0 if none).
std::array<double, 101> precision_envelope(const std::vector<bool>& tp_flags,
                                           std::size_t n_gt) {
  std::array<double, 101> env{};
  const std::size_t n = tp_flags.size();
  std::vector<std::size_t> tp_count(n);
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (tp_flags[k]) ++tp;
    tp_count[k] = tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  // Suffix maximum of precision.
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  // tp_count is nondecreasing, so the first operating point reaching each grid
  // recall moves monotonically forward.
  std::size_t k = 0;
  for (std::size_t i = 0; i <= 100; ++i) {
    while (k < n && 100 * tp_count[k] < i * n_gt) ++k;
    env[i] = k < n ? precision[k] : 0.0;
  }
  return env;
}

std::vector<bool> tp_flags_of(const std::vector<Match>& matches) {
  std::vector<bool> flags;
  flags.reserve(matches.size());
  for (const Match& m : matches) flags.push_back(m.tp);
  return flags;
}

}  // namespace

void validate(const DetEvalConfig& config) {
  if (config.dist_thresholds.empty()) throw ValidationError("dist_thresholds must not be empty");
  for (std::size_t i = 0; i < config.dist_thresholds.size(); ++i) {
    if (!(config.dist_thresholds[i] > 0.0) ||
        (i > 0 && !(config.dist_thresholds[i] > config.dist_thresholds[i - 1]))) {
      throw ValidationError("dist_thresholds must be positive and strictly increasing");
    }
  }
  for (double r : config.class_ranges) {
    if (!(r > 0.0)) throw ValidationError("class ranges must be positive");
  }
  if (!(config.min_recall >= 0.0 && config.min_recall < 1.0) ||
      !(config.min_precision >= 0.0 && config.min_precision < 1.0)) {
    throw ValidationError("min_recall and min_precision must lie in [0, 1)");
  }
  if (!(config.tp_threshold > 0.0)) throw ValidationError("tp_threshold must be positive");
}

TPErrors TPErrors::worst(DetClass c) {
  TPErrors e;
  if (!has_velocity_terms(c)) {
    e.ave.reset();
    e.aae.reset();
  }
  return e;
}

std::vector<Match> match_class(const std::vector<FrameBox>& preds,
                               const std::vector<FrameBox>& gts, double threshold) {
  std::unordered_map<std::string_view, std::vector<std::size_t>> gts_by_frame;
  for (std::size_t g = 0; g < gts.size(); ++g) gts_by_frame[gts[g].frame_id].push_back(g);

  std::vector<bool> taken(gts.size(), false);
  std::vector<Match> out;
  out.reserve(preds.size());
  for (const std::size_t p : score_order(preds)) {
    Match m;
    m.pred_idx = p;
    double best = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best_gt;
    if (const auto it = gts_by_frame.find(preds[p].frame_id); it != gts_by_frame.end()) {
      for (const std::size_t g : it->second) {
        if (taken[g]) continue;
        const double d = bev_distance(preds[p].box.center, gts[g].box.center);
        if (d < best) {
          best = d;
          best_gt = g;
        }
      }
    }
    if (best_gt && best <= threshold) {
      taken[*best_gt] = true;
      m.gt_idx = best_gt;
      m.tp = true;
      m.distance = best;
    }
    out.push_back(m);
  }
  return out;
}

std::optional<double> average_precision(const std::vector<Match>& matches, std::size_t n_gt,
                                        double min_recall, double min_precision) {
  if (n_gt == 0) return std::nullopt;
  const auto env = precision_envelope(tp_flags_of(matches), n_gt);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i <= 100; ++i) {
    if (!(static_cast<double>(i) / 100.0 > min_recall)) continue;
    sum += std::max(env[i] - min_precision, 0.0);
    ++count;
  }
  if (count == 0) return 0.0;
  return sum / static_cast<double>(count) / (1.0 - min_precision);
}

std::optional<double> average_precision_unclipped(const std::vector<bool>& tp_flags,
                                                  std::size_t n_gt) {
  if (n_gt == 0) return std::nullopt;
  const auto env = precision_envelope(tp_flags, n_gt);
  double sum = 0.0;
  for (double p : env) sum += p;
  return sum / 101.0;
}

double aligned_size_iou(const Vec3& size_a, const Vec3& size_b) {
  const double inter = size_a.cwiseMin(size_b).prod();
  const double uni = size_a.prod() + size_b.prod() - inter;
  return inter / uni;
}

double yaw_difference(double a, double b, double period) {
  double d = std::fmod(std::abs(a - b), period);
  return std::min(d, period - d);
}

namespace {

struct PairErrors {
  double ate, ase, aoe, ave, aae;
};

PairErrors pair_errors(const DetectionBox3D& pred, const DetectionBox3D& gt, DetClass cls) {
  PairErrors e{};
  e.ate = bev_distance(pred.center, gt.center);
  e.ase = 1.0 - aligned_size_iou(pred.size, gt.size);
  e.aoe = yaw_difference(pred.yaw, gt.yaw, cls == DetClass::kBarrier ? kPi : 2.0 * kPi);
  const Vec2 vp = pred.velocity.value_or(Vec2::Zero());
  const Vec2 vg = gt.velocity.value_or(Vec2::Zero());
  e.ave = (vp - vg).norm();
  e.aae = pred.attribute == gt.attribute ? 0.0 : 1.0;
  return e;
}

}  // namespace

TPErrors tp_error_metrics(const std::vector<std::pair<DetectionBox3D, DetectionBox3D>>& pairs,
                          DetClass cls) {
  if (pairs.empty()) return TPErrors::worst(cls);
  PairErrors sum{};
  for (const auto& [pred, gt] : pairs) {
    const PairErrors e = pair_errors(pred, gt, cls);
    sum.ate += e.ate;
    sum.ase += e.ase;
    sum.aoe += e.aoe;
    sum.ave += e.ave;
    sum.aae += e.aae;
  }
  const double n = static_cast<double>(pairs.size());
  TPErrors out;
  out.ate = sum.ate / n;
  out.ase = sum.ase / n;
  out.aoe = sum.aoe / n;
  if (has_velocity_terms(cls)) {
    out.ave = sum.ave / n;
    out.aae = sum.aae / n;
  } else {
    out.ave.reset();
    out.aae.reset();
  }
  return out;
}

TPErrors tp_error_metrics_recall_weighted(
    const std::vector<std::pair<DetectionBox3D, DetectionBox3D>>& tp_pairs,
    std::size_t n_gt, DetClass cls, double min_recall) {
  if (tp_pairs.empty() || n_gt == 0) return TPErrors::worst(cls);
  const std::size_t n_tp = tp_pairs.size();
  // Cumulative means along the score-ordered TP sequence.
  std::vector<PairErrors> cummean(n_tp);
  PairErrors run{};
  for (std::size_t k = 0; k < n_tp; ++k) {
    const PairErrors e = pair_errors(tp_pairs[k].first, tp_pairs[k].second, cls);
    run.ate += e.ate;
    run.ase += e.ase;
    run.aoe += e.aoe;
    run.ave += e.ave;
    run.aae += e.aae;
    const double n = static_cast<double>(k + 1);
    cummean[k] = {run.ate / n, run.ase / n, run.aoe / n, run.ave / n, run.aae / n};
  }
  // Grid points strictly above min_recall up to the max reached recall.
  PairErrors sum{};
  std::size_t count = 0;
  std::size_t k = 0;
  for (std::size_t i = 0; i <= 100; ++i) {
    if (!(static_cast<double>(i) / 100.0 > min_recall)) continue;
    while (k < n_tp && 100 * (k + 1) < i * n_gt) ++k;
    if (k >= n_tp) break;
    sum.ate += cummean[k].ate;
    sum.ase += cummean[k].ase;
    sum.aoe += cummean[k].aoe;
    sum.ave += cummean[k].ave;
    sum.aae += cummean[k].aae;
    ++count;
  }
  if (count == 0) return TPErrors::worst(cls);
  const double n = static_cast<double>(count);
  TPErrors out;
  out.ate = sum.ate / n;
  out.ase = sum.ase / n;
  out.aoe = sum.aoe / n;
  if (has_velocity_terms(cls)) {
    out.ave = sum.ave / n;
    out.aae = sum.aae / n;
  } else {
    out.ave.reset();
    out.aae.reset();
  }
  return out;
}

double nds(double map_score, const MeanTPErrors& e) {
  const auto score = [](double err) { return std::max(1.0 - err, 0.0); };
  return (5.0 * map_score + score(e.ate) + score(e.ase) + score(e.aoe) + score(e.ave) +
          score(e.aae)) /
         10.0;
}

std::optional<double> DetEvalReport::ap(DetClass c, std::size_t threshold_idx) const {
  const auto it = per_class.find(c);
  if (it == per_class.end() || threshold_idx >= it->second.ap.size()) return std::nullopt;
  return it->second.ap[threshold_idx];
}

FrameBoxes filter_by_range(const FrameBoxes& boxes, const DetEvalConfig& config,
                           double range_scale) {
  FrameBoxes out;
  for (const auto& [frame, list] : boxes) {
    auto& kept = out[frame];
    for (const DetectionBox3D& b : list) {
      if (std::hypot(b.center.x(), b.center.y()) <= config.range(b.class_name) * range_scale) {
        kept.push_back(b);
      }
    }
  }
  return out;
}

DetEvalReport evaluate_detections(const FrameBoxes& preds, const FrameBoxes& gts,
                                  const DetEvalConfig& config) {
  validate(config);
  for (const auto& [frame, _] : preds) {
    if (!gts.contains(frame)) {
      throw FrameMismatchError("prediction frame '" + frame + "' has no ground-truth frame");
    }
  }

  std::array<std::vector<FrameBox>, kNumDetClasses> pred_by_class;
  std::array<std::vector<FrameBox>, kNumDetClasses> gt_by_class;
  const auto bucket = [&](const FrameBoxes& src, auto& dst) {
    for (const auto& [frame, list] : filter_by_range(src, config)) {
      for (const DetectionBox3D& b : list) {
        dst[static_cast<std::size_t>(b.class_name)].push_back({frame, b});
      }
    }
  };
  bucket(preds, pred_by_class);
  bucket(gts, gt_by_class);

  std::array<std::optional<ClassResult>, kNumDetClasses> results;
  parallel_for(kNumDetClasses, [&](std::size_t ci) {
    const auto& p = pred_by_class[ci];
    const auto& g = gt_by_class[ci];
    if (g.empty()) return;
    const DetClass cls = kAllDetClasses[ci];
    ClassResult r;
    r.n_gt = g.size();
    r.n_pred = p.size();
    for (double thr : config.dist_thresholds) {
      r.ap.push_back(*average_precision(match_class(p, g, thr), g.size(), config.min_recall,
                                        config.min_precision));
    }
    const auto tp_matches = match_class(p, g, config.tp_threshold);
    std::vector<std::pair<DetectionBox3D, DetectionBox3D>> pairs;
    for (const Match& m : tp_matches) {
      if (m.tp) pairs.emplace_back(p[m.pred_idx].box, g[*m.gt_idx].box);
    }
    r.tp = config.tp_averaging == TpAveraging::kSimple
               ? tp_error_metrics(pairs, cls)
               : tp_error_metrics_recall_weighted(pairs, g.size(), cls,
                                                  config.min_recall);
    results[ci] = std::move(r);
  });

  DetEvalReport report;
  report.thresholds = config.dist_thresholds;
  for (std::size_t ci = 0; ci < kNumDetClasses; ++ci) {
    if (results[ci]) report.per_class.emplace(kAllDetClasses[ci], std::move(*results[ci]));
  }
  if (report.per_class.empty()) return report;  // mAP 0, worst TP errors, NDS 0

  double ap_sum = 0.0;
  std::size_t ap_count = 0;
  std::array<double, 5> tp_sum{};
  std::array<std::size_t, 5> tp_count{};
  for (const auto& [cls, r] : report.per_class) {
    for (double ap : r.ap) {
      ap_sum += ap;
      ++ap_count;
    }
    const std::array<std::optional<double>, 5> terms = {r.tp.ate, r.tp.ase, r.tp.aoe, r.tp.ave,
                                                        r.tp.aae};
    for (std::size_t t = 0; t < 5; ++t) {
      if (terms[t]) {
        tp_sum[t] += *terms[t];
        ++tp_count[t];
      }
    }
  }
  report.map_score = ap_sum / static_cast<double>(ap_count);
  // A term that applies to none of the evaluated classes carries no error.
  const auto mean_term = [&](std::size_t t) {
    return tp_count[t] ? tp_sum[t] / static_cast<double>(tp_count[t]) : 0.0;
  };
  report.mean_tp = {mean_term(0), mean_term(1), mean_term(2), mean_term(3), mean_term(4)};
  report.nds = nds(report.map_score, report.mean_tp);
  return report;
}

double gap_percent(double real_metric, double sim_metric) {
  if (!(real_metric > 0.0)) {
    throw DomainError("gap_percent needs a positive real metric, got " +
                      std::to_string(real_metric));
  }
  return 100.0 * (real_metric - sim_metric) / real_metric;
}

std::string report_json(const DetEvalReport& report, int indent) {
  using nlohmann::json;
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["thresholds"] = report.thresholds;
  j["map"] = report.map_score;
  j["nds"] = report.nds;
  j["mean_tp"] = {{"ate", report.mean_tp.ate},
                  {"ase", report.mean_tp.ase},
                  {"aoe", report.mean_tp.aoe},
                  {"ave", report.mean_tp.ave},
                  {"aae", report.mean_tp.aae}};
  json classes = json::object();
  for (const auto& [cls, r] : report.per_class) {
    classes[std::string(to_string(cls))] = {
        {"ap", r.ap},
        {"n_gt", r.n_gt},
        {"n_pred", r.n_pred},
        {"tp", {{"ate", r.tp.ate},
                {"ase", r.tp.ase},
                {"aoe", r.tp.aoe},
                {"ave", opt(r.tp.ave)},
                {"aae", opt(r.tp.aae)}}}};
  }
  j["per_class"] = std::move(classes);
  return j.dump(indent);
}

std::string report_markdown_row(const std::string& label, const DetEvalReport& report,
                                std::optional<double> da, std::optional<double> gap) {
  const auto fmt = [](std::optional<double> v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", *v);
    return std::string(buf);
  };
  return "| " + label + " | " + fmt(100.0 * report.map_score) + " | " +
         fmt(100.0 * report.nds) + " | " + fmt(da) + " | " + fmt(gap) + " |";
}

}  // namespace r2s
