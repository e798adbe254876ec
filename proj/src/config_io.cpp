#include "r2s/config_io.hpp"

#include <set>

#include <json.hpp>

namespace r2s {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

namespace {

json parse_object(std::string_view text, const char* what) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError(std::string(what) + ": expected a JSON object");
  return doc;
}

void reject_unknown(const json& doc, const std::set<std::string>& allowed, const char* what) {
  for (const auto& [key, _] : doc.items()) {
    if (!allowed.contains(key)) {
      throw ParseError(std::string(what) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& doc, const char* key, T& out, const char* what) {
  const auto it = doc.find(key);
  if (it == doc.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": bad '" + key + "': " + e.what());
  }
}

DetEvalConfig det_from(const json& doc) {
  constexpr const char* what = "detection config";
  reject_unknown(doc,
                 {"dist_thresholds", "class_ranges", "min_recall", "min_precision", "tp_threshold",
                  "tp_averaging"},
                 what);
  DetEvalConfig c;
  read(doc, "dist_thresholds", c.dist_thresholds, what);
  read(doc, "min_recall", c.min_recall, what);
  read(doc, "min_precision", c.min_precision, what);
  read(doc, "tp_threshold", c.tp_threshold, what);
  if (const auto it = doc.find("class_ranges"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("detection config: class_ranges must be an object");
    for (const auto& [name, v] : it->items()) {
      c.class_ranges[static_cast<std::size_t>(parse_det_class(name))] = v.get<double>();
    }
  }
  std::string averaging = "simple";
  read(doc, "tp_averaging", averaging, what);
  if (averaging == "simple") {
    c.tp_averaging = TpAveraging::kSimple;
  } else if (averaging == "recall_weighted") {
    c.tp_averaging = TpAveraging::kRecallWeighted;
  } else {
    throw ParseError("detection config: tp_averaging must be 'simple' or 'recall_weighted'");
  }
  validate(c);
  return c;
}

MapEvalConfig map_from(const json& doc) {
  constexpr const char* what = "map config";
  reject_unknown(doc, {"chamfer_thresholds", "resample_points", "x_half", "y_half"}, what);
  MapEvalConfig c;
  read(doc, "chamfer_thresholds", c.chamfer_thresholds, what);
  read(doc, "resample_points", c.resample_points, what);
  read(doc, "x_half", c.x_half, what);
  read(doc, "y_half", c.y_half, what);
  validate(c);
  return c;
}

ordered det_json(const DetEvalConfig& c) {
  ordered j;
  j["dist_thresholds"] = c.dist_thresholds;
  ordered ranges;
  for (DetClass cls : kAllDetClasses) ranges[std::string(to_string(cls))] = c.range(cls);
  j["class_ranges"] = std::move(ranges);
  j["min_recall"] = c.min_recall;
  j["min_precision"] = c.min_precision;
  j["tp_threshold"] = c.tp_threshold;
  j["tp_averaging"] = c.tp_averaging == TpAveraging::kSimple ? "simple" : "recall_weighted";
  return j;
}

ordered map_json(const MapEvalConfig& c) {
  ordered j;
  j["chamfer_thresholds"] = c.chamfer_thresholds;
  j["resample_points"] = c.resample_points;
  j["x_half"] = c.x_half;
  j["y_half"] = c.y_half;
  return j;
}

}  // namespace

DetEvalConfig parse_det_config(std::string_view text) {
  return det_from(parse_object(text, "detection config"));
}

MapEvalConfig parse_map_config(std::string_view text) {
  return map_from(parse_object(text, "map config"));
}

AgreementConfig parse_agreement_config(std::string_view text) {
  constexpr const char* what = "agreement config";
  const json doc = parse_object(text, what);
  reject_unknown(doc, {"da_threshold", "pseudo_gt_score_min", "range_fractions", "det", "map"},
                 what);
  AgreementConfig c;
  read(doc, "da_threshold", c.da_threshold, what);
  read(doc, "pseudo_gt_score_min", c.pseudo_gt_score_min, what);
  read(doc, "range_fractions", c.range_fractions, what);
  if (const auto it = doc.find("det"); it != doc.end()) c.det = det_from(*it);
  if (const auto it = doc.find("map"); it != doc.end()) c.map = map_from(*it);
  validate(c);
  return c;
}

AugmentConfig parse_augment_config(std::string_view text) {
  constexpr const char* what = "augment config";
  const json doc = parse_object(text, what);
  reject_unknown(doc,
                 {"p_noise", "noise_sigma", "p_blur", "blur_kernel", "blur_sigma", "p_photometric",
                  "brightness_delta", "contrast_lower", "contrast_upper", "saturation_lower",
                  "saturation_upper", "hue_delta_deg", "p_downup", "downup_factor",
                  "downup_method"},
                 what);
  AugmentConfig c;
  read(doc, "p_noise", c.p_noise, what);
  read(doc, "noise_sigma", c.noise_sigma, what);
  read(doc, "p_blur", c.p_blur, what);
  read(doc, "blur_kernel", c.blur_kernel, what);
  read(doc, "blur_sigma", c.blur_sigma, what);
  read(doc, "p_photometric", c.p_photometric, what);
  read(doc, "brightness_delta", c.brightness_delta, what);
  read(doc, "contrast_lower", c.contrast_lower, what);
  read(doc, "contrast_upper", c.contrast_upper, what);
  read(doc, "saturation_lower", c.saturation_lower, what);
  read(doc, "saturation_upper", c.saturation_upper, what);
  read(doc, "hue_delta_deg", c.hue_delta_deg, what);
  read(doc, "p_downup", c.p_downup, what);
  read(doc, "downup_factor", c.downup_factor, what);
  read(doc, "downup_method", c.downup_method, what);
  validate(c);
  return c;
}

std::string to_json(const DetEvalConfig& config) { return det_json(config).dump(2) + "\n"; }
std::string to_json(const MapEvalConfig& config) { return map_json(config).dump(2) + "\n"; }

std::string to_json(const AgreementConfig& config) {
  ordered j;
  j["da_threshold"] = config.da_threshold;
  j["pseudo_gt_score_min"] = config.pseudo_gt_score_min;
  j["range_fractions"] = config.range_fractions;
  j["det"] = det_json(config.det);
  j["map"] = map_json(config.map);
  return j.dump(2) + "\n";
}

std::string to_json(const AugmentConfig& c) {
  ordered j;
  j["p_noise"] = c.p_noise;
  j["noise_sigma"] = c.noise_sigma;
  j["p_blur"] = c.p_blur;
  j["blur_kernel"] = c.blur_kernel;
  j["blur_sigma"] = c.blur_sigma;
  j["p_photometric"] = c.p_photometric;
  j["brightness_delta"] = c.brightness_delta;
  j["contrast_lower"] = c.contrast_lower;
  j["contrast_upper"] = c.contrast_upper;
  j["saturation_lower"] = c.saturation_lower;
  j["saturation_upper"] = c.saturation_upper;
  j["hue_delta_deg"] = c.hue_delta_deg;
  j["p_downup"] = c.p_downup;
  j["downup_factor"] = c.downup_factor;
  j["downup_method"] = c.downup_method;
  return j.dump(2) + "\n";
}

}  // namespace r2s
