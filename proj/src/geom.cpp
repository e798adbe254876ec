#include "r2s/geom.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace r2s {

bool EgoPerturbation::within_protocol() const {
  return kind != Kind::kLateral || (value >= -3.0 && value <= 3.0);
}

EgoPerturbation parse_perturbation(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw UsageError("perturbation must look like lateral:+2.0 or rot:-30, got '" +
                     std::string(text) + "'");
  }
  const std::string kind(text.substr(0, colon));
  const std::string num(text.substr(colon + 1));
  char* end = nullptr;
  const double v = std::strtod(num.c_str(), &end);
  if (num.empty() || end != num.c_str() + num.size() || !std::isfinite(v)) {
    throw UsageError("bad perturbation value '" + num + "'");
  }
  if (kind == "lateral") return EgoPerturbation::lateral(v);
  if (kind == "rot" || kind == "rotation") return EgoPerturbation::rotation(v);
  throw UsageError("unknown perturbation kind '" + kind + "'");
}

std::string to_string(const EgoPerturbation& pert) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s:%+g",
                pert.kind == EgoPerturbation::Kind::kLateral ? "lateral" : "rot", pert.value);
  return buf;
}

std::pair<double, double> sin_cos_deg(double deg) {
  const double d = normalize_deg(deg);
  if (d == 0.0) return {0.0, 1.0};
  if (d == 90.0) return {1.0, 0.0};
  if (d == 180.0) return {0.0, -1.0};
  if (d == -90.0) return {-1.0, 0.0};
  const double rad = (d / 180.0) * kPi;
  return {std::sin(rad), std::cos(rad)};
}

Pose perturb_pose(const Pose& pose, const EgoPerturbation& pert) {
  Pose delta;
  if (pert.kind == EgoPerturbation::Kind::kLateral) {
    delta.translation = Vec3(0.0, pert.value, 0.0);
  } else {
    const double half = 0.5 * (pert.value / 180.0) * kPi;
    delta.rotation = Eigen::Quaterniond(std::cos(half), 0.0, 0.0, std::sin(half));
  }
  return pose.compose(delta);
}

namespace {

/// Maps an ego-frame planar point into the perturbed frame.
Vec2 to_perturbed(const Vec2& p, const EgoPerturbation& pert) {
  if (pert.kind == EgoPerturbation::Kind::kLateral) return {p.x(), p.y() - pert.value};
  const auto [s, c] = sin_cos_deg(pert.value);
  return {c * p.x() + s * p.y(), -s * p.x() + c * p.y()};
}

Vec2 rotate_vector(const Vec2& v, const EgoPerturbation& pert) {
  if (pert.kind == EgoPerturbation::Kind::kLateral) return v;
  const auto [s, c] = sin_cos_deg(pert.value);
  return {c * v.x() + s * v.y(), -s * v.x() + c * v.y()};
}

}  // namespace

std::vector<DetectionBox3D> transform_boxes(const std::vector<DetectionBox3D>& boxes,
                                            const EgoPerturbation& pert) {
  std::vector<DetectionBox3D> out = boxes;
  for (DetectionBox3D& b : out) {
    const Vec2 c = to_perturbed(b.center.head<2>(), pert);
    b.center.x() = c.x();
    b.center.y() = c.y();
    if (pert.kind == EgoPerturbation::Kind::kRotation) {
      b.yaw = normalize_yaw(b.yaw - (pert.value / 180.0) * kPi);
      if (b.velocity) b.velocity = rotate_vector(*b.velocity, pert);
    }
  }
  return out;
}

std::vector<MapPolyline> transform_polylines(const std::vector<MapPolyline>& lines,
                                             const EgoPerturbation& pert) {
  std::vector<MapPolyline> out = lines;
  for (MapPolyline& l : out) {
    for (Vec2& p : l.points) p = to_perturbed(p, pert);
  }
  return out;
}

FrameBoxes transform_boxes(const FrameBoxes& boxes, const EgoPerturbation& pert) {
  FrameBoxes out;
  for (const auto& [frame, list] : boxes) out.emplace(frame, transform_boxes(list, pert));
  return out;
}

SceneManifest transform_manifest(const SceneManifest& manifest, const EgoPerturbation& pert) {
  SceneManifest out = manifest;
  out.variant = pert.kind == EgoPerturbation::Kind::kLateral
                    ? SceneVariant::shifted(pert.value)
                    : SceneVariant::rotated(pert.value);
  for (FrameRecord& f : out.frames) {
    f.ego_pose = perturb_pose(f.ego_pose, pert);
    f.boxes = transform_boxes(f.boxes, pert);
    f.polylines = transform_polylines(f.polylines, pert);
  }
  return out;
}

bool rectangles_overlap(const Vec2& center_a, double yaw_a, double length_a, double width_a,
                        const Vec2& center_b, double yaw_b, double length_b, double width_b) {
  const auto axes = [](double yaw) {
    return std::array<Vec2, 2>{Vec2(std::cos(yaw), std::sin(yaw)),
                               Vec2(-std::sin(yaw), std::cos(yaw))};
  };
  const auto ax_a = axes(yaw_a);
  const auto ax_b = axes(yaw_b);
  const Vec2 d = center_b - center_a;
  const auto radius = [](const std::array<Vec2, 2>& ax, double len, double wid, const Vec2& n) {
    return 0.5 * len * std::abs(ax[0].dot(n)) + 0.5 * wid * std::abs(ax[1].dot(n));
  };
  for (const auto& axis_set : {ax_a, ax_b}) {
    for (const Vec2& n : axis_set) {
      if (std::abs(d.dot(n)) >
          radius(ax_a, length_a, width_a, n) + radius(ax_b, length_b, width_b, n)) {
        return false;
      }
    }
  }
  return true;
}

std::vector<FeasibilityWarning> check_feasibility(const SceneManifest& perturbed,
                                                  const EgoFootprint& ego) {
  std::vector<FeasibilityWarning> warnings;
  for (const FrameRecord& f : perturbed.frames) {
    for (std::size_t i = 0; i < f.boxes.size(); ++i) {
      const DetectionBox3D& b = f.boxes[i];
      if (rectangles_overlap(Vec2::Zero(), 0.0, ego.length, ego.width, b.center.head<2>(), b.yaw,
                             b.size.y(), b.size.x())) {
        warnings.push_back({f.frame_id, i,
                            "ego footprint overlaps a " + std::string(to_string(b.class_name)) +
                                " box"});
      }
    }
  }
  return warnings;
}

}  // namespace r2s
