#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "r2s/core.hpp"

namespace r2s {

/// Ego-pose perturbation for extrapolated-view evaluation. Positive lateral
/// offsets move the ego vehicle left (+y); rotations are about the ego z-axis.
struct EgoPerturbation {
  enum class Kind { kLateral, kRotation };
  Kind kind = Kind::kLateral;
  double value = 0.0;  // meters for kLateral, degrees in (-180, 180] for kRotation

  static EgoPerturbation lateral(double offset_m) { return {Kind::kLateral, offset_m}; }
  static EgoPerturbation rotation(double angle_deg) {
    return {Kind::kRotation, normalize_deg(angle_deg)};
  }

  EgoPerturbation inverse() const { return {kind, -value}; }
  /// Lateral offsets outside [-3, 3] m are outside the evaluated protocol.
  bool within_protocol() const;
};

/// Parses "lateral:+2.0" or "rot:-30". Throws UsageError.
EgoPerturbation parse_perturbation(std::string_view text);
std::string to_string(const EgoPerturbation& pert);

/// Exact (sin, cos) for multiples of 90 degrees.
std::pair<double, double> sin_cos_deg(double deg);

/// lateral(d): T ∘ translate(0, d, 0); rotation(θ): T ∘ rotate_z(θ).
Pose perturb_pose(const Pose& pose, const EgoPerturbation& pert);

/// Re-expresses ego-frame annotations in the perturbed ego frame.
std::vector<DetectionBox3D> transform_boxes(const std::vector<DetectionBox3D>& boxes,
                                            const EgoPerturbation& pert);
std::vector<MapPolyline> transform_polylines(const std::vector<MapPolyline>& lines,
                                             const EgoPerturbation& pert);
FrameBoxes transform_boxes(const FrameBoxes& boxes, const EgoPerturbation& pert);

/// Applies the perturbation to every frame and records it in the variant tag.
SceneManifest transform_manifest(const SceneManifest& manifest, const EgoPerturbation& pert);

/// Ego footprint used for the shifted-pose feasibility check.
struct EgoFootprint {
  double length = 4.084;  // along x
  double width = 1.730;   // along y
};

struct FeasibilityWarning {
  std::string frame_id;
  std::size_t box_index = 0;
  std::string message;
};

/// Boxes (already in the perturbed frame) whose BEV footprint overlaps the
/// ego footprint at the origin. Never throws on overlap; callers report.
std::vector<FeasibilityWarning> check_feasibility(const SceneManifest& perturbed,
                                                  const EgoFootprint& ego = {});

/// Separating-axis test for two oriented rectangles in the plane.
bool rectangles_overlap(const Vec2& center_a, double yaw_a, double length_a, double width_a,
                        const Vec2& center_b, double yaw_b, double length_b, double width_b);

}  // namespace r2s
