#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "r2s/errors.hpp"

namespace r2s {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle in radians into (-pi, pi].
double normalize_yaw(double yaw);

/// Wraps an angle in degrees into (-180, 180].
double normalize_deg(double deg);

/// Rigid ego-to-global transform. Rotation is a unit quaternion.
struct Pose {
  Vec3 translation = Vec3::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  static Pose identity() { return {}; }

  /// this ∘ other: first apply `other`, then `this`.
  Pose compose(const Pose& other) const;
  Pose inverse() const;
  Vec3 apply(const Vec3& p) const;
};

/// True when translations and rotations (up to quaternion sign) agree within tol.
bool approx_equal(const Pose& a, const Pose& b, double tol);

// ---------------------------------------------------------------------------
// Classes

enum class DetClass : std::uint8_t {
  kCar,
  kTruck,
  kBus,
  kTrailer,
  kConstructionVehicle,
  kPedestrian,
  kMotorcycle,
  kBicycle,
  kTrafficCone,
  kBarrier,
};

inline constexpr std::size_t kNumDetClasses = 10;
inline constexpr std::array<DetClass, kNumDetClasses> kAllDetClasses = {
    DetClass::kCar,        DetClass::kTruck,      DetClass::kBus,
    DetClass::kTrailer,    DetClass::kConstructionVehicle,
    DetClass::kPedestrian, DetClass::kMotorcycle, DetClass::kBicycle,
    DetClass::kTrafficCone, DetClass::kBarrier,
};

std::string_view to_string(DetClass c);
/// Throws UnknownClassError.
DetClass parse_det_class(std::string_view name);

enum class MapClass : std::uint8_t { kDivider, kBoundary, kCrossing };

inline constexpr std::size_t kNumMapClasses = 3;
inline constexpr std::array<MapClass, kNumMapClasses> kAllMapClasses = {
    MapClass::kDivider, MapClass::kBoundary, MapClass::kCrossing};

std::string_view to_string(MapClass c);
/// Throws UnknownClassError.
MapClass parse_map_class(std::string_view name);

// ---------------------------------------------------------------------------
// Annotations

/// A 3D box in the ego frame (x forward, y left, z up).
struct DetectionBox3D {
  DetClass class_name = DetClass::kCar;
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();  // (w, l, h)
  double yaw = 0.0;
  std::optional<Vec2> velocity;
  double score = 1.0;
  std::optional<std::string> attribute;
};

struct MapPolyline {
  MapClass class_name = MapClass::kDivider;
  std::vector<Vec2> points;
  double score = 1.0;
};

/// Throws ValidationError naming `where` if an invariant is violated.
void validate(const DetectionBox3D& box, std::string_view where);
void validate(const MapPolyline& line, std::string_view where);

// ---------------------------------------------------------------------------
// Scenes

struct SceneVariant {
  enum class Kind : std::uint8_t { kReal, kSim, kShifted, kRotated };
  Kind kind = Kind::kReal;
  double value = 0.0;  // offset_m for kShifted, angle_deg for kRotated

  static SceneVariant real() { return {Kind::kReal, 0.0}; }
  static SceneVariant sim() { return {Kind::kSim, 0.0}; }
  static SceneVariant shifted(double offset_m) { return {Kind::kShifted, offset_m}; }
  static SceneVariant rotated(double angle_deg) { return {Kind::kRotated, angle_deg}; }

  bool operator==(const SceneVariant&) const = default;
};

struct FrameRecord {
  std::string frame_id;
  std::int64_t timestamp = 0;  // microseconds
  Pose ego_pose;
  std::map<std::string, std::string> images;  // camera_id -> path
  std::vector<DetectionBox3D> boxes;
  std::vector<MapPolyline> polylines;
};

struct SceneManifest {
  std::string scene_id;
  SceneVariant variant;
  std::vector<FrameRecord> frames;
};

struct LoadOptions {
  std::size_t max_boxes_per_frame = 500;
};

/// Checks every manifest invariant; throws ValidationError naming the record.
void validate(const SceneManifest& manifest, const LoadOptions& options = {});

/// Parses a manifest document. Normalizes yaw into (-pi, pi], renormalizes
/// quaternions whose norm is within 1e-6 of one, and closes crossing polygons.
SceneManifest parse_manifest(std::string_view json_text, const LoadOptions& options = {});
SceneManifest load_manifest(const std::filesystem::path& path, const LoadOptions& options = {});

/// Canonical JSON text (two-space indent, trailing newline).
std::string dump_manifest(const SceneManifest& manifest);
void save_manifest(const SceneManifest& manifest, const std::filesystem::path& path);

/// Structural equality (exact on every numeric field).
bool operator==(const DetectionBox3D& a, const DetectionBox3D& b);
bool operator==(const MapPolyline& a, const MapPolyline& b);
bool operator==(const FrameRecord& a, const FrameRecord& b);
bool operator==(const SceneManifest& a, const SceneManifest& b);

/// frame_id -> boxes / polylines, ordered by frame id.
using FrameBoxes = std::map<std::string, std::vector<DetectionBox3D>>;
using FramePolylines = std::map<std::string, std::vector<MapPolyline>>;

FrameBoxes boxes_by_frame(const SceneManifest& manifest);
FramePolylines polylines_by_frame(const SceneManifest& manifest);

/// Merges several scenes; throws ValidationError on a frame id seen twice.
FrameBoxes merge_boxes(const std::vector<SceneManifest>& scenes);
FramePolylines merge_polylines(const std::vector<SceneManifest>& scenes);

// ---------------------------------------------------------------------------
// Features

/// N x D single-precision feature matrix, one row per image id.
struct FeatureSet {
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> features;
  std::vector<std::string> ids;

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(features.cols()); }
};

void validate(const FeatureSet& set);

/// `feats.fvec` -> `feats.ids.json`.
std::filesystem::path feature_ids_path(const std::filesystem::path& fvec_path);

/// Reads the FVEC binary plus its id sidecar.
/// Throws FormatError, TruncationError, ParseError, ValidationError, IoError.
FeatureSet load_feature_set(const std::filesystem::path& path);
FeatureSet parse_feature_set(std::string_view fvec_bytes, const std::vector<std::string>& ids);
void save_feature_set(const FeatureSet& set, const std::filesystem::path& path);
std::string encode_fvec(const FeatureSet& set);

/// Whole-file read helper; throws IoError.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace r2s
