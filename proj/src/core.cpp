#include "r2s/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace r2s {

using nlohmann::json;

namespace {

constexpr double kQuatTolerance = 1e-6;
constexpr double kQuatExactTolerance = 1e-12;

constexpr std::array<std::string_view, kNumDetClasses> kDetClassNames = {
    "car",        "truck",      "bus",     "trailer",       "construction_vehicle",
    "pedestrian", "motorcycle", "bicycle", "traffic_cone", "barrier",
};

constexpr std::array<std::string_view, kNumMapClasses> kMapClassNames = {
    "divider", "boundary", "crossing"};

}  // namespace

double normalize_yaw(double yaw) {
  double r = std::remainder(yaw, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

double normalize_deg(double deg) {
  double r = std::remainder(deg, 360.0);
  if (r <= -180.0) r += 360.0;
  return r;
}

Pose Pose::compose(const Pose& other) const {
  Pose out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

Pose Pose::inverse() const {
  Pose out;
  out.rotation = rotation.conjugate();
  out.translation = -(out.rotation * translation);
  return out;
}

Vec3 Pose::apply(const Vec3& p) const { return rotation * p + translation; }

bool approx_equal(const Pose& a, const Pose& b, double tol) {
  if ((a.translation - b.translation).cwiseAbs().maxCoeff() > tol) return false;
  const Eigen::Vector4d qa = a.rotation.coeffs();
  const Eigen::Vector4d qb = b.rotation.coeffs();
  return (qa - qb).cwiseAbs().maxCoeff() <= tol || (qa + qb).cwiseAbs().maxCoeff() <= tol;
}

std::string_view to_string(DetClass c) { return kDetClassNames[static_cast<std::size_t>(c)]; }

DetClass parse_det_class(std::string_view name) {
  for (std::size_t i = 0; i < kNumDetClasses; ++i) {
    if (kDetClassNames[i] == name) return kAllDetClasses[i];
  }
  throw UnknownClassError("unknown detection class '" + std::string(name) + "'");
}

std::string_view to_string(MapClass c) { return kMapClassNames[static_cast<std::size_t>(c)]; }

MapClass parse_map_class(std::string_view name) {
  for (std::size_t i = 0; i < kNumMapClasses; ++i) {
    if (kMapClassNames[i] == name) return kAllMapClasses[i];
  }
  throw UnknownClassError("unknown map class '" + std::string(name) + "'");
}

void validate(const DetectionBox3D& box, std::string_view where) {
  const auto fail = [&](const std::string& what) {
    throw ValidationError(std::string(where) + ": " + what);
  };
  if (!box.center.allFinite() || !box.size.allFinite() || !std::isfinite(box.yaw)) {
    fail("non-finite box geometry");
  }
  if ((box.size.array() <= 0.0).any()) fail("box size must be strictly positive");
  if (!(box.score >= 0.0 && box.score <= 1.0)) fail("score outside [0,1]");
  if (!(box.yaw > -kPi && box.yaw <= kPi)) fail("yaw not normalized to (-pi, pi]");
  if (box.velocity && !box.velocity->allFinite()) fail("non-finite velocity");
}

void validate(const MapPolyline& line, std::string_view where) {
  const auto fail = [&](const std::string& what) {
    throw ValidationError(std::string(where) + ": " + what);
  };
  if (line.points.size() < 2) fail("polyline needs at least 2 points");
  if (!(line.score >= 0.0 && line.score <= 1.0)) fail("score outside [0,1]");
  for (std::size_t i = 0; i < line.points.size(); ++i) {
    if (!line.points[i].allFinite()) fail("non-finite polyline point");
    if (i > 0 && line.points[i] == line.points[i - 1]) {
      fail("consecutive identical points at index " + std::to_string(i));
    }
  }
}

void validate(const SceneManifest& manifest, const LoadOptions& options) {
  std::unordered_set<std::string> seen;
  std::int64_t last_ts = std::numeric_limits<std::int64_t>::min();
  for (const FrameRecord& frame : manifest.frames) {
    const std::string where = "frame '" + frame.frame_id + "'";
    if (!seen.insert(frame.frame_id).second) {
      throw ValidationError(where + ": duplicate frame_id");
    }
    if (frame.timestamp < last_ts) {
      throw ValidationError(where + ": timestamps must be nondecreasing");
    }
    last_ts = frame.timestamp;
    const double qnorm = frame.ego_pose.rotation.norm();
    if (!std::isfinite(qnorm) || std::abs(qnorm - 1.0) > 1e-9) {
      throw ValidationError(where + ": ego_pose rotation is not a unit quaternion (norm " +
                            std::to_string(qnorm) + ")");
    }
    if (!frame.ego_pose.translation.allFinite()) {
      throw ValidationError(where + ": non-finite ego_pose translation");
    }
    if (frame.boxes.size() > options.max_boxes_per_frame) {
      throw ValidationError(where + ": " + std::to_string(frame.boxes.size()) +
                            " boxes exceed the per-frame cap of " +
                            std::to_string(options.max_boxes_per_frame));
    }
    for (std::size_t i = 0; i < frame.boxes.size(); ++i) {
      validate(frame.boxes[i], where + " box " + std::to_string(i));
    }
    for (std::size_t i = 0; i < frame.polylines.size(); ++i) {
      validate(frame.polylines[i], where + " polyline " + std::to_string(i));
    }
  }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

/// Rejects duplicate object keys, which nlohmann would otherwise overwrite.
json parse_strict(std::string_view text) {
  std::vector<std::set<std::string>> key_stack;
  std::string duplicate;
  const json::parser_callback_t cb = [&](int /*depth*/, json::parse_event_t event,
                                         json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start:
        key_stack.emplace_back();
        break;
      case json::parse_event_t::object_end:
        if (!key_stack.empty()) key_stack.pop_back();
        break;
      case json::parse_event_t::key:
        if (!key_stack.empty() && !key_stack.back().insert(parsed.get<std::string>()).second &&
            duplicate.empty()) {
          duplicate = parsed.get<std::string>();
        }
        break;
      default:
        break;
    }
    return true;
  };
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), cb);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  if (!duplicate.empty()) throw ParseError("duplicate key '" + duplicate + "'");
  return doc;
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": bad field '" + key + "': " + e.what());
  }
}

Vec3 parse_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ParseError(where + ": expected a 3-vector");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
}

Vec2 parse_vec2(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ParseError(where + ": expected a 2-vector");
  try {
    return {j[0].get<double>(), j[1].get<double>()};
  } catch (const json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
}

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

DetectionBox3D parse_box(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  DetectionBox3D box;
  box.class_name = parse_det_class(field<std::string>(j, "class_name", where));
  box.center = parse_vec3(j.at("center"), where + " center");
  if (!j.contains("size")) throw ParseError(where + ": missing field 'size'");
  box.size = parse_vec3(j.at("size"), where + " size");
  box.yaw = normalize_yaw(field<double>(j, "yaw", where));
  if (const auto it = j.find("velocity"); it != j.end() && !it->is_null()) {
    box.velocity = parse_vec2(*it, where + " velocity");
  }
  box.score = j.contains("score") ? field<double>(j, "score", where) : 1.0;
  if (const auto it = j.find("attribute"); it != j.end() && !it->is_null()) {
    box.attribute = field<std::string>(j, "attribute", where);
  }
  return box;
}

json box_json(const DetectionBox3D& box) {
  json j;
  j["class_name"] = std::string(to_string(box.class_name));
  j["center"] = vec_json(box.center);
  j["size"] = vec_json(box.size);
  j["yaw"] = box.yaw;
  j["velocity"] = box.velocity ? vec_json(*box.velocity) : json(nullptr);
  j["score"] = box.score;
  j["attribute"] = box.attribute ? json(*box.attribute) : json(nullptr);
  return j;
}

MapPolyline parse_polyline(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  MapPolyline line;
  line.class_name = parse_map_class(field<std::string>(j, "class_name", where));
  const auto pts = j.find("points");
  if (pts == j.end() || !pts->is_array()) throw ParseError(where + ": missing points array");
  for (const json& p : *pts) line.points.push_back(parse_vec2(p, where + " point"));
  line.score = j.contains("score") ? field<double>(j, "score", where) : 1.0;
  // Crossings are closed polygons; carry the closing point explicitly.
  if (line.class_name == MapClass::kCrossing && line.points.size() >= 3 &&
      line.points.front() != line.points.back()) {
    line.points.push_back(line.points.front());
  }
  return line;
}

json polyline_json(const MapPolyline& line) {
  json j;
  j["class_name"] = std::string(to_string(line.class_name));
  json pts = json::array();
  for (const Vec2& p : line.points) pts.push_back(vec_json(p));
  j["points"] = std::move(pts);
  j["score"] = line.score;
  return j;
}

SceneVariant parse_variant(const json& j) {
  const auto from_kind = [](const std::string& kind, const json& obj) {
    if (kind == "real") return SceneVariant::real();
    if (kind == "sim") return SceneVariant::sim();
    if (kind == "shifted") return SceneVariant::shifted(field<double>(obj, "offset_m", "variant"));
    if (kind == "rotated") return SceneVariant::rotated(field<double>(obj, "angle_deg", "variant"));
    throw ParseError("variant: unknown kind '" + kind + "'");
  };
  if (j.is_string()) {
    const auto kind = j.get<std::string>();
    if (kind != "real" && kind != "sim") {
      throw ParseError("variant: '" + kind + "' needs an object with its parameter");
    }
    return from_kind(kind, json::object());
  }
  if (j.is_object()) return from_kind(field<std::string>(j, "kind", "variant"), j);
  throw ParseError("variant: expected a string or an object");
}

json variant_json(const SceneVariant& v) {
  switch (v.kind) {
    case SceneVariant::Kind::kReal:
      return {{"kind", "real"}};
    case SceneVariant::Kind::kSim:
      return {{"kind", "sim"}};
    case SceneVariant::Kind::kShifted:
      return {{"kind", "shifted"}, {"offset_m", v.value}};
    case SceneVariant::Kind::kRotated:
      return {{"kind", "rotated"}, {"angle_deg", v.value}};
  }
  return {};
}

Pose parse_pose(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": ego_pose must be an object");
  Pose pose;
  pose.translation = parse_vec3(j.at("translation"), where + " translation");
  const json& q = j.at("rotation");
  if (!q.is_array() || q.size() != 4) throw ParseError(where + ": rotation must be [w,x,y,z]");
  pose.rotation = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                     q[3].get<double>());
  const double n = pose.rotation.norm();
  if (std::abs(n - 1.0) > kQuatTolerance) {
    throw ValidationError(where + ": ego_pose rotation is not a unit quaternion (norm " +
                          std::to_string(n) + ")");
  }
  if (std::abs(n - 1.0) > kQuatExactTolerance) pose.rotation.normalize();
  return pose;
}

json pose_json(const Pose& pose) {
  const auto& q = pose.rotation;
  return {{"translation", vec_json(pose.translation)},
          {"rotation", json::array({q.w(), q.x(), q.y(), q.z()})}};
}

}  // namespace

SceneManifest parse_manifest(std::string_view json_text, const LoadOptions& options) {
  const json doc = parse_strict(json_text);
  if (!doc.is_object()) throw ParseError("manifest must be a JSON object");
  SceneManifest m;
  m.scene_id = field<std::string>(doc, "scene_id", "manifest");
  m.variant = doc.contains("variant") ? parse_variant(doc.at("variant")) : SceneVariant::real();
  const auto frames = doc.find("frames");
  if (frames == doc.end() || !frames->is_array()) throw ParseError("manifest: missing frames");
  m.frames.reserve(frames->size());
  for (std::size_t fi = 0; fi < frames->size(); ++fi) {
    const json& jf = (*frames)[fi];
    std::string where = "frame #" + std::to_string(fi);
    if (!jf.is_object()) throw ParseError(where + ": expected an object");
    FrameRecord f;
    f.frame_id = field<std::string>(jf, "frame_id", where);
    where = "frame '" + f.frame_id + "'";
    f.timestamp = field<std::int64_t>(jf, "timestamp", where);
    try {
      f.ego_pose = jf.contains("ego_pose") ? parse_pose(jf.at("ego_pose"), where) : Pose{};
      if (const auto it = jf.find("images"); it != jf.end()) {
        if (!it->is_object()) throw ParseError(where + ": images must be an object");
        for (const auto& [cam, path] : it->items()) f.images.emplace(cam, path.get<std::string>());
      }
      if (const auto it = jf.find("boxes"); it != jf.end() && !it->is_null()) {
        for (std::size_t i = 0; i < it->size(); ++i) {
          f.boxes.push_back(parse_box((*it)[i], where + " box " + std::to_string(i)));
        }
      }
      if (const auto it = jf.find("polylines"); it != jf.end() && !it->is_null()) {
        for (std::size_t i = 0; i < it->size(); ++i) {
          f.polylines.push_back(parse_polyline((*it)[i], where + " polyline " + std::to_string(i)));
        }
      }
    } catch (const json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    m.frames.push_back(std::move(f));
  }
  validate(m, options);
  return m;
}

SceneManifest load_manifest(const std::filesystem::path& path, const LoadOptions& options) {
  return parse_manifest(read_file(path), options);
}

std::string dump_manifest(const SceneManifest& manifest) {
  json doc;
  doc["scene_id"] = manifest.scene_id;
  doc["variant"] = variant_json(manifest.variant);
  json frames = json::array();
  for (const FrameRecord& f : manifest.frames) {
    json jf;
    jf["frame_id"] = f.frame_id;
    jf["timestamp"] = f.timestamp;
    jf["ego_pose"] = pose_json(f.ego_pose);
    jf["images"] = json::object();
    for (const auto& [cam, path] : f.images) jf["images"][cam] = path;
    jf["boxes"] = json::array();
    for (const auto& b : f.boxes) jf["boxes"].push_back(box_json(b));
    jf["polylines"] = json::array();
    for (const auto& l : f.polylines) jf["polylines"].push_back(polyline_json(l));
    frames.push_back(std::move(jf));
  }
  doc["frames"] = std::move(frames);
  return doc.dump(2) + "\n";
}

void save_manifest(const SceneManifest& manifest, const std::filesystem::path& path) {
  write_file(path, dump_manifest(manifest));
}

bool operator==(const DetectionBox3D& a, const DetectionBox3D& b) {
  return a.class_name == b.class_name && a.center == b.center && a.size == b.size &&
         a.yaw == b.yaw && a.velocity == b.velocity && a.score == b.score &&
         a.attribute == b.attribute;
}

bool operator==(const MapPolyline& a, const MapPolyline& b) {
  return a.class_name == b.class_name && a.points == b.points && a.score == b.score;
}

bool operator==(const FrameRecord& a, const FrameRecord& b) {
  return a.frame_id == b.frame_id && a.timestamp == b.timestamp &&
         a.ego_pose.translation == b.ego_pose.translation &&
         a.ego_pose.rotation.coeffs() == b.ego_pose.rotation.coeffs() && a.images == b.images &&
         a.boxes == b.boxes && a.polylines == b.polylines;
}

bool operator==(const SceneManifest& a, const SceneManifest& b) {
  return a.scene_id == b.scene_id && a.variant == b.variant && a.frames == b.frames;
}

FrameBoxes boxes_by_frame(const SceneManifest& manifest) {
  FrameBoxes out;
  for (const auto& f : manifest.frames) out[f.frame_id] = f.boxes;
  return out;
}

FramePolylines polylines_by_frame(const SceneManifest& manifest) {
  FramePolylines out;
  for (const auto& f : manifest.frames) out[f.frame_id] = f.polylines;
  return out;
}

FrameBoxes merge_boxes(const std::vector<SceneManifest>& scenes) {
  FrameBoxes out;
  for (const auto& s : scenes) {
    for (const auto& f : s.frames) {
      if (!out.emplace(f.frame_id, f.boxes).second) {
        throw ValidationError("frame '" + f.frame_id + "' appears in more than one scene");
      }
    }
  }
  return out;
}

FramePolylines merge_polylines(const std::vector<SceneManifest>& scenes) {
  FramePolylines out;
  for (const auto& s : scenes) {
    for (const auto& f : s.frames) {
      if (!out.emplace(f.frame_id, f.polylines).second) {
        throw ValidationError("frame '" + f.frame_id + "' appears in more than one scene");
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// FVEC

namespace {

constexpr char kFvecMagic[4] = {'R', '2', 'S', 'F'};
constexpr std::uint32_t kFvecVersion = 1;
constexpr std::size_t kFvecHeaderBytes = 16;

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void append_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

}  // namespace

void validate(const FeatureSet& set) {
  if (set.rows() != set.ids.size()) {
    throw ValidationError("feature set has " + std::to_string(set.rows()) + " rows but " +
                          std::to_string(set.ids.size()) + " ids");
  }
  if (!set.features.allFinite()) throw ValidationError("feature set contains non-finite values");
}

std::filesystem::path feature_ids_path(const std::filesystem::path& fvec_path) {
  auto p = fvec_path;
  p.replace_extension(".ids.json");
  return p;
}

FeatureSet parse_feature_set(std::string_view bytes, const std::vector<std::string>& ids) {
  if (bytes.size() < kFvecHeaderBytes) throw TruncationError("FVEC header truncated");
  if (std::memcmp(bytes.data(), kFvecMagic, 4) != 0) throw FormatError("FVEC bad magic");
  const auto* u = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t version = read_u32_le(u + 4);
  if (version != kFvecVersion) {
    throw FormatError("FVEC unsupported version " + std::to_string(version));
  }
  const std::uint64_t n = read_u32_le(u + 8);
  const std::uint64_t d = read_u32_le(u + 12);
  const std::uint64_t payload = n * d * 4;
  const std::uint64_t have = bytes.size() - kFvecHeaderBytes;
  if (have < payload) {
    throw TruncationError("FVEC payload has " + std::to_string(have) + " bytes, expected " +
                          std::to_string(payload));
  }
  if (have > payload) throw FormatError("FVEC has trailing bytes after the payload");

  FeatureSet set;
  set.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const unsigned char* src = u + kFvecHeaderBytes;
  float* dst = set.features.data();
  for (std::uint64_t i = 0; i < n * d; ++i) {
    const std::uint32_t bits = read_u32_le(src + 4 * i);
    std::memcpy(dst + i, &bits, 4);
  }
  set.ids = ids;
  validate(set);
  return set;
}

std::string encode_fvec(const FeatureSet& set) {
  validate(set);
  std::string out(kFvecMagic, 4);
  append_u32_le(out, kFvecVersion);
  append_u32_le(out, static_cast<std::uint32_t>(set.rows()));
  append_u32_le(out, static_cast<std::uint32_t>(set.dims()));
  out.reserve(kFvecHeaderBytes + 4 * set.rows() * set.dims());
  const float* src = set.features.data();
  for (std::size_t i = 0; i < set.rows() * set.dims(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, src + i, 4);
    append_u32_le(out, bits);
  }
  return out;
}

FeatureSet load_feature_set(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto ids_path = feature_ids_path(path);
  const json ids_doc = parse_strict(read_file(ids_path));
  if (!ids_doc.is_array()) throw ParseError(ids_path.string() + ": expected a JSON array");
  std::vector<std::string> ids;
  ids.reserve(ids_doc.size());
  for (const json& id : ids_doc) {
    if (!id.is_string()) throw ParseError(ids_path.string() + ": ids must be strings");
    ids.push_back(id.get<std::string>());
  }
  return parse_feature_set(bytes, ids);
}

void save_feature_set(const FeatureSet& set, const std::filesystem::path& path) {
  write_file(path, encode_fvec(set));
  write_file(feature_ids_path(path), json(set.ids).dump() + "\n");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace r2s
