#include "gen.hpp"

#include <atomic>
#include <cstdio>

#include <unistd.h>

namespace gen {

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

r2s::DetectionBox3D random_box(Rng& rng, r2s::DetClass cls, double extent) {
  r2s::DetectionBox3D b;
  b.class_name = cls;
  b.center = {uniform(rng, -extent, extent), uniform(rng, -extent, extent), uniform(rng, -1, 2)};
  b.size = {uniform(rng, 0.4, 3.0), uniform(rng, 0.4, 8.0), uniform(rng, 0.8, 3.5)};
  b.yaw = r2s::normalize_yaw(uniform(rng, -r2s::kPi, r2s::kPi));
  if (rng() % 4 != 0) b.velocity = r2s::Vec2(uniform(rng, -10, 10), uniform(rng, -10, 10));
  b.score = uniform(rng, 0.0, 1.0);
  if (rng() % 3 == 0) b.attribute = (rng() % 2) ? "moving" : "parked";
  return b;
}

r2s::FrameBoxes random_detections(Rng& rng, const std::vector<std::string>& frames,
                                  std::size_t n_boxes) {
  r2s::FrameBoxes out;
  for (const auto& f : frames) out[f];
  for (std::size_t i = 0; i < n_boxes; ++i) {
    const auto cls = r2s::kAllDetClasses[rng() % r2s::kNumDetClasses];
    out[frames[rng() % frames.size()]].push_back(random_box(rng, cls));
  }
  return out;
}

r2s::FrameBoxes perturb_detections(Rng& rng, const r2s::FrameBoxes& src, double sigma,
                                   double drop_p, std::size_t n_extra) {
  std::normal_distribution<double> noise(0.0, sigma);
  r2s::FrameBoxes out;
  std::vector<std::string> frames;
  for (const auto& [frame, list] : src) {
    frames.push_back(frame);
    auto& dst = out[frame];
    for (auto b : list) {
      if (uniform(rng, 0, 1) < drop_p) continue;
      b.center.x() += noise(rng);
      b.center.y() += noise(rng);
      b.yaw = r2s::normalize_yaw(b.yaw + 0.2 * noise(rng));
      b.size = (b.size.array() * (1.0 + 0.05 * std::abs(noise(rng)))).matrix();
      b.score = uniform(rng, 0, 1);
      dst.push_back(b);
    }
  }
  for (std::size_t i = 0; i < n_extra && !frames.empty(); ++i) {
    const auto cls = r2s::kAllDetClasses[rng() % r2s::kNumDetClasses];
    out[frames[rng() % frames.size()]].push_back(random_box(rng, cls));
  }
  return out;
}

r2s::MapPolyline random_polyline(Rng& rng, r2s::MapClass cls, double extent) {
  r2s::MapPolyline l;
  l.class_name = cls;
  const std::size_t n = 2 + rng() % 5;
  r2s::Vec2 p(uniform(rng, -extent, extent), uniform(rng, -extent / 2, extent / 2));
  for (std::size_t i = 0; i < n; ++i) {
    l.points.push_back(p);
    p += r2s::Vec2(uniform(rng, 0.5, 6.0), uniform(rng, -3.0, 3.0));
  }
  l.score = uniform(rng, 0, 1);
  return l;
}

r2s::FramePolylines random_polylines(Rng& rng, const std::vector<std::string>& frames,
                                     std::size_t n_lines) {
  r2s::FramePolylines out;
  for (const auto& f : frames) out[f];
  for (std::size_t i = 0; i < n_lines; ++i) {
    const auto cls = r2s::kAllMapClasses[rng() % r2s::kNumMapClasses];
    out[frames[rng() % frames.size()]].push_back(random_polyline(rng, cls));
  }
  return out;
}

r2s::Image random_image(Rng& rng, int height, int width) {
  r2s::Image img(height, width);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

std::vector<std::string> frame_ids(std::size_t n) {
  std::vector<std::string> ids;
  char buf[16];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "frame%03zu", i);
    ids.emplace_back(buf);
  }
  return ids;
}

std::filesystem::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() /
                       ("r2s_" + tag + "_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace gen
