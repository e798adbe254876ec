#include "r2s/augment.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "r2s/rng.hpp"

namespace r2s {

namespace {

/// Working buffer in real arithmetic; same layout as Image.
struct FloatImage {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  explicit FloatImage(const Image& img)
      : height(img.height()), width(img.width()), data(img.data().begin(), img.data().end()) {}
  FloatImage(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0.0) {}

  double& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::round(std::clamp(v, 0.0, 255.0)));
}

Image to_image(const FloatImage& f) {
  std::vector<std::uint8_t> out(f.data.size());
  std::transform(f.data.begin(), f.data.end(), out.begin(), quantize);
  return Image(f.height, f.width, std::move(out));
}

/// Half-sample symmetric reflection: -1 -> 0, n -> n - 1.
int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

FloatImage resize(const FloatImage& src, int out_h, int out_w) {
  FloatImage dst(out_h, out_w);
  const double sy = static_cast<double>(src.height) / out_h;
  const double sx = static_cast<double>(src.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
        const double bot = (1 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
        dst.at(y, x, c) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return dst;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
  } else if (mx == r) {
    h = 60.0 * (g - b) / d;
  } else if (mx == g) {
    h = 60.0 * (b - r) / d + 120.0;
  } else {
    h = 60.0 * (r - g) / d + 240.0;
  }
  if (h < 0.0) h += 360.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r1 = c; g1 = x; break;
    case 1: r1 = x; g1 = c; break;
    case 2: g1 = c; b1 = x; break;
    case 3: g1 = x; b1 = c; break;
    case 4: r1 = x; b1 = c; break;
    default: r1 = c; b1 = x; break;
  }
  const double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

}  // namespace

AugmentConfig AugmentConfig::all_probabilities(double p) {
  AugmentConfig c;
  c.p_noise = c.p_blur = c.p_photometric = c.p_downup = p;
  return c;
}

void validate(const AugmentConfig& config) {
  for (double p : {config.p_noise, config.p_blur, config.p_photometric, config.p_downup}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("augment probabilities must lie in [0, 1]");
  }
  if (!(config.noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be nonnegative");
  if (config.blur_kernel < 3 || config.blur_kernel % 2 == 0) {
    throw ValidationError("blur_kernel must be odd and >= 3");
  }
  if (!(config.blur_sigma > 0.0)) throw ValidationError("blur_sigma must be positive");
  if (!(config.downup_factor >= 1.0)) throw ValidationError("downup_factor must be >= 1");
  if (config.downup_method != "bilinear") {
    throw ValidationError("unsupported downup_method '" + config.downup_method + "'");
  }
  if (!(config.brightness_delta >= 0.0) || !(config.hue_delta_deg >= 0.0) ||
      !(config.contrast_lower <= config.contrast_upper) ||
      !(config.saturation_lower <= config.saturation_upper) || config.contrast_lower < 0.0 ||
      config.saturation_lower < 0.0) {
    throw ValidationError("invalid photometric ranges");
  }
}

Image add_gaussian_noise(const Image& img, double sigma, std::uint64_t key) {
  const CounterRng rng(key);
  std::vector<std::uint8_t> out(img.size());
  const auto src = img.data();
  // Counter 0 is the stage coin; element k draws normal(k + 1).
  for (std::size_t k = 0; k < src.size(); ++k) {
    out[k] = quantize(src[k] + sigma * rng.normal(k + 1));
  }
  return Image(img.height(), img.width(), std::move(out));
}

Image gaussian_blur(const Image& img, int kernel, double sigma) {
  const int r = kernel / 2;
  std::vector<double> w(static_cast<std::size_t>(kernel));
  double total = 0.0;
  for (int i = 0; i < kernel; ++i) {
    w[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    total += w[i];
  }
  for (double& x : w) x /= total;

  const FloatImage src(img);
  FloatImage tmp(img.height(), img.width());
  FloatImage dst(img.height(), img.width());
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = 0; i < kernel; ++i) acc += w[i] * src.at(y, reflect(x + i - r, src.width), c);
        tmp.at(y, x, c) = acc;
      }
    }
  }
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = 0; i < kernel; ++i) acc += w[i] * tmp.at(reflect(y + i - r, src.height), x, c);
        dst.at(y, x, c) = acc;
      }
    }
  }
  return to_image(dst);
}

Image resize_bilinear(const Image& img, int out_height, int out_width) {
  if (out_height <= 0 || out_width <= 0) throw SizeError("resize target must be positive");
  return to_image(resize(FloatImage(img), out_height, out_width));
}

Image down_up_sample(const Image& img, double factor) {
  const int dh = std::max(1, static_cast<int>(std::lround(img.height() / factor)));
  const int dw = std::max(1, static_cast<int>(std::lround(img.width() / factor)));
  const FloatImage down = resize(FloatImage(img), dh, dw);
  return to_image(resize(down, img.height(), img.width()));
}

Image photometric_distort(const Image& img, const PhotometricParams& params) {
  FloatImage f(img);
  if (params.brightness) {
    for (double& v : f.data) v = std::clamp(v + *params.brightness, 0.0, 255.0);
  }
  if (params.contrast) {
    for (double& v : f.data) v = std::clamp(v * *params.contrast, 0.0, 255.0);
  }
  if (params.saturation || params.hue_deg) {
    for (std::size_t i = 0; i < f.data.size(); i += 3) {
      double h, s, v;
      rgb_to_hsv(f.data[i], f.data[i + 1], f.data[i + 2], h, s, v);
      if (params.saturation) s = std::clamp(s * *params.saturation, 0.0, 1.0);
      if (params.hue_deg) {
        h = std::fmod(h + *params.hue_deg, 360.0);
        if (h < 0.0) h += 360.0;
      }
      hsv_to_rgb(h, s, v, f.data[i], f.data[i + 1], f.data[i + 2]);
    }
  }
  return to_image(f);
}

Image augment_image(const Image& img, const AugmentConfig& config, std::uint64_t global_seed,
                    std::string_view image_id, std::uint64_t epoch) {
  validate(config);
  if (img.height() < config.blur_kernel || img.width() < config.blur_kernel) {
    throw SizeError("image " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                    " is smaller than the blur kernel");
  }
  const auto stream = [&](std::string_view stage) {
    return CounterRng(stream_key(global_seed, image_id, epoch, stage));
  };

  Image out = img;
  if (const CounterRng rng = stream(kStageNoise); rng.uniform(0) < config.p_noise) {
    out = add_gaussian_noise(out, config.noise_sigma, rng.key());
  }
  if (const CounterRng rng = stream(kStageBlur); rng.uniform(0) < config.p_blur) {
    out = gaussian_blur(out, config.blur_kernel, config.blur_sigma);
  }
  {
    // Counters 0-3 gate the sub-ops, 4-7 draw their magnitudes.
    const CounterRng rng = stream(kStagePhotometric);
    PhotometricParams params;
    if (rng.uniform(0) < config.p_photometric) {
      params.brightness = rng.uniform(4, -config.brightness_delta, config.brightness_delta);
    }
    if (rng.uniform(1) < config.p_photometric) {
      params.contrast = rng.uniform(5, config.contrast_lower, config.contrast_upper);
    }
    if (rng.uniform(2) < config.p_photometric) {
      params.saturation = rng.uniform(6, config.saturation_lower, config.saturation_upper);
    }
    if (rng.uniform(3) < config.p_photometric) {
      params.hue_deg = rng.uniform(7, -config.hue_delta_deg, config.hue_delta_deg);
    }
    if (params.brightness || params.contrast || params.saturation || params.hue_deg) {
      out = photometric_distort(out, params);
    }
  }
  if (const CounterRng rng = stream(kStageDownUp); rng.uniform(0) < config.p_downup) {
    out = down_up_sample(out, config.downup_factor);
  }
  return out;
}

std::vector<MixingPlan> plan_mixing(const std::vector<std::string>& train_samples,
                                    const std::map<std::string, std::string>& rendered_map,
                                    double p, std::uint64_t seed, std::uint64_t epochs) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("mixing probability must lie in [0, 1]");
  const std::set<std::string> known(train_samples.begin(), train_samples.end());
  if (known.size() != train_samples.size()) throw ValidationError("duplicate training sample id");
  for (const auto& [id, _] : rendered_map) {
    if (!known.contains(id)) {
      throw ValidationError("rendered sample '" + id + "' is not a training sample");
    }
  }

  std::vector<MixingPlan> plans;
  plans.reserve(epochs);
  for (std::uint64_t e = 0; e < epochs; ++e) {
    MixingPlan plan;
    plan.epoch = e;
    plan.entries.reserve(train_samples.size());
    for (const std::string& id : train_samples) {
      MixingEntry entry{id, id, SampleSource::kReal};
      if (const auto it = rendered_map.find(id); it != rendered_map.end()) {
        const CounterRng rng(stream_key(seed, id, e, "mix"));
        if (rng.uniform(0) < p) {
          entry.chosen_path = it->second;
          entry.source = SampleSource::kRendered;
        }
      }
      plan.entries.push_back(std::move(entry));
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

std::string mixing_plan_jsonl(const std::vector<MixingPlan>& plans) {
  std::string out;
  for (const MixingPlan& plan : plans) {
    for (const MixingEntry& e : plan.entries) {
      nlohmann::ordered_json j;
      j["epoch"] = plan.epoch;
      j["sample_id"] = e.sample_id;
      j["chosen_path"] = e.chosen_path;
      j["source"] = e.source == SampleSource::kRendered ? "rendered" : "real";
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

}  // namespace r2s
