#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "r2s/image.hpp"

namespace r2s {

/// Artifact-emulating augmentation settings. Defaults reproduce the
/// published fine-tuning setup; probabilities left unstated there are 0.5.
struct AugmentConfig {
  double p_noise = 0.5;
  double noise_sigma = 10.0;  // u8 intensity units

  double p_blur = 0.5;
  int blur_kernel = 5;
  double blur_sigma = 1.1;

  double p_photometric = 0.5;  // applied independently per sub-op
  double brightness_delta = 32.0;  // uniform(-d, d), additive
  double contrast_lower = 0.5;     // uniform(lower, upper), multiplicative
  double contrast_upper = 1.5;
  double saturation_lower = 0.5;
  double saturation_upper = 1.5;
  double hue_delta_deg = 18.0;  // uniform(-d, d), additive, wraps at 360

  double p_downup = 0.5;
  double downup_factor = 10.0;
  std::string downup_method = "bilinear";

  /// Every probability forced to the given value.
  static AugmentConfig all_probabilities(double p);
};

void validate(const AugmentConfig& config);

/// Stage names, which also key the per-stage random streams.
inline constexpr std::string_view kStageNoise = "noise";
inline constexpr std::string_view kStageBlur = "blur";
inline constexpr std::string_view kStagePhotometric = "photometric";
inline constexpr std::string_view kStageDownUp = "downup";

/// Applies noise -> blur -> photometric -> down/up, each gated by its own
/// coin flip. Output is clamped and rounded to u8 after every stage. All
/// randomness comes from streams keyed by (global_seed, image_id, epoch, stage).
/// Throws SizeError if either image side is smaller than the blur kernel.
Image augment_image(const Image& img, const AugmentConfig& config, std::uint64_t global_seed,
                    std::string_view image_id, std::uint64_t epoch = 0);

// Individual stages, exposed for testing. Each returns a new image.
Image add_gaussian_noise(const Image& img, double sigma, std::uint64_t stream_key);
Image gaussian_blur(const Image& img, int kernel, double sigma);
Image down_up_sample(const Image& img, double factor);
/// Bilinear resize with half-pixel centers.
Image resize_bilinear(const Image& img, int out_height, int out_width);

struct PhotometricParams {
  std::optional<double> brightness;
  std::optional<double> contrast;
  std::optional<double> saturation;
  std::optional<double> hue_deg;
};
Image photometric_distort(const Image& img, const PhotometricParams& params);

// ---------------------------------------------------------------------------
// Rendered-data mixing

enum class SampleSource { kReal, kRendered };

struct MixingEntry {
  std::string sample_id;
  std::string chosen_path;
  SampleSource source = SampleSource::kReal;
};

struct MixingPlan {
  std::uint64_t epoch = 0;
  std::vector<MixingEntry> entries;
};

/// Per epoch, each sample with a rendered counterpart switches to it with
/// probability p. A sample id doubles as its real image path. Throws
/// ValidationError if rendered_map names unknown samples or p is outside [0,1].
std::vector<MixingPlan> plan_mixing(const std::vector<std::string>& train_samples,
                                    const std::map<std::string, std::string>& rendered_map,
                                    double p, std::uint64_t seed, std::uint64_t epochs);

/// JSON lines: {"epoch":e,"sample_id":...,"chosen_path":...,"source":"real"|"rendered"}.
std::string mixing_plan_jsonl(const std::vector<MixingPlan>& plans);

}  // namespace r2s
