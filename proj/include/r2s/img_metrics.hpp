#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "r2s/core.hpp"
#include "r2s/image.hpp"

namespace r2s {

/// PSNR of identical images is +infinity; scene means substitute this value.
inline constexpr double kPsnrCapDb = 100.0;

/// 10 log10(255^2 / MSE). Throws ShapeMismatchError.
double psnr(const Image& a, const Image& b);

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

/// Gaussian-window SSIM over the valid region, averaged over channels.
/// Throws ShapeMismatchError, TooSmallError.
double ssim(const Image& a, const Image& b, const SsimConfig& config = {});

/// Squared Fréchet distance between Gaussian fits of two feature sets:
/// |mu_a - mu_b|^2 + Tr(Sa + Sb - 2 sqrt(Sa^1/2 Sb Sa^1/2)), unbiased
/// covariances with eps * I added. Throws DimMismatchError,
/// InsufficientSamplesError.
double frechet_distance(const FeatureSet& a, const FeatureSet& b, double eps = 1e-6);

/// Same, from already-fitted statistics.
double frechet_distance(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a,
                        const Eigen::VectorXd& mu_b, const Eigen::MatrixXd& cov_b);

/// Symmetric PSD square root via eigendecomposition, negative eigenvalues clamped.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m);

struct ImagePairMetrics {
  std::string image_id;
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> lpips;
};

ImagePairMetrics compare_images(std::string image_id, const Image& real, const Image& rendered);

struct SceneMetrics {
  std::string scene_id;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::optional<double> mean_lpips;
  std::optional<double> fid;
  std::optional<double> da;
};

/// Means over per-pair metrics (infinite PSNR counted as kPsnrCapDb), FID
/// between the scene's feature sets when both are given, and the scene's DA.
/// Throws EmptySceneError; ValidationError when LPIPS covers only some pairs.
SceneMetrics aggregate_scene(std::string scene_id, const std::vector<ImagePairMetrics>& pairs,
                             const FeatureSet* feats_real, const FeatureSet* feats_sim,
                             std::optional<double> da, double fid_eps = 1e-6);

/// Parses the `image_id,lpips` CSV. Throws ParseError.
std::map<std::string, double> parse_lpips_csv(std::string_view text);

/// `scene_id,psnr,ssim,lpips,fid,da`; missing values are empty cells.
std::string scene_metrics_csv(const std::vector<SceneMetrics>& scenes);
std::vector<SceneMetrics> parse_scene_metrics_csv(std::string_view text);
/// `image_id,psnr,ssim,lpips`.
std::string pair_metrics_csv(const std::vector<ImagePairMetrics>& pairs);

}  // namespace r2s
