#include "r2s/img_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace r2s {

namespace {

void require_same_shape(const Image& a, const Image& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeMismatchError("image shapes differ: " + std::to_string(a.height()) + "x" +
                             std::to_string(a.width()) + " vs " + std::to_string(b.height()) +
                             "x" + std::to_string(b.width()));
  }
}

/// Valid-region separable filter of a single-channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                 const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * plane[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

std::string fmt_num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_num(*v) : std::string(); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::vector<std::string> csv_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream ss{std::string(text)};
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

double parse_number(const std::string& cell, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size()) {
    throw ParseError(where + ": bad number '" + cell + "'");
  }
  return v;
}

std::optional<double> parse_optional(const std::string& cell, const std::string& where) {
  if (cell.empty()) return std::nullopt;
  return parse_number(cell, where);
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b);
  const auto da = a.data();
  const auto db = b.data();
  if (da.empty()) throw ShapeMismatchError("empty images");
  double sse = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - static_cast<double>(db[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(da.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const Image& a, const Image& b, const SsimConfig& config) {
  require_same_shape(a, b);
  if (a.height() < config.window || a.width() < config.window) {
    throw TooSmallError("SSIM needs both sides >= " + std::to_string(config.window));
  }
  std::vector<double> k(static_cast<std::size_t>(config.window));
  const int r = config.window / 2;
  double total = 0.0;
  for (int i = 0; i < config.window; ++i) {
    k[i] = std::exp(-0.5 * (i - r) * (i - r) / (config.sigma * config.sigma));
    total += k[i];
  }
  for (double& v : k) v /= total;

  const double c1 = std::pow(config.k1 * config.dynamic_range, 2);
  const double c2 = std::pow(config.k2 * config.dynamic_range, 2);
  const int h = a.height();
  const int w = a.width();
  const std::size_t n = static_cast<std::size_t>(h) * w;

  double channel_sum = 0.0;
  for (int c = 0; c < Image::kChannels; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.data()[i * 3 + c];
      y[i] = b.data()[i * 3 + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, k);
    const auto my = filter_valid(y, h, w, k);
    const auto exx = filter_valid(xx, h, w, k);
    const auto eyy = filter_valid(yy, h, w, k);
    const auto exy = filter_valid(xy, h, w, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = exx[i] - mx[i] * mx[i];
      const double vy = eyy[i] - my[i] * my[i];
      const double cov = exy[i] - mx[i] * my[i];
      sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    channel_sum += sum / static_cast<double>(mx.size());
  }
  return channel_sum / Image::kChannels;
}

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

double frechet_distance(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a,
                        const Eigen::VectorXd& mu_b, const Eigen::MatrixXd& cov_b) {
  if (mu_a.size() != mu_b.size() || cov_a.rows() != mu_a.size() || cov_b.rows() != mu_b.size()) {
    throw DimMismatchError("feature dimensions differ");
  }
  const Eigen::MatrixXd root_a = sqrtm_psd(cov_a);
  const Eigen::MatrixXd inner = root_a * cov_b * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()),
                                                     Eigen::EigenvaluesOnly);
  const double trace_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d2 =
      (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * trace_sqrt;
  return std::max(d2, 0.0);
}

double frechet_distance(const FeatureSet& a, const FeatureSet& b, double eps) {
  if (a.dims() != b.dims()) {
    throw DimMismatchError("feature dimensions differ: " + std::to_string(a.dims()) + " vs " +
                           std::to_string(b.dims()));
  }
  if (a.rows() < 2 || b.rows() < 2) {
    throw InsufficientSamplesError("Frechet distance needs at least 2 samples per set");
  }
  const auto fit = [eps](const FeatureSet& s, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    const Eigen::MatrixXd x = s.features.cast<double>();
    mu = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
    cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
    cov.diagonal().array() += eps;
  };
  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd cov_a, cov_b;
  fit(a, mu_a, cov_a);
  fit(b, mu_b, cov_b);
  return frechet_distance(mu_a, cov_a, mu_b, cov_b);
}

ImagePairMetrics compare_images(std::string image_id, const Image& real, const Image& rendered) {
  ImagePairMetrics m;
  m.image_id = std::move(image_id);
  m.psnr = psnr(real, rendered);
  m.ssim = ssim(real, rendered);
  return m;
}

SceneMetrics aggregate_scene(std::string scene_id, const std::vector<ImagePairMetrics>& pairs,
                             const FeatureSet* feats_real, const FeatureSet* feats_sim,
                             std::optional<double> da, double fid_eps) {
  if (pairs.empty()) throw EmptySceneError("scene '" + scene_id + "' has no image pairs");
  const std::size_t with_lpips = static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.lpips.has_value(); }));
  if (with_lpips != 0 && with_lpips != pairs.size()) {
    throw ValidationError("scene '" + scene_id + "': LPIPS missing for some pairs");
  }
  SceneMetrics s;
  s.scene_id = std::move(scene_id);
  double psnr_sum = 0.0;
  double ssim_sum = 0.0;
  double lpips_sum = 0.0;
  for (const auto& p : pairs) {
    psnr_sum += std::isinf(p.psnr) ? kPsnrCapDb : p.psnr;
    ssim_sum += p.ssim;
    if (p.lpips) lpips_sum += *p.lpips;
  }
  const double n = static_cast<double>(pairs.size());
  s.mean_psnr = psnr_sum / n;
  s.mean_ssim = ssim_sum / n;
  if (with_lpips) s.mean_lpips = lpips_sum / n;
  if (feats_real && feats_sim) s.fid = frechet_distance(*feats_real, *feats_sim, fid_eps);
  s.da = da;
  return s;
}

std::map<std::string, double> parse_lpips_csv(std::string_view text) {
  const auto lines = csv_lines(text);
  if (lines.empty() || lines.front() != "image_id,lpips") {
    throw ParseError("LPIPS CSV must start with the header 'image_id,lpips'");
  }
  std::map<std::string, double> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_csv_line(lines[i]);
    const std::string where = "LPIPS CSV line " + std::to_string(i + 1);
    if (cells.size() != 2) throw ParseError(where + ": expected 2 cells");
    const double v = parse_number(cells[1], where);
    if (!(v >= 0.0) || !std::isfinite(v)) throw ParseError(where + ": lpips must be >= 0");
    if (!out.emplace(cells[0], v).second) throw ParseError(where + ": duplicate image_id");
  }
  return out;
}

std::string scene_metrics_csv(const std::vector<SceneMetrics>& scenes) {
  std::string out = "scene_id,psnr,ssim,lpips,fid,da\n";
  for (const auto& s : scenes) {
    out += s.scene_id + "," + fmt_num(s.mean_psnr) + "," + fmt_num(s.mean_ssim) + "," +
           fmt_opt(s.mean_lpips) + "," + fmt_opt(s.fid) + "," + fmt_opt(s.da) + "\n";
  }
  return out;
}

std::vector<SceneMetrics> parse_scene_metrics_csv(std::string_view text) {
  const auto lines = csv_lines(text);
  if (lines.empty() || lines.front() != "scene_id,psnr,ssim,lpips,fid,da") {
    throw ParseError("scene CSV must start with 'scene_id,psnr,ssim,lpips,fid,da'");
  }
  std::vector<SceneMetrics> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_csv_line(lines[i]);
    const std::string where = "scene CSV line " + std::to_string(i + 1);
    if (cells.size() != 6) throw ParseError(where + ": expected 6 cells");
    SceneMetrics s;
    s.scene_id = cells[0];
    s.mean_psnr = parse_number(cells[1], where);
    s.mean_ssim = parse_number(cells[2], where);
    s.mean_lpips = parse_optional(cells[3], where);
    s.fid = parse_optional(cells[4], where);
    s.da = parse_optional(cells[5], where);
    out.push_back(std::move(s));
  }
  return out;
}

std::string pair_metrics_csv(const std::vector<ImagePairMetrics>& pairs) {
  std::string out = "image_id,psnr,ssim,lpips\n";
  for (const auto& p : pairs) {
    out += p.image_id + "," + fmt_num(p.psnr) + "," + fmt_num(p.ssim) + "," + fmt_opt(p.lpips) +
           "\n";
  }
  return out;
}

}  // namespace r2s
