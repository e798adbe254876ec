// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "brute_det.hpp"
#include "cli.hpp"
#include "gen.hpp"
#include "r2s/agreement.hpp"
#include "r2s/analysis.hpp"
#include "r2s/augment.hpp"
#include "r2s/det_eval.hpp"
#include "r2s/geom.hpp"
#include "r2s/img_metrics.hpp"
#include "r2s/parallel.hpp"
#include "r2s/rng.hpp"

using namespace r2s;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

struct TableCell {
  const char* label;
  double real, sim, printed;
};

Outcome gap_arithmetic() {
  // Detection mAP, every fine-tuning row; the gap is always taken against the
  // real-data-only model's real score.
  const TableCell cells[] = {
      {"FCOS3D/none", 32.2, 13.5, 58.1},          {"FCOS3D/image-aug", 32.2, 13.5, 58.1},
      {"FCOS3D/nerf", 32.2, 23.5, 27.0},          {"FCOS3D/image-to-image", 32.2, 24.5, 23.9},
      {"PETR/none", 38.6, 20.2, 47.7},            {"PETR/image-aug", 38.6, 20.4, 47.2},
      {"PETR/nerf", 38.6, 29.3, 24.1},            {"PETR/image-to-image", 38.6, 26.1, 32.4},
      {"BEVFormer/none", 38.4, 29.1, 24.2},       {"BEVFormer/image-aug", 38.4, 31.0, 19.3},
      {"BEVFormer/nerf", 38.4, 31.7, 17.4},       {"BEVFormer/image-to-image", 38.4, 33.0, 14.1},
      {"MapTRv2-original/none", 64.5, 54.0, 16.3},
  };
  Outcome o;
  double worst = 0.0;
  for (const auto& c : cells) {
    const double g = gap_percent(c.real, c.sim);
    worst = std::max(worst, std::abs(g - c.printed));
    o.require(std::abs(g - c.printed) <= 0.05, std::string(c.label) + " gives " + fmt("%.3f", g));
  }
  if (o.ok) o.detail = "13 cells, max |diff| " + fmt("%.4f", worst);
  return o;
}

Outcome da_self_agreement() {
  gen::Rng rng(2024);
  Outcome o;
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto frames = gen::frame_ids(1 + rng() % 3);
    const auto a = gen::random_detections(rng, frames, 1 + rng() % 50);
    const auto b = gen::perturb_detections(rng, a, 1.0, 0.3, rng() % 5);
    const double self = detection_agreement(a, a, {}).da;
    worst = std::max(worst, std::abs(self - 100.0));
    o.require(std::abs(self - 100.0) <= 1e-6, "DA(A,A) = " + fmt("%.9f", self));
    const double ab = detection_agreement(a, b, {}).da;
    const double ba = detection_agreement(b, a, {}).da;
    o.require(ab == ba, "asymmetric: " + fmt("%.12f", ab) + " vs " + fmt("%.12f", ba));
  }
  if (o.ok) o.detail = "200 sets, max |DA(A,A) - 100| " + fmt("%.2e", worst);
  return o;
}

/// Keeps at most `cap` boxes per class over the whole set.
FrameBoxes cap_per_class(const FrameBoxes& src, std::size_t cap) {
  std::array<std::size_t, kNumDetClasses> seen{};
  FrameBoxes out;
  for (const auto& [f, list] : src) {
    auto& dst = out[f];
    for (const auto& b : list) {
      if (seen[static_cast<std::size_t>(b.class_name)]++ < cap) dst.push_back(b);
    }
  }
  return out;
}

Outcome detection_oracle() {
  gen::Rng rng(77);
  Outcome o;
  double worst = 0.0;
  const auto track = [&](double got, double want, const std::string& what) {
    const double d = std::abs(got - want);
    worst = std::max(worst, d);
    o.require(d <= 1e-9, what + " differs by " + fmt("%.3e", d));
  };
  for (int trial = 0; trial < 100; ++trial) {
    const auto frames = gen::frame_ids(1 + rng() % 3);
    const auto gts = cap_per_class(gen::random_detections(rng, frames, 1 + rng() % 40), 10);
    const auto preds =
        cap_per_class(gen::perturb_detections(rng, gts, 0.8, 0.25, rng() % 6), 10);
    DetEvalConfig cfg;
    if (trial % 2) cfg.tp_averaging = TpAveraging::kRecallWeighted;
    const auto got = evaluate_detections(preds, gts, cfg);
    const auto want = oracle::brute_detection_eval(preds, gts, cfg);
    const std::string at = "instance " + std::to_string(trial) + " ";
    track(got.map_score, want.map, at + "mAP");
    track(got.nds, want.nds, at + "NDS");
    track(got.mean_tp.ate, want.mate, at + "mATE");
    track(got.mean_tp.ase, want.mase, at + "mASE");
    track(got.mean_tp.aoe, want.maoe, at + "mAOE");
    track(got.mean_tp.ave, want.mave, at + "mAVE");
    track(got.mean_tp.aae, want.maae, at + "mAAE");
    for (DetClass c : kAllDetClasses) {
      const auto& w = want.classes[static_cast<std::size_t>(c)];
      const auto it = got.per_class.find(c);
      if ((it != got.per_class.end()) != w.evaluated) {
        o.require(false, at + "class set differs");
        continue;
      }
      if (!w.evaluated) continue;
      const auto& r = it->second;
      for (std::size_t t = 0; t < w.ap.size(); ++t) track(r.ap[t], w.ap[t], at + "AP");
      track(r.tp.ate, w.ate, at + "ATE");
      track(r.tp.ase, w.ase, at + "ASE");
      track(r.tp.aoe, w.aoe, at + "AOE");
      if (r.tp.ave.has_value() != w.ave.has_value()) {
        o.require(false, at + "AVE applicability differs");
      } else if (w.ave) {
        track(*r.tp.ave, *w.ave, at + "AVE");
        track(*r.tp.aae, *w.aae, at + "AAE");
      }
    }
  }
  if (o.ok) o.detail = "100 instances, max |diff| " + fmt("%.2e", worst);
  return o;
}

/// Mean and unbiased covariance in double precision.
void fit(const Eigen::MatrixXd& x, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
  mu = x.colwise().mean().transpose();
  const Eigen::MatrixXd c = x.rowwise() - mu.transpose();
  cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
}

Outcome frechet() {
  Outcome o;
  gen::Rng rng(64);
  std::normal_distribution<double> nd;
  const int d = 64;
  const int n = 500;
  Eigen::MatrixXd a(n, d), b(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      a(i, j) = nd(rng) * (1.0 + 0.02 * j);
      b(i, j) = nd(rng) * 0.8 + 0.1 * std::sin(j) + 0.3 * a(i, j);
    }
  }

  FeatureSet fs;
  fs.features = a.cast<float>();
  for (int i = 0; i < n; ++i) fs.ids.push_back(std::to_string(i));
  const double self = frechet_distance(fs, fs);
  o.require(std::abs(self) <= 1e-6 * d, "identical sets give " + fmt("%.3e", self));

  Eigen::VectorXd mu0(1), mu1(1);
  mu0 << 0.0;
  mu1 << 1.0;
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  const double analytic = frechet_distance(mu0, one, mu1, one);
  o.require(std::abs(analytic - 1.0) <= 1e-6, "1-D case gives " + fmt("%.9f", analytic));

  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(
                                Eigen::MatrixXd::NullaryExpr(d, d, [&] { return nd(rng); }))
                                .householderQ();
  Eigen::VectorXd ma, mb, mra, mrb;
  Eigen::MatrixXd ca, cb, cra, crb;
  fit(a, ma, ca);
  fit(b, mb, cb);
  fit(a * q, mra, cra);
  fit(b * q, mrb, crb);
  const double base = frechet_distance(ma, ca, mb, cb);
  const double rotated = frechet_distance(mra, cra, mrb, crb);
  o.require(std::abs(base - rotated) <= 1e-6,
            "rotation changes " + fmt("%.9f", base) + " to " + fmt("%.9f", rotated));
  if (o.ok) {
    o.detail = "self " + fmt("%.2e", self) + ", 1-D " + fmt("%.9f", analytic) + ", rotation |diff| " +
               fmt("%.2e", std::abs(base - rotated));
  }
  return o;
}

Outcome image_metrics() {
  Outcome o;
  gen::Rng rng(5);
  Image x(96, 128);
  for (auto& v : x.data()) v = static_cast<std::uint8_t>(64 + rng() % 128);
  const double s = ssim(x, x);
  o.require(std::abs(s - 1.0) <= 1e-9, "SSIM(x,x) = " + fmt("%.12f", s));

  Image lo(64, 64, 90), hi(64, 64, 106);
  const double p16 = psnr(lo, hi);
  o.require(std::abs(p16 - 24.05) <= 0.01, "offset-16 PSNR = " + fmt("%.4f", p16));

  double prev = std::numeric_limits<double>::infinity();
  std::string seq;
  for (double sigma : {5.0, 10.0, 20.0}) {
    const double p = psnr(x, add_gaussian_noise(x, sigma, stream_key(11, "psnr", 0, kStageNoise)));
    o.require(p < prev, "PSNR not decreasing at sigma " + fmt("%g", sigma));
    prev = p;
    seq += (seq.empty() ? "" : " > ") + fmt("%.2f", p);
  }
  if (o.ok) o.detail = "offset-16 " + fmt("%.4f", p16) + " dB, noise " + seq + " dB";
  return o;
}

Outcome geometry() {
  Outcome o;
  gen::Rng rng(6);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto pert = i % 2 ? EgoPerturbation::lateral(gen::uniform(rng, -3, 3))
                            : EgoPerturbation::rotation(gen::uniform(rng, -180, 180));
    const auto box = gen::random_box(rng, kAllDetClasses[rng() % kNumDetClasses]);
    const auto back = transform_boxes(transform_boxes(std::vector{box}, pert), pert.inverse())[0];
    worst = std::max(worst, (back.center - box.center).norm());
    worst = std::max(worst, std::abs(yaw_difference(back.yaw, box.yaw, 2 * kPi)));
    if (box.velocity) worst = std::max(worst, (*back.velocity - *box.velocity).norm());
    const auto line = gen::random_polyline(rng, kAllMapClasses[rng() % kNumMapClasses]);
    const auto lb = transform_polylines(transform_polylines({line}, pert), pert.inverse())[0];
    for (std::size_t k = 0; k < line.points.size(); ++k) {
      worst = std::max(worst, (lb.points[k] - line.points[k]).norm());
    }
  }
  o.require(worst <= 1e-9, "round-trip error " + fmt("%.3e", worst));

  DetectionBox3D b;
  b.center = {10, 0, 0};
  const auto l = transform_boxes(std::vector{b}, EgoPerturbation::lateral(2))[0];
  o.require((l.center - Vec3(10, -2, 0)).norm() <= 1e-12, "lateral hand case");
  const auto r = transform_boxes(std::vector{b}, EgoPerturbation::rotation(180))[0];
  o.require((r.center - Vec3(-10, 0, 0)).norm() <= 1e-12, "rotation hand case center");
  o.require(std::abs(r.yaw - kPi) <= 1e-12, "rotation hand case yaw " + fmt("%.15f", r.yaw));

  const auto set = gen::random_detections(rng, gen::frame_ids(3), 40);
  const auto pert = EgoPerturbation::rotation(37.5);
  const double da =
      detection_agreement(set, transform_boxes(transform_boxes(set, pert), pert.inverse()), {}).da;
  o.require(std::abs(da - 100.0) <= 1e-9, "round-tripped DA " + fmt("%.12f", da));
  if (o.ok) o.detail = "1000 round trips, max error " + fmt("%.2e", worst) + ", DA 100";
  return o;
}

Outcome augmentation() {
  Outcome o;
  gen::Rng rng(7);
  std::vector<Image> imgs;
  for (int i = 0; i < 32; ++i) imgs.push_back(gen::random_image(rng, 48, 64));
  const AugmentConfig cfg = AugmentConfig::all_probabilities(0.5);
  std::vector<Image> seq(imgs.size()), par(imgs.size());
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    seq[i] = augment_image(imgs[i], cfg, 123, "img" + std::to_string(i));
  }
  parallel_for(
      imgs.size(), [&](std::size_t i) { par[i] = augment_image(imgs[i], cfg, 123, "img" + std::to_string(i)); },
      8);
  for (std::size_t i = 0; i < imgs.size(); ++i) o.require(seq[i] == par[i], "image " + std::to_string(i) + " differs");

  AugmentConfig noise = AugmentConfig::all_probabilities(0.0);
  noise.p_noise = 1.0;
  const Image flat(512, 512, 128);
  const Image noisy = augment_image(flat, noise, 9, "flat");
  double sum = 0, sq = 0;
  for (auto v : noisy.data()) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double cnt = static_cast<double>(noisy.size());
  const double mean = sum / cnt;
  const double sd = std::sqrt(sq / cnt - mean * mean);
  o.require(std::abs(mean - 128.0) <= 0.5, "noise mean " + fmt("%.4f", mean));
  o.require(std::abs(sd - 10.0) <= 0.5, "noise std " + fmt("%.4f", sd));

  const AugmentConfig off = AugmentConfig::all_probabilities(0.0);
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    o.require(augment_image(imgs[i], off, 1, std::to_string(i)) == imgs[i], "zero config changed an image");
  }
  if (o.ok) o.detail = "32 images x 8 threads identical, noise mean " + fmt("%.3f", mean) + " std " + fmt("%.3f", sd);
  return o;
}

Outcome mixing() {
  Outcome o;
  std::vector<std::string> samples;
  std::map<std::string, std::string> rendered;
  for (int i = 0; i < 10000; ++i) {
    samples.push_back("sample_" + std::to_string(i));
    rendered[samples.back()] = "nerf/" + samples.back() + ".png";
  }
  const auto count_rendered = [](const MixingPlan& p) {
    std::size_t n = 0;
    for (const auto& e : p.entries) n += e.source == SampleSource::kRendered;
    return n;
  };
  const auto none = plan_mixing(samples, rendered, 0.0, 3, 2);
  const auto all = plan_mixing(samples, rendered, 1.0, 3, 2);
  for (int e = 0; e < 2; ++e) {
    o.require(count_rendered(none[e]) == 0, "p = 0 chose rendered samples");
    o.require(count_rendered(all[e]) == samples.size(), "p = 1 kept real samples");
  }
  const auto half = plan_mixing(samples, rendered, 0.5, 3, 4);
  std::string fracs;
  for (const auto& p : half) {
    const double f = static_cast<double>(count_rendered(p)) / 10000.0;
    o.require(std::abs(f - 0.5) <= 0.02, "epoch fraction " + fmt("%.4f", f));
    fracs += (fracs.empty() ? "" : ", ") + fmt("%.4f", f);
  }
  o.require(mixing_plan_jsonl(half) == mixing_plan_jsonl(plan_mixing(samples, rendered, 0.5, 3, 4)),
            "plan not deterministic");
  if (o.ok) o.detail = "p = 0.5 fractions " + fracs;
  return o;
}

Outcome range_curve() {
  Outcome o;
  gen::Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const auto frames = gen::frame_ids(1 + rng() % 3);
    const auto a = gen::random_detections(rng, frames, 1 + rng() % 40);
    const auto b = gen::perturb_detections(rng, a, 1.2, 0.3, rng() % 5);
    const auto curve = agreement_range_curve(a, b, {});
    o.require(curve.back().first == 1.0, "last fraction is not 1");
    o.require(curve.back().second == detection_agreement(a, b, {}).da, "f = 1 differs from DA");
    for (const auto& [f, da] : agreement_range_curve(a, a, {})) {
      o.require(std::abs(da - 100.0) <= 1e-9, "identical sets give " + fmt("%.9f", da) + " at f = " + fmt("%g", f));
    }
  }
  if (o.ok) o.detail = "20 pairs, f = 1 equals DA exactly, identical sets flat at 100";
  return o;
}

Outcome correlation() {
  Outcome o;
  const std::vector<double> x = {10, 20, 35, 50, 80};
  std::vector<double> lin, anti;
  for (double v : x) {
    lin.push_back(2.0 * v + 3.0);
    anti.push_back(90.0 - 0.5 * v);
  }
  o.require(std::abs(pearson(x, lin) - 1.0) <= 1e-12, "linear r");
  o.require(std::abs(pearson(x, anti) + 1.0) <= 1e-12, "anti-linear r");

  // Cohort where DA falls with FID plus noise, driven through the CLI.
  gen::Rng rng(10);
  std::normal_distribution<double> nd(0.0, 3.0);
  std::vector<SceneMetrics> scenes;
  for (int i = 0; i < 40; ++i) {
    SceneMetrics s;
    s.scene_id = "scene-" + std::to_string(i);
    s.mean_psnr = gen::uniform(rng, 18, 30);
    s.mean_ssim = gen::uniform(rng, 0.5, 0.9);
    s.fid = gen::uniform(rng, 20, 160);
    s.da = 95.0 - 0.25 * *s.fid + nd(rng);
    scenes.push_back(s);
  }
  const fs::path dir = gen::scratch_dir("acceptance_corr");
  {
    std::ofstream(dir / "scenes.csv") << scene_metrics_csv(scenes);
  }
  std::ostringstream out, err;
  const int code = run_cli({"correlate", "--in", "bevformer=" + (dir / "scenes.csv").string(),
                            "--metric", "fid", "--out", (dir / "corr").string()},
                           out, err);
  o.require(code == 0, "correlate exited " + std::to_string(code) + ": " + err.str());
  double r = 0.0;
  if (code == 0) {
    std::ifstream in(dir / "corr" / "correlation.json");
    const auto j = nlohmann::json::parse(in);
    r = j.at(0).at("pearson_r").get<double>();
    o.require(r < -0.8, "cohort r = " + fmt("%.4f", r));
    std::ifstream svg_in(dir / "corr" / "scatter_fid.svg");
    const std::string svg{std::istreambuf_iterator<char>(svg_in), {}};
    std::size_t markers = 0;
    for (auto p = svg.find("class=\"marker\""); p != std::string::npos; p = svg.find("class=\"marker\"", p + 1)) ++markers;
    o.require(markers == scenes.size(), "SVG has " + std::to_string(markers) + " markers");
  }
  fs::remove_all(dir);
  if (o.ok) o.detail = "linear +1, anti-linear -1, cohort r " + fmt("%.4f", r) + ", SVG with 40 markers";
  return o;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gap arithmetic matches reference gaps", gap_arithmetic},
      {"detection agreement self-agreement and symmetry", da_self_agreement},
      {"detection evaluation equals brute-force oracle", detection_oracle},
      {"Frechet distance identities", frechet},
      {"image metric identities", image_metrics},
      {"geometry round trips and hand cases", geometry},
      {"augmentation determinism and statistics", augmentation},
      {"mixing planner", mixing},
      {"range-curve consistency", range_curve},
      {"correlation pipeline", correlation},
  };
  int failed = 0;
  int n = 0;
  for (const auto& [name, fn] : criteria) {
    ++n;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s [%d] %s (%s; %.0f ms)\n", o.ok ? "PASS" : "FAIL", n, name, o.detail.c_str(), ms);
    failed += !o.ok;
  }
  std::printf("%d/%d criteria passed\n", n - failed, n);
  return failed == 0 ? 0 : 1;
}
