#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "r2s/agreement.hpp"
#include "r2s/analysis.hpp"
#include "r2s/augment.hpp"
#include "r2s/config_io.hpp"
#include "r2s/det_eval.hpp"
#include "r2s/geom.hpp"
#include "r2s/image.hpp"
#include "r2s/img_metrics.hpp"
#include "r2s/map_eval.hpp"
#include "r2s/parallel.hpp"

namespace r2s {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<SceneManifest> load_all(const std::vector<std::string>& paths) {
  std::vector<SceneManifest> scenes;
  scenes.reserve(paths.size());
  for (const auto& p : paths) scenes.push_back(load_manifest(p));
  return scenes;
}

AgreementConfig agreement_config(const std::string& path) {
  return path.empty() ? AgreementConfig{} : parse_agreement_config(read_file(path));
}

/// Writes to `path`, or to `out` when the path is empty.
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_file(path, text);
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

struct ImageJob {
  std::string id;
  fs::path source;
};

std::vector<ImageJob> collect_images(const fs::path& in) {
  std::vector<ImageJob> jobs;
  if (fs::is_directory(in)) {
    for (const auto& entry : fs::recursive_directory_iterator(in)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) {
        jobs.push_back({fs::relative(entry.path(), in).generic_string(), entry.path()});
      }
    }
  } else {
    const SceneManifest m = load_manifest(in);
    std::set<std::string> seen;
    for (const auto& frame : m.frames) {
      for (const auto& [camera, path] : frame.images) {
        if (seen.insert(path).second) jobs.push_back({path, resolve(in.parent_path(), path)});
      }
    }
  }
  std::sort(jobs.begin(), jobs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return jobs;
}

// ---------------------------------------------------------------------------

struct DetOptions {
  std::vector<std::string> gt, pred;
  std::string config, out, markdown, label = "model";
  std::optional<double> real_map;
};

void cmd_eval_det(const DetOptions& o, std::ostream& out) {
  const DetEvalConfig cfg = o.config.empty() ? DetEvalConfig{} : parse_det_config(read_file(o.config));
  const auto report =
      evaluate_detections(merge_boxes(load_all(o.pred)), merge_boxes(load_all(o.gt)), cfg);
  emit(o.out, report_json(report), out);
  if (!o.markdown.empty()) {
    std::optional<double> gap;
    if (o.real_map) gap = gap_percent(*o.real_map, report.map_score * 100.0);
    write_file(o.markdown, report_markdown_row(o.label, report, std::nullopt, gap) + "\n");
  }
}

struct MapOptions {
  std::vector<std::string> gt, pred;
  std::string config, out, markdown, label = "model";
};

void cmd_eval_map(const MapOptions& o, std::ostream& out) {
  const MapEvalConfig cfg = o.config.empty() ? MapEvalConfig{} : parse_map_config(read_file(o.config));
  const auto report =
      evaluate_map(merge_polylines(load_all(o.pred)), merge_polylines(load_all(o.gt)), cfg);
  emit(o.out, map_report_json(report), out);
  if (!o.markdown.empty()) write_file(o.markdown, map_report_markdown_row(o.label, report) + "\n");
}

struct AgreeOptions {
  std::vector<std::string> a, b;
  std::string config, out, task = "det";
  std::vector<double> fractions;
};

void cmd_agreement(const AgreeOptions& o, std::ostream& out) {
  const AgreementConfig cfg = agreement_config(o.config);
  const auto a = load_all(o.a);
  const auto b = load_all(o.b);
  const AgreementResult r = o.task == "map"
                                ? map_agreement(merge_polylines(a), merge_polylines(b), cfg)
                                : detection_agreement(merge_boxes(a), merge_boxes(b), cfg);
  const std::string text = agreement_json(r) + "\n";
  out << text;
  if (!o.out.empty()) write_file(o.out, text);
}

void cmd_range_curve(const AgreeOptions& o, std::ostream& out) {
  AgreementConfig cfg = agreement_config(o.config);
  if (!o.fractions.empty()) {
    cfg.range_fractions = o.fractions;
    validate(cfg);
  }
  const auto curve =
      agreement_range_curve(merge_boxes(load_all(o.a)), merge_boxes(load_all(o.b)), cfg);
  emit(o.out, range_curve_csv(curve), out);
}

struct AugmentOptions {
  std::string config, in, out;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
};

void cmd_augment(const AugmentOptions& o, std::ostream& out) {
  const AugmentConfig cfg = o.config.empty() ? AugmentConfig{} : parse_augment_config(read_file(o.config));
  if (!fs::exists(o.in)) throw IoError("no such input: " + o.in);
  const auto jobs = collect_images(o.in);
  std::vector<fs::path> targets;
  for (const auto& job : jobs) {
    fs::path rel = fs::path(job.id).relative_path();
    rel.replace_extension(".png");
    targets.push_back(fs::path(o.out) / rel);
    fs::create_directories(targets.back().parent_path());
  }
  parallel_for(jobs.size(), [&](std::size_t i) {
    save_png(augment_image(load_image(jobs[i].source), cfg, o.seed, jobs[i].id, o.epoch),
             targets[i]);
  });
  out << "augmented " << jobs.size() << " images\n";
}

struct MixOptions {
  std::string in, out;
  double p = 0.5;
  std::uint64_t seed = 0;
  std::uint64_t epochs = 1;
};

void cmd_mix_plan(const MixOptions& o, std::ostream& out) {
  const json doc = parse_json_file(o.in);
  std::vector<std::string> samples;
  std::map<std::string, std::string> rendered;
  try {
    samples = doc.at("samples").get<std::vector<std::string>>();
    if (doc.contains("rendered")) rendered = doc.at("rendered").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(o.in + ": expected {\"samples\": [...], \"rendered\": {...}}: " + e.what());
  }
  emit(o.out, mixing_plan_jsonl(plan_mixing(samples, rendered, o.p, o.seed, o.epochs)), out);
}

struct TransformOptions {
  std::string pert, in, out;
};

void cmd_transform(const TransformOptions& o, std::ostream& out, std::ostream& err) {
  const EgoPerturbation pert = parse_perturbation(o.pert);
  if (!pert.within_protocol()) {
    err << "r2s: warning: lateral offset " << fmt(pert.value) << " m outside [-3, 3]\n";
  }
  const SceneManifest moved = transform_manifest(load_manifest(o.in), pert);
  for (const auto& w : check_feasibility(moved)) {
    err << "r2s: warning: frame " << w.frame_id << " box " << w.box_index << ": " << w.message
        << "\n";
  }
  emit(o.out, dump_manifest(moved), out);
}

// img-metrics: one JSON job per scene.
//   {"scene_id", "pairs": [{"image_id", "real", "sim"}], "feats_real", "feats_sim",
//    "lpips", "da": number | {"a": manifest, "b": manifest}}
// Relative paths resolve against the job file's directory.

struct ImgOptions {
  std::vector<std::string> jobs;
  std::string out, config;
  double eps = 1e-6;
};

struct SceneOutput {
  SceneMetrics metrics;
  std::vector<ImagePairMetrics> pairs;
};

SceneOutput run_scene_job(const fs::path& job_path, const AgreementConfig& agree, double eps) {
  const json job = parse_json_file(job_path);
  const fs::path base = job_path.parent_path();
  const auto str = [&](const char* key) -> std::optional<std::string> {
    const auto it = job.find(key);
    if (it == job.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ParseError(job_path.string() + ": '" + key + "' must be a string");
    return it->get<std::string>();
  };
  const auto scene_id = str("scene_id");
  if (!scene_id) throw ParseError(job_path.string() + ": missing scene_id");
  if (!job.contains("pairs") || !job["pairs"].is_array()) {
    throw ParseError(job_path.string() + ": missing pairs array");
  }

  std::map<std::string, double> lpips;
  if (const auto p = str("lpips")) lpips = parse_lpips_csv(read_file(resolve(base, *p)));

  SceneOutput result;
  for (const auto& pair : job["pairs"]) {
    std::string id, real, sim;
    try {
      id = pair.at("image_id").get<std::string>();
      real = pair.at("real").get<std::string>();
      sim = pair.at("sim").get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(job_path.string() + ": bad pair: " + e.what());
    }
    ImagePairMetrics m =
        compare_images(id, load_image(resolve(base, real)), load_image(resolve(base, sim)));
    if (const auto it = lpips.find(id); it != lpips.end()) m.lpips = it->second;
    result.pairs.push_back(std::move(m));
  }

  std::optional<FeatureSet> fr, fsim;
  if (const auto p = str("feats_real")) fr = load_feature_set(resolve(base, *p));
  if (const auto p = str("feats_sim")) fsim = load_feature_set(resolve(base, *p));

  std::optional<double> da;
  if (const auto it = job.find("da"); it != job.end() && !it->is_null()) {
    if (it->is_number()) {
      da = it->get<double>();
    } else if (it->is_object() && it->contains("a") && it->contains("b")) {
      const auto a = load_manifest(resolve(base, (*it)["a"].get<std::string>()));
      const auto b = load_manifest(resolve(base, (*it)["b"].get<std::string>()));
      da = detection_agreement(boxes_by_frame(a), boxes_by_frame(b), agree).da;
    } else {
      throw ParseError(job_path.string() + ": 'da' must be a number or {\"a\", \"b\"}");
    }
  }
  result.metrics = aggregate_scene(*scene_id, result.pairs, fr ? &*fr : nullptr,
                                   fsim ? &*fsim : nullptr, da, eps);
  return result;
}

void cmd_img_metrics(const ImgOptions& o, std::ostream& out) {
  const AgreementConfig agree = agreement_config(o.config);
  std::vector<SceneOutput> results(o.jobs.size());
  parallel_for(o.jobs.size(),
               [&](std::size_t i) { results[i] = run_scene_job(o.jobs[i], agree, o.eps); });

  std::vector<SceneMetrics> scenes;
  std::set<std::string> ids;
  for (const auto& r : results) {
    if (!ids.insert(r.metrics.scene_id).second) {
      throw ValidationError("duplicate scene_id '" + r.metrics.scene_id + "'");
    }
    scenes.push_back(r.metrics);
  }
  const std::string table = scene_metrics_csv(scenes);
  if (o.out.empty()) {
    out << table;
    return;
  }
  write_file(fs::path(o.out) / "scenes.csv", table);
  for (const auto& r : results) {
    write_file(fs::path(o.out) / (r.metrics.scene_id + "_pairs.csv"), pair_metrics_csv(r.pairs));
  }
  out << "wrote " << scenes.size() << " scenes to " << o.out << "\n";
}

struct FrechetOptions {
  std::string a, b;
  double eps = 1e-6;
};

void cmd_frechet(const FrechetOptions& o, std::ostream& out) {
  const double d = frechet_distance(load_feature_set(o.a), load_feature_set(o.b), o.eps);
  out << "{\"fid\": " << fmt(d) << "}\n";
}

struct CorrelateOptions {
  std::vector<std::string> inputs;
  std::vector<std::string> metrics = {"fid"};
  std::string out;
  bool pool = false;
};

void cmd_correlate(const CorrelateOptions& o, std::ostream& out) {
  std::vector<std::pair<std::string, std::vector<SceneMetrics>>> groups;
  for (const auto& arg : o.inputs) {
    const auto eq = arg.find('=');
    const std::string label = eq == std::string::npos ? fs::path(arg).stem().string() : arg.substr(0, eq);
    const std::string path = eq == std::string::npos ? arg : arg.substr(eq + 1);
    groups.emplace_back(label, parse_scene_metrics_csv(read_file(path)));
  }
  std::vector<CorrelationResult> results;
  for (const auto& metric : o.metrics) {
    (void)scene_metric(SceneMetrics{}, metric);  // rejects unknown names
    std::vector<ScatterPoint> points;
    if (o.pool) {
      std::vector<SceneMetrics> all;
      for (const auto& [label, scenes] : groups) all.insert(all.end(), scenes.begin(), scenes.end());
      results.push_back(correlate(all, metric, "pooled"));
    }
    for (const auto& [label, scenes] : groups) {
      const auto r = correlate(scenes, metric, label);
      for (const auto& [x, y] : r.points) points.push_back({x, y, label});
      if (!o.pool) results.push_back(r);
    }
    if (!o.out.empty()) {
      write_file(fs::path(o.out) / ("scatter_" + metric + ".svg"), scatter_svg(points, metric, "DA"));
    }
  }
  const std::string text = correlation_json(results);
  if (!o.out.empty()) write_file(fs::path(o.out) / "correlation.json", text);
  out << text;
}

struct ReportOptions {
  std::string in, out;
};

void cmd_report(const ReportOptions& o, std::ostream& out) {
  const GapTable table = gap_table_from_json(read_file(o.in));
  const std::string md = table.markdown();
  if (!o.out.empty()) {
    write_file(fs::path(o.out) / "gap_table.md", md);
    write_file(fs::path(o.out) / "gap_table.csv", table.csv());
  }
  out << md;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Real-to-sim gap toolkit", "r2s"};
  app.require_subcommand(1);
  app.fallthrough(false);

  DetOptions det;
  auto* eval_det = app.add_subcommand("eval-det", "Evaluate 3D detections (mAP, TP errors, NDS)");
  eval_det->add_option("--gt", det.gt, "Ground-truth scene manifest(s)")->required();
  eval_det->add_option("--pred", det.pred, "Prediction scene manifest(s)")->required();
  eval_det->add_option("--config", det.config, "Detection config JSON");
  eval_det->add_option("--out", det.out, "Report JSON (stdout if omitted)");
  eval_det->add_option("--markdown", det.markdown, "Also write a markdown table row");
  eval_det->add_option("--label", det.label, "Row label for --markdown");
  eval_det->add_option("--real-map", det.real_map, "Real-data mAP (x100) for the Gap column");

  MapOptions map;
  auto* eval_map = app.add_subcommand("eval-map", "Evaluate vectorized map elements (Chamfer AP)");
  eval_map->add_option("--gt", map.gt, "Ground-truth scene manifest(s)")->required();
  eval_map->add_option("--pred", map.pred, "Prediction scene manifest(s)")->required();
  eval_map->add_option("--config", map.config, "Map config JSON");
  eval_map->add_option("--out", map.out, "Report JSON (stdout if omitted)");
  eval_map->add_option("--markdown", map.markdown, "Also write a markdown table row");
  eval_map->add_option("--label", map.label, "Row label for --markdown");

  AgreeOptions agree;
  auto* agreement = app.add_subcommand("agreement", "Symmetric agreement between two sets");
  agreement->add_option("--a", agree.a, "Scene manifest(s) A")->required();
  agreement->add_option("--b", agree.b, "Scene manifest(s) B")->required();
  agreement->add_option("--config", agree.config, "Agreement config JSON");
  agreement->add_option("--task", agree.task, "det or map")->check(CLI::IsMember({"det", "map"}));
  agreement->add_option("--out", agree.out, "Also write the JSON here");

  AgreeOptions curve;
  auto* range_curve = app.add_subcommand("range-curve", "Detection agreement over range fractions");
  range_curve->add_option("--a", curve.a, "Scene manifest(s) A")->required();
  range_curve->add_option("--b", curve.b, "Scene manifest(s) B")->required();
  range_curve->add_option("--config", curve.config, "Agreement config JSON");
  range_curve->add_option("--fractions", curve.fractions, "Comma-separated range fractions")
      ->delimiter(',');
  range_curve->add_option("--out", curve.out, "CSV output (stdout if omitted)");

  AugmentOptions aug;
  auto* augment = app.add_subcommand("augment", "Apply seeded rendering-artifact augmentations");
  augment->add_option("--config", aug.config, "Augment config JSON");
  augment->add_option("--seed", aug.seed, "Global seed");
  augment->add_option("--epoch", aug.epoch, "Epoch index");
  augment->add_option("--in", aug.in, "Image directory or scene manifest")->required();
  augment->add_option("--out", aug.out, "Output directory")->required();

  MixOptions mix;
  auto* mix_plan = app.add_subcommand("mix-plan", "Plan real/rendered sample mixing");
  mix_plan->add_option("--in", mix.in, "JSON {samples, rendered}")->required();
  mix_plan->add_option("--p", mix.p, "Probability of choosing the rendered sample");
  mix_plan->add_option("--seed", mix.seed, "Global seed");
  mix_plan->add_option("--epochs", mix.epochs, "Number of epochs");
  mix_plan->add_option("--out", mix.out, "JSON-lines output (stdout if omitted)");

  TransformOptions tr;
  auto* transform = app.add_subcommand("transform", "Move labels into a perturbed ego frame");
  transform->add_option("--pert", tr.pert, "lateral:<m> or rot:<deg>")->required();
  transform->add_option("--in", tr.in, "Scene manifest")->required();
  transform->add_option("--out", tr.out, "Output manifest (stdout if omitted)");

  ImgOptions img;
  auto* img_metrics = app.add_subcommand("img-metrics", "Per-scene PSNR/SSIM/LPIPS/FID/DA");
  img_metrics->add_option("--in", img.jobs, "Scene job JSON file(s)")->required();
  img_metrics->add_option("--out", img.out, "Output directory (stdout CSV if omitted)");
  img_metrics->add_option("--config", img.config, "Agreement config JSON for computed DA");
  img_metrics->add_option("--eps", img.eps, "Covariance regularizer");

  FrechetOptions fd;
  auto* frechet = app.add_subcommand("frechet", "Frechet distance between two feature files");
  frechet->add_option("--a", fd.a, "FVEC file A")->required();
  frechet->add_option("--b", fd.b, "FVEC file B")->required();
  frechet->add_option("--eps", fd.eps, "Covariance regularizer");

  CorrelateOptions corr;
  auto* correlate_cmd = app.add_subcommand("correlate", "Correlate scene metrics against DA");
  correlate_cmd->add_option("--in", corr.inputs, "label=scenes.csv (repeatable)")->required();
  correlate_cmd->add_option("--metric", corr.metrics, "psnr, ssim, lpips or fid (repeatable)");
  correlate_cmd->add_option("--out", corr.out, "Output directory for JSON and SVG");
  correlate_cmd->add_flag("--pool", corr.pool, "Pool all groups into one correlation");

  ReportOptions rep;
  auto* report = app.add_subcommand("report", "Gap table from real/sim results");
  report->add_option("--in", rep.in, "Results JSON")->required();
  report->add_option("--out", rep.out, "Output directory");

  if (!args.empty() && !args.front().starts_with("-") && !app.get_subcommand_no_throw(args.front())) {
    err << "r2s: error: UsageError: unknown subcommand '" << args.front() << "'\n" << app.help();
    return 2;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "r2s: error: UsageError: " << msg << "\n" << app.help();
    return 2;
  }

  try {
    if (eval_det->parsed()) cmd_eval_det(det, out);
    if (eval_map->parsed()) cmd_eval_map(map, out);
    if (agreement->parsed()) cmd_agreement(agree, out);
    if (range_curve->parsed()) cmd_range_curve(curve, out);
    if (augment->parsed()) cmd_augment(aug, out);
    if (mix_plan->parsed()) cmd_mix_plan(mix, out);
    if (transform->parsed()) cmd_transform(tr, out, err);
    if (img_metrics->parsed()) cmd_img_metrics(img, out);
    if (frechet->parsed()) cmd_frechet(fd, out);
    if (correlate_cmd->parsed()) cmd_correlate(corr, out);
    if (report->parsed()) cmd_report(rep, out);
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "r2s: error: " << e.kind() << ": " << msg << "\n";
    return e.is_usage() ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    err << "r2s: error: IoError: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "r2s: error: Error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace r2s
