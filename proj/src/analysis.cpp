#include "r2s/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "r2s/det_eval.hpp"

namespace r2s {

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ShapeMismatchError("correlation inputs differ in length (" + std::to_string(x.size()) +
                             " vs " + std::to_string(y.size()) + ")");
  }
  if (x.size() < 3) throw DegenerateError("correlation needs at least 3 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateError("correlation input has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeMismatchError("correlation inputs differ in length");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

std::optional<double> scene_metric(const SceneMetrics& s, const std::string& name) {
  if (name == "psnr") return s.mean_psnr;
  if (name == "ssim") return s.mean_ssim;
  if (name == "lpips") return s.mean_lpips;
  if (name == "fid") return s.fid;
  throw UsageError("unknown scene metric '" + name + "' (psnr, ssim, lpips, fid)");
}

CorrelationResult correlate(const std::vector<SceneMetrics>& scenes, const std::string& metric,
                            const std::string& group) {
  CorrelationResult r;
  r.metric_name = metric;
  r.group = group;
  std::vector<double> xs, ys;
  for (const SceneMetrics& s : scenes) {
    const auto v = scene_metric(s, metric);
    if (!v || !s.da) continue;
    xs.push_back(*v);
    ys.push_back(*s.da);
    r.points.emplace_back(*v, *s.da);
  }
  r.n_scenes = r.points.size();
  r.pearson_r = pearson(xs, ys);
  r.spearman_rho = spearman(xs, ys);
  return r;
}

std::string correlation_json(const std::vector<CorrelationResult>& results) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json j;
    j["group"] = r.group;
    j["metric"] = r.metric_name;
    j["pearson_r"] = r.pearson_r;
    j["spearman_rho"] = r.spearman_rho;
    j["n_scenes"] = r.n_scenes;
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const auto& [x, y] : r.points) pts.push_back({x, y});
    j["points"] = std::move(pts);
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

GapTable gap_table(const std::vector<std::string>& columns, const std::vector<MethodResult>& results,
                   const std::string& baseline) {
  const auto base = std::find_if(results.begin(), results.end(),
                                 [&](const MethodResult& m) { return m.method == baseline; });
  if (base == results.end()) {
    throw MissingBaselineError("baseline method '" + baseline + "' not found");
  }
  GapTable t;
  t.columns = columns;
  t.baseline = baseline;
  t.rows = results;
  for (const MethodResult& m : results) {
    auto& row = t.gaps[m.method];
    for (const std::string& col : columns) {
      const auto real = base->real.find(col);
      const auto sim = m.sim.find(col);
      if (sim == m.sim.end()) continue;
      if (real == base->real.end()) {
        throw MissingBaselineError("baseline has no real value for column '" + col + "'");
      }
      row[col] = gap_percent(real->second, sim->second);
    }
  }
  return t;
}

namespace {

std::string fmt1(const std::map<std::string, double>& row, const std::string& col) {
  const auto it = row.find(col);
  if (it == row.end()) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", it->second);
  // Avoid "-0.0" for tiny negative gaps.
  if (std::string(buf) == "-0.0") return "0.0";
  return buf;
}

}  // namespace

std::string GapTable::markdown() const {
  std::string out = "| Fine-tuning method | Evaluation data |";
  for (const auto& c : columns) out += " " + c + " |";
  out += "\n|---|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out += "---|";
  out += "\n";
  for (const MethodResult& m : rows) {
    const auto emit = [&](const char* label, const std::map<std::string, double>& values) {
      out += "| " + m.method + " | " + label + " |";
      for (const auto& c : columns) out += " " + fmt1(values, c) + " |";
      out += "\n";
    };
    emit("Real", m.real);
    emit("Sim", m.sim);
    emit("Gap (%)", gaps.at(m.method));
  }
  return out;
}

std::string GapTable::csv() const {
  std::string out = "method,data";
  for (const auto& c : columns) out += "," + c;
  out += "\n";
  for (const MethodResult& m : rows) {
    const auto emit = [&](const char* label, const std::map<std::string, double>& values) {
      out += m.method + "," + label;
      for (const auto& c : columns) {
        const std::string v = fmt1(values, c);
        out += "," + (v == "-" ? std::string() : v);
      }
      out += "\n";
    };
    emit("real", m.real);
    emit("sim", m.sim);
    emit("gap", gaps.at(m.method));
  }
  return out;
}

GapTable gap_table_from_json(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
    std::vector<std::string> columns = doc.at("columns").get<std::vector<std::string>>();
    std::vector<MethodResult> methods;
    for (const json& m : doc.at("methods")) {
      MethodResult r;
      r.method = m.at("method").get<std::string>();
      r.real = m.value("real", std::map<std::string, double>{});
      r.sim = m.value("sim", std::map<std::string, double>{});
      methods.push_back(std::move(r));
    }
    const std::string baseline =
        doc.contains("baseline") ? doc.at("baseline").get<std::string>()
                                 : (methods.empty() ? std::string() : methods.front().method);
    return gap_table(columns, methods, baseline);
  } catch (const json::exception& e) {
    throw ParseError(std::string("gap table input: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<const char*, 10> kPalette = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c; break;
    }
  }
  return out;
}

/// Data extent padded by 5% on each side; a zero span widens to +-0.5.
std::pair<double, double> padded_extent(double lo, double hi) {
  if (hi - lo <= 0.0) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

std::string scatter_svg(const std::vector<ScatterPoint>& points, const std::string& x_label,
                        const std::string& y_label, const ScatterStyle& style) {
  if (points.empty()) throw EmptyInputError("scatter plot needs at least one point");
  double xmin = points[0].x, xmax = points[0].x, ymin = points[0].y, ymax = points[0].y;
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ValidationError("scatter point has non-finite coordinates");
    }
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const auto [x0, x1] = padded_extent(xmin, xmax);
  const auto [y0, y1] = padded_extent(ymin, ymax);

  const double vx = style.margin_left;
  const double vy = style.margin_top;
  const double vw = style.width - style.margin_left - style.margin_right;
  const double vh = style.height - style.margin_top - style.margin_bottom;
  const auto map_x = [&](double x) { return vx + (x - x0) / (x1 - x0) * vw; };
  const auto map_y = [&](double y) { return vy + (1.0 - (y - y0) / (y1 - y0)) * vh; };

  std::map<std::string, std::size_t> group_index;
  for (const auto& p : points) group_index.emplace(p.group, 0);
  std::size_t gi = 0;
  for (auto& [_, idx] : group_index) idx = gi++;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\""
      << style.height << "\" viewBox=\"0 0 " << style.width << " " << style.height << "\">\n"
      << "  <rect x=\"0\" y=\"0\" width=\"" << style.width << "\" height=\"" << style.height
      << "\" fill=\"white\"/>\n"
      << "  <rect class=\"viewport\" x=\"" << num(vx) << "\" y=\"" << num(vy) << "\" width=\""
      << num(vw) << "\" height=\"" << num(vh) << "\" fill=\"none\" stroke=\"black\"/>\n";

  svg << "  <g class=\"ticks\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double tx = x0 + (x1 - x0) * i / 4.0;
    const double ty = y0 + (y1 - y0) * i / 4.0;
    const double sx = map_x(tx);
    const double sy = map_y(ty);
    svg << "    <line x1=\"" << num(sx) << "\" y1=\"" << num(vy + vh) << "\" x2=\"" << num(sx)
        << "\" y2=\"" << num(vy + vh + 5) << "\" stroke=\"black\"/>\n"
        << "    <text x=\"" << num(sx) << "\" y=\"" << num(vy + vh + 18)
        << "\" text-anchor=\"middle\">" << tick_label(tx) << "</text>\n"
        << "    <line x1=\"" << num(vx - 5) << "\" y1=\"" << num(sy) << "\" x2=\"" << num(vx)
        << "\" y2=\"" << num(sy) << "\" stroke=\"black\"/>\n"
        << "    <text x=\"" << num(vx - 8) << "\" y=\"" << num(sy + 3)
        << "\" text-anchor=\"end\">" << tick_label(ty) << "</text>\n";
  }
  svg << "  </g>\n";

  svg << "  <text class=\"xlabel\" x=\"" << num(vx + vw / 2) << "\" y=\""
      << num(style.height - 15.0) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"13\">" << xml_escape(x_label) << "</text>\n"
      << "  <text class=\"ylabel\" x=\"15\" y=\"" << num(vy + vh / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "transform=\"rotate(-90 15 " << num(vy + vh / 2) << ")\">" << xml_escape(y_label)
      << "</text>\n";

  svg << "  <g class=\"markers\">\n";
  for (const auto& p : points) {
    const char* color = kPalette[group_index.at(p.group) % kPalette.size()];
    svg << "    <circle class=\"marker\" cx=\"" << num(map_x(p.x)) << "\" cy=\""
        << num(map_y(p.y)) << "\" r=\"" << num(style.marker_radius) << "\" fill=\"" << color
        << "\" fill-opacity=\"0.8\"/>\n";
  }
  svg << "  </g>\n";

  svg << "  <g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
  double ly = vy + 10;
  for (const auto& [name, idx] : group_index) {
    const double lx = vx + vw + 15;
    svg << "    <rect x=\"" << num(lx) << "\" y=\"" << num(ly - 8) << "\" width=\"10\" "
        << "height=\"10\" fill=\"" << kPalette[idx % kPalette.size()] << "\"/>\n"
        << "    <text x=\"" << num(lx + 15) << "\" y=\"" << num(ly + 1) << "\">"
        << xml_escape(name.empty() ? "all" : name) << "</text>\n";
    ly += 16;
  }
  svg << "  </g>\n</svg>\n";
  return svg.str();
}

}  // namespace r2s
