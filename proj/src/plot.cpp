#include "dcm/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dcm/errors.hpp"

namespace dcm {

PlotKind parse_plot_kind(std::string_view name) {
  if (name == "accuracy_curve") return PlotKind::accuracy_curve;
  if (name == "grad_err_curve") return PlotKind::grad_err_curve;
  if (name == "ratio_sweep") return PlotKind::ratio_sweep;
  if (name == "mask_density") return PlotKind::mask_density;
  throw ValidationError("unknown plot kind '" + std::string(name) + "'");
}

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 200, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Line {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Line>& lines) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& l : lines)
    for (const auto& [x, y] : l.points) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y1 = y0 + 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" "
     << "font-family=\"sans-serif\" font-size=\"15\">" << escape(title) << "</text>\n";
  // axes
  os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + ph) << "\" x2=\""
     << num(kLeft + pw) << "\" y2=\"" << num(kTop + ph) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft)
     << "\" y2=\"" << num(kTop + ph) << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double xv = x0 + (x1 - x0) * t / 5.0, yv = y0 + (y1 - y0) * t / 5.0;
    os << "<line x1=\"" << num(sx(xv)) << "\" y1=\"" << num(kTop + ph) << "\" x2=\""
       << num(sx(xv)) << "\" y2=\"" << num(kTop + ph + 5) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(kTop + ph + 18)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       << tick_label(xv) << "</text>\n";
    os << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(sy(yv)) << "\" x2=\""
       << num(kLeft) << "\" y2=\"" << num(sy(yv)) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(sy(yv) + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
       << tick_label(yv) << "</text>\n";
  }
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 12)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
     << escape(x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" "
     << "font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
     << num(kTop + ph / 2) << ")\">" << escape(y_label) << "</text>\n";

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t p = 0; p < lines[i].points.size(); ++p) {
      const auto& [x, y] = lines[i].points[p];
      os << (p ? " " : "") << num(sx(x)) << ',' << num(sy(y));
    }
    os << "\"/>\n";
    if (lines[i].points.size() == 1 || lines.size() < 2 || lines[i].points.size() < 12)
      for (const auto& [x, y] : lines[i].points)
        os << "<circle cx=\"" << num(sx(x)) << "\" cy=\"" << num(sy(y)) << "\" r=\"2.5\" fill=\""
           << color << "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    const double lx = kWidth - kRight + 15;
    os << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 20)
       << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(lx + 26) << "\" y=\"" << num(ly + 4)
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(lines[i].label)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string run_label(const RunLabels& l) {
  std::string s = l.head + " / " + l.mask_strategy;
  if (l.mask_strategy != "none") {
    char buf[16];
    std::snprintf(buf, sizeof buf, " p=%g", l.mask_ratio);
    s += buf;
  }
  return s + " (seed " + std::to_string(l.seed) + ")";
}

}  // namespace

std::string render_metrics_plot(PlotKind kind, const std::vector<MetricsSeries>& runs) {
  if (runs.empty()) throw ValidationError("plot: no input series");
  for (const auto& r : runs)
    if (r.rows.empty()) throw ValidationError("plot: " + r.source + " has no data rows");

  if (kind == PlotKind::ratio_sweep) {
    // (head, strategy) -> ratio -> last-10 means over runs.
    std::map<std::string, std::map<double, std::vector<double>>> groups;
    for (const auto& r : runs) {
      std::vector<double> acc;
      for (const auto& row : r.rows) acc.push_back(row.test_acc);
      const auto& l = r.rows.front().labels;
      groups[l.head + " / " + l.mask_strategy][l.mask_ratio].push_back(last_k_mean(acc, 10));
    }
    std::vector<Line> lines;
    for (const auto& [label, by_ratio] : groups) {
      Line line{label, {}};
      for (const auto& [ratio, values] : by_ratio) {
        double mean = 0.0;
        for (double v : values) mean += v;
        line.points.emplace_back(ratio, mean / static_cast<double>(values.size()));
      }
      lines.push_back(std::move(line));
    }
    return line_chart("Masking ratio sweep", "masking ratio p", "last-10 mean test accuracy",
                      lines);
  }
  if (kind == PlotKind::mask_density) throw ValidationError("plot: mask_density takes mask files");

  const bool acc = kind == PlotKind::accuracy_curve;
  std::vector<Line> lines;
  for (const auto& r : runs) {
    Line line{run_label(r.rows.front().labels), {}};
    for (const auto& row : r.rows) {
      const double y = acc ? row.test_acc : row.grad_err;
      if (std::isfinite(y)) line.points.emplace_back(static_cast<double>(row.epoch), y);
    }
    if (line.points.empty())
      throw ValidationError("plot: " + r.source + " has no finite " +
                            (acc ? "test_acc" : "grad_err") + " values");
    lines.push_back(std::move(line));
  }
  return acc ? line_chart("Test accuracy", "epoch", "test accuracy", lines)
             : line_chart("Gradient error (noisy vs clean labels)", "epoch",
                          "mean L2 gradient error", lines);
}

std::string render_mask_density(const std::vector<MaskDump>& masks) {
  if (masks.empty()) throw ValidationError("plot: no mask inputs");
  const std::size_t d = masks.front().mask.features(), C = masks.front().mask.classes();
  for (const auto& m : masks)
    if (m.mask.features() != d || m.mask.classes() != C)
      throw ValidationError("plot: mask shapes differ");
  Matrix density(d, C);
  for (const auto& m : masks)
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t j = 0; j < C; ++j) density(k, j) += m.mask(k, j);
  const double cell = 22.0, left = 80.0, top = 50.0;
  const double width = left + cell * static_cast<double>(C) + 40.0;
  const double height = top + cell * static_cast<double>(d) + 60.0;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
     << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  char ratio[16];
  std::snprintf(ratio, sizeof ratio, "%g", masks.front().ratio);
  os << "<text x=\"" << num(width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
     << "font-family=\"sans-serif\" font-size=\"14\">Kept-edge density: "
     << escape(masks.front().strategy) << " p=" << ratio << " (" << masks.size()
     << " mask" << (masks.size() == 1 ? "" : "s") << ")</text>\n";
  for (std::size_t k = 0; k < d; ++k) {
    os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(top + cell * k + 15)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">node " << k
       << "</text>\n";
    for (std::size_t j = 0; j < C; ++j) {
      const double frac = density(k, j) / static_cast<double>(masks.size());
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - frac)));
      char fill[8];
      std::snprintf(fill, sizeof fill, "#%02x%02x%02x", shade, shade, 255);
      os << "<rect x=\"" << num(left + cell * j) << "\" y=\"" << num(top + cell * k)
         << "\" width=\"" << num(cell - 1) << "\" height=\"" << num(cell - 1) << "\" fill=\""
         << fill << "\"/>\n";
    }
  }
  for (std::size_t j = 0; j < C; ++j)
    os << "<text x=\"" << num(left + cell * j + cell / 2) << "\" y=\""
       << num(top + cell * d + 14) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       << "font-size=\"10\">" << j << "</text>\n";
  os << "<text x=\"" << num(left + cell * C / 2) << "\" y=\"" << num(top + cell * d + 34)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">class</text>\n";
  os << "</svg>\n";
  return os.str();
}

void emit_plot(PlotKind kind, const std::vector<std::string>& inputs, const std::string& out_path) {
  if (inputs.empty()) throw ValidationError("plot: no input files");
  std::string svg;
  if (kind == PlotKind::mask_density) {
    std::vector<MaskDump> masks;
    for (const auto& path : inputs) {
      std::ifstream in(path);
      if (!in) throw ValidationError("plot: cannot open " + path);
      try {
        masks.push_back(read_mask_text(in));
      } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
      }
    }
    svg = render_mask_density(masks);
  } else {
    std::vector<MetricsSeries> runs;
    for (const auto& path : inputs) {
      std::ifstream in(path);
      if (!in) throw ValidationError("plot: cannot open " + path);
      try {
        runs.push_back({path, read_metrics_csv(in)});
      } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
      }
    }
    svg = render_metrics_plot(kind, runs);
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << svg;
}

}  // namespace dcm
