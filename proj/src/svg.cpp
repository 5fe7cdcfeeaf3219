#include "gatelab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

namespace gatelab::svg {

namespace {

constexpr double kWidth = 640, kHeight = 360;
constexpr double kLeft = 60, kRight = 20, kTop = 30, kBottom = 40;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string header(const std::string& title) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) +
                  "\" height=\"" + fmt(kHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" +
       title + "</text>\n";
  return s;
}

std::string axes(const std::string& x_label, const std::string& y_label, double x_lo, double x_hi,
                 double y_lo, double y_hi) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::string s = "<g stroke=\"black\" fill=\"none\">\n";
  s += "<line x1=\"" + fmt(x0) + "\" y1=\"" + fmt(y0) + "\" x2=\"" + fmt(x1) + "\" y2=\"" + fmt(y0) + "\"/>\n";
  s += "<line x1=\"" + fmt(x0) + "\" y1=\"" + fmt(y0) + "\" x2=\"" + fmt(x0) + "\" y2=\"" + fmt(y1) + "\"/>\n";
  s += "</g>\n";
  auto label = [](double x, double y, const std::string& anchor, const std::string& text) {
    return "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" text-anchor=\"" + anchor + "\">" + text +
           "</text>\n";
  };
  s += label(x0, y0 + 14, "middle", fmt(x_lo));
  s += label(x1, y0 + 14, "middle", fmt(x_hi));
  s += label(x0 - 4, y0 + 4, "end", fmt(y_lo));
  s += label(x0 - 4, y1 + 4, "end", fmt(y_hi));
  s += label((x0 + x1) / 2, kHeight - 8, "middle", x_label);
  s += "<text transform=\"translate(14," + fmt((y0 + y1) / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + y_label + "</text>\n";
  return s;
}

double to_d(const std::string& s) { return std::stod(s); }

}  // namespace

std::optional<std::string> alpha_heatmap(const io::CsvTable& hist, std::size_t layer) {
  const auto ce = hist.column("epoch"), cl = hist.column("layer"), clo = hist.column("bin_lo"),
             chi = hist.column("bin_hi"), cc = hist.column("count");
  // epoch -> bin_lo -> count
  std::map<long, std::map<double, double>> cells;
  std::set<double> bins;
  double bin_width = 0.05;
  for (const auto& row : hist.rows) {
    if (std::stoul(row.at(cl)) != layer) continue;
    const double lo = to_d(row.at(clo));
    bin_width = to_d(row.at(chi)) - lo;
    cells[std::stol(row.at(ce))][lo] += to_d(row.at(cc));
    bins.insert(lo);
  }
  if (cells.empty()) return std::nullopt;

  const std::size_t cols = cells.size();
  const std::size_t rows = static_cast<std::size_t>(std::llround(1.0 / bin_width));
  const double pw = (kWidth - kLeft - kRight) / static_cast<double>(cols);
  const double ph = (kHeight - kTop - kBottom) / static_cast<double>(rows);

  std::string s = header("alpha_vv distribution, layer " + std::to_string(layer));
  std::size_t col = 0;
  for (const auto& [epoch, counts] : cells) {
    double total = 0.0;
    for (const auto& [lo, c] : counts) total += c;
    for (const auto& [lo, c] : counts) {
      if (c <= 0.0) continue;
      auto bin = static_cast<std::size_t>(std::llround(lo / bin_width));
      bin = std::min(bin, rows - 1);
      const double shade = total > 0 ? c / total : 0.0;
      const int level = static_cast<int>(std::lround(255.0 * (1.0 - shade)));
      char colour[16];
      std::snprintf(colour, sizeof colour, "#%02x%02xff", level, level);
      s += "<rect x=\"" + fmt(kLeft + pw * static_cast<double>(col)) + "\" y=\"" +
           fmt(kTop + ph * static_cast<double>(rows - 1 - bin)) + "\" width=\"" + fmt(pw) +
           "\" height=\"" + fmt(ph) + "\" fill=\"" + colour + "\"/>\n";
    }
    ++col;
  }
  s += axes("epoch", "alpha_vv", static_cast<double>(cells.begin()->first),
            static_cast<double>(cells.rbegin()->first), 0.0, 1.0);
  s += "</svg>\n";
  return s;
}

std::optional<std::string> line_plot(const io::CsvTable& metrics,
                                     const std::vector<std::string>& columns,
                                     const std::string& title, double y_min, double y_max) {
  if (metrics.rows.empty()) return std::nullopt;
  const auto ce = metrics.column("epoch");
  const double e_lo = to_d(metrics.rows.front().at(ce));
  const double e_hi = std::max(to_d(metrics.rows.back().at(ce)), e_lo + 1.0);
  if (!(y_max > y_min)) y_max = y_min + 1.0;
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  auto px = [&](double e) { return x0 + (x1 - x0) * (e - e_lo) / (e_hi - e_lo); };
  auto py = [&](double v) {
    v = std::clamp(v, y_min, y_max);
    return y0 - (y0 - y1) * (v - y_min) / (y_max - y_min);
  };

  std::string s = header(title);
  s += axes("epoch", columns.size() == 1 ? columns[0] : "value", e_lo, e_hi, y_min, y_max);
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const auto c = metrics.column(columns[k]);
    const char* colour = kPalette[k % std::size(kPalette)];
    s += "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < metrics.rows.size(); ++i) {
      if (i) s += ' ';
      s += fmt(px(to_d(metrics.rows[i].at(ce)))) + ',' + fmt(py(to_d(metrics.rows[i].at(c))));
    }
    s += "\"/>\n";
    s += "<text x=\"" + fmt(x1 - 4) + "\" y=\"" + fmt(y1 + 14 + 13 * static_cast<double>(k)) +
         "\" text-anchor=\"end\" fill=\"" + colour + "\">" + columns[k] + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

RenderResult render_run(const std::filesystem::path& run_dir) {
  RenderResult out;
  const auto hist_path = run_dir / "alpha_hist.csv";
  if (std::filesystem::exists(hist_path)) {
    const auto hist = io::read_csv(hist_path);
    std::set<std::size_t> layers;
    if (!hist.rows.empty()) {
      const auto cl = hist.column("layer");
      for (const auto& row : hist.rows) layers.insert(std::stoul(row.at(cl)));
    }
    if (layers.empty()) out.warnings.push_back(hist_path.string() + ": no traced epochs, no heatmap");
    for (auto l : layers) {
      if (auto svg = alpha_heatmap(hist, l)) {
        const auto path = run_dir / ("alpha_layer" + std::to_string(l) + ".svg");
        io::write_file_atomic(path, *svg);
        out.written.push_back(path);
      }
    }
  } else {
    out.warnings.push_back(hist_path.string() + " missing, skipped");
  }

  const auto metrics_path = run_dir / "metrics.csv";
  if (std::filesystem::exists(metrics_path)) {
    const auto metrics = io::read_csv(metrics_path);
    if (metrics.rows.empty()) {
      out.warnings.push_back(metrics_path.string() + ": empty epoch range, no curves");
    } else {
      const auto cl = metrics.column("loss");
      double hi = 0.0;
      for (const auto& row : metrics.rows) hi = std::max(hi, to_d(row.at(cl)));
      if (auto svg = line_plot(metrics, {"loss"}, "training loss", 0.0, hi)) {
        io::write_file_atomic(run_dir / "loss.svg", *svg);
        out.written.push_back(run_dir / "loss.svg");
      }
      if (auto svg = line_plot(metrics, {"train_acc", "val_acc", "test_acc"}, "accuracy", 0.0, 1.0)) {
        io::write_file_atomic(run_dir / "accuracy.svg", *svg);
        out.written.push_back(run_dir / "accuracy.svg");
      }
    }
  } else {
    out.warnings.push_back(metrics_path.string() + " missing, skipped");
  }
  return out;
}

}  // namespace gatelab::svg
