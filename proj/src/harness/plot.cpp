#include "harness/plot.hpp"

#include "harness/config.hpp"
#include "harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace m2i2::harness {

namespace fs = std::filesystem;

namespace {

double interp(const Curve& c, double x) {
  if (x <= c.x.front()) return c.y.front();
  if (x >= c.x.back()) return c.y.back();
  auto it = std::upper_bound(c.x.begin(), c.x.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - c.x.begin());
  const double x0 = c.x[i - 1], x1 = c.x[i];
  const double w = x1 > x0 ? (x - x0) / (x1 - x0) : 0.0;
  return c.y[i - 1] + w * (c.y[i] - c.y[i - 1]);
}

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  if (std::fabs(v) >= 1e5 || (std::fabs(v) < 1e-3 && v != 0.0)) std::snprintf(buf, sizeof(buf), "%.2g", v);
  else std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

BandCurve aggregate_curves(const std::string& label, const std::vector<Curve>& curves) {
  if (curves.empty()) throw std::invalid_argument("aggregate_curves: no curves");
  for (const auto& c : curves) {
    if (c.x.empty() || c.x.size() != c.y.size()) throw std::invalid_argument("aggregate_curves: malformed curve");
    if (!std::is_sorted(c.x.begin(), c.x.end())) throw std::invalid_argument("aggregate_curves: x must be sorted");
  }
  double x_end = std::numeric_limits<double>::infinity();
  for (const auto& c : curves) x_end = std::min(x_end, c.x.back());
  BandCurve b;
  b.label = label;
  b.runs = curves.size();
  for (double x : curves.front().x) {
    if (x > x_end) break;
    double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& c : curves) {
      const double y = interp(c, x);
      sum += y;
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    b.x.push_back(x);
    b.mean.push_back(sum / static_cast<double>(curves.size()));
    b.lo.push_back(lo);
    b.hi.push_back(hi);
  }
  return b;
}

std::string render_svg(const Chart& chart) {
  const double W = 720, H = 440, L = 70, R = 170, T = 40, B = 55;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : chart.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min({y0, s.lo[i], s.mean[i]});
      y1 = std::max({y1, s.hi[i], s.mean[i]});
    }
  if (!std::isfinite(x0)) {
    x0 = 0;
    x1 = 1;
    y0 = 0;
    y1 = 1;
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(chart.title) << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = x0 + (x1 - x0) * k / 5.0, yv = y0 + (y1 - y0) * k / 5.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << py(yv) << "\" x2=\"" << W - R << "\" y2=\"" << py(yv)
       << "\" stroke=\"#e0e0e0\"/>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << esc(chart.x_label) << "</text>\n";
  os << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << esc(chart.y_label) << "</text>\n";
  for (std::size_t si = 0; si < chart.series.size(); ++si) {
    const auto& s = chart.series[si];
    const char* color = kColors[si % (sizeof(kColors) / sizeof(kColors[0]))];
    if (s.runs > 1 && !s.x.empty()) {
      os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << "," << py(s.hi[i]) << " ";
      for (std::size_t i = s.x.size(); i-- > 0;) os << px(s.x[i]) << "," << py(s.lo[i]) << " ";
      os << "\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << "," << py(s.mean[i]) << " ";
    os << "\"/>\n";
    const double ly = T + 10 + 18.0 * static_cast<double>(si);
    os << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 38 << "\" y=\"" << ly + 4 << "\">" << esc(s.label) << " (n=" << s.runs << ")</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_heatmap_svg(const std::string& title, const std::vector<std::vector<double>>& rows) {
  const std::size_t nr = rows.size();
  const std::size_t nc = nr ? rows.front().size() : 0;
  const double cell = 14, L = 40, T = 40;
  const double W = L + cell * static_cast<double>(nc) + 20, H = T + cell * static_cast<double>(nr) + 20;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << std::max(W, 320.0) << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << L << "\" y=\"20\">" << esc(title) << "</text>\n";
  for (std::size_t r = 0; r < nr; ++r) {
    if (rows[r].size() != nc) throw std::invalid_argument("heatmap rows must have equal length");
    for (std::size_t c = 0; c < nc; ++c) {
      const double v = std::clamp(rows[r][c], 0.0, 1.0);
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      os << "<rect x=\"" << L + cell * static_cast<double>(c) << "\" y=\"" << T + cell * static_cast<double>(r)
         << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << "," << shade << ",255)\"/>\n";
    }
    os << "<text x=\"" << L - 4 << "\" y=\"" << T + cell * static_cast<double>(r) + 11 << "\" text-anchor=\"end\">" << r
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::string> plot_runs(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  if (run_dirs.empty()) throw std::invalid_argument("plot: no run directories");
  struct Run {
    std::vector<MetricsRecord> records;
  };
  std::map<std::string, std::vector<Run>> groups;
  std::optional<bool> win_rate_schema;
  for (const auto& d : run_dirs) {
    const fs::path metrics = fs::path(d) / "metrics.jsonl";
    if (!fs::exists(metrics)) throw std::runtime_error("plot: no metrics in " + d);
    Run run{read_metrics(metrics.string())};
    if (run.records.empty()) throw std::runtime_error("plot: empty metrics in " + d);
    const bool wr = run.records.front().test_win_rate.has_value();
    for (const auto& r : run.records)
      if (r.test_win_rate.has_value() != wr) throw std::runtime_error("plot: mixed metrics schema in " + d);
    if (win_rate_schema && *win_rate_schema != wr)
      throw std::runtime_error("plot: runs mix win-rate and return metrics");
    win_rate_schema = wr;
    std::string label = d;
    const fs::path cfg = fs::path(d) / "config.txt";
    if (fs::exists(cfg)) {
      KeyValues kv = read_key_values_file(cfg.string());
      label = kv["run.variant"];
      if (label != "qmix") {
        char buf[32];
        std::snprintf(buf, sizeof(buf), " rate %.2f", 1.0 - std::stod(kv["learner.mask_ratio"]));
        label += buf;
      }
    }
    groups[label].push_back(std::move(run));
  }
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  struct Metric {
    const char* file;
    const char* y_label;
    double (*get)(const MetricsRecord&);
  };
  const Metric metrics[] = {
      {"performance.svg", *win_rate_schema ? "test win rate" : "test mean return",
       [](const MetricsRecord& r) { return r.performance(); }},
      {"loss_rl.svg", "TD loss", [](const MetricsRecord& r) { return r.loss_rl; }},
      {"loss_rc.svg", "reconstruction loss", [](const MetricsRecord& r) { return r.loss_rc; }},
      {"loss_inv.svg", "inverse loss", [](const MetricsRecord& r) { return r.loss_inv; }},
  };
  for (const auto& m : metrics) {
    Chart chart;
    chart.title = m.y_label;
    chart.x_label = "environment steps";
    chart.y_label = m.y_label;
    for (const auto& [label, runs] : groups) {
      std::vector<Curve> curves;
      for (const auto& run : runs) {
        Curve c;
        for (const auto& r : run.records) {
          c.x.push_back(static_cast<double>(r.env_steps));
          c.y.push_back(m.get(r));
        }
        curves.push_back(std::move(c));
      }
      chart.series.push_back(aggregate_curves(label, curves));
    }
    const std::string path = (fs::path(out_dir) / m.file).string();
    std::ofstream out(path, std::ios::trunc);
    out << render_svg(chart);
    if (!out) throw std::runtime_error("cannot write " + path);
    files.push_back(path);
  }
  return files;
}

}  // namespace m2i2::harness
