#include "apelab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace apelab {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 150.0;
constexpr double kTop = 36.0;
constexpr double kBottom = 48.0;

constexpr const char* kGrey = "#808080";
constexpr const char* kGreen = "#2ca02c";
constexpr const char* kRed = "#d62728";

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // empty when there are no error bars
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

Series downsample(const Series& s) {
  const std::size_t n = s.x.size();
  if (n <= kMaxPlotPoints) return s;
  Series out;
  for (std::size_t b = 0; b < kMaxPlotPoints; ++b) {
    const std::size_t lo = b * n / kMaxPlotPoints;
    const std::size_t hi = (b + 1) * n / kMaxPlotPoints;
    double sx = 0.0, sy = 0.0, se = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      sx += s.x[i];
      sy += s.y[i];
      if (!s.err.empty()) se += s.err[i];
    }
    const auto m = static_cast<double>(hi - lo);
    out.x.push_back(sx / m);
    out.y.push_back(sy / m);
    if (!s.err.empty()) out.err.push_back(se / m);
  }
  return out;
}

double nice_step(double range) {
  const double raw = range / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  return (r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0) * mag;
}

class Canvas {
 public:
  void include(const Series& s) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double e = s.err.empty() ? 0.0 : s.err[i];
      x_lo_ = std::min(x_lo_, s.x[i]);
      x_hi_ = std::max(x_hi_, s.x[i]);
      y_lo_ = std::min(y_lo_, s.y[i] - e);
      y_hi_ = std::max(y_hi_, s.y[i] + e);
    }
  }

  void finalize() {
    if (!(x_hi_ > x_lo_)) x_hi_ = x_lo_ + 1.0;
    if (!(y_hi_ > y_lo_)) {
      y_lo_ -= 0.5;
      y_hi_ += 0.5;
    }
    const double pad = 0.05 * (y_hi_ - y_lo_);
    y_lo_ -= pad;
    y_hi_ += pad;
  }

  double px(double x) const { return kLeft + (x - x_lo_) / (x_hi_ - x_lo_) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y_lo_) / (y_hi_ - y_lo_) * (kHeight - kTop - kBottom); }

  void axes(std::ostream& out, const std::string& title, const std::string& x_label) const {
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    out << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y1) << "\" width=\"" << fmt(x1 - x0)
        << "\" height=\"" << fmt(y0 - y1) << "\" fill=\"none\" stroke=\"black\"/>\n";
    const double ys = nice_step(y_hi_ - y_lo_);
    for (double t = std::ceil(y_lo_ / ys) * ys; t <= y_hi_; t += ys) {
      const double v = std::abs(t) < 1e-12 * ys ? 0.0 : t;
      out << "<line x1=\"" << fmt(x0 - 4) << "\" y1=\"" << fmt(py(v)) << "\" x2=\"" << fmt(x0)
          << "\" y2=\"" << fmt(py(v)) << "\" stroke=\"black\"/>\n"
          << "<text x=\"" << fmt(x0 - 7) << "\" y=\"" << fmt(py(v) + 4)
          << "\" font-size=\"11\" text-anchor=\"end\">" << format_number(v) << "</text>\n";
    }
    const double xs = nice_step(x_hi_ - x_lo_);
    for (double t = std::ceil(x_lo_ / xs) * xs; t <= x_hi_; t += xs) {
      out << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << fmt(y0) << "\" x2=\"" << fmt(px(t))
          << "\" y2=\"" << fmt(y0 + 4) << "\" stroke=\"black\"/>\n"
          << "<text x=\"" << fmt(px(t)) << "\" y=\"" << fmt(y0 + 17)
          << "\" font-size=\"11\" text-anchor=\"middle\">" << format_number(t) << "</text>\n";
    }
    out << "<text x=\"" << fmt((x0 + x1) / 2) << "\" y=\"" << fmt(kHeight - 10)
        << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
    if (!title.empty()) {
      out << "<text x=\"" << fmt((x0 + x1) / 2) << "\" y=\"22\" font-size=\"14\" "
          << "text-anchor=\"middle\">" << escape(title) << "</text>\n";
    }
  }

  void polyline(std::ostream& out, const Series& s, const char* colour, double width,
                double opacity) const {
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"" << fmt(width)
        << "\" stroke-opacity=\"" << fmt(opacity) << "\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) out << ' ';
      out << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i]));
    }
    out << "\"/>\n";
  }

  /// A bar every `every` points keeps dense series readable.
  void error_bars(std::ostream& out, const Series& s, const char* colour) const {
    const std::size_t every = std::max<std::size_t>(1, s.x.size() / 40);
    for (std::size_t i = 0; i < s.x.size(); i += every) {
      out << "<line x1=\"" << fmt(px(s.x[i])) << "\" y1=\"" << fmt(py(s.y[i] - s.err[i]))
          << "\" x2=\"" << fmt(px(s.x[i])) << "\" y2=\"" << fmt(py(s.y[i] + s.err[i]))
          << "\" stroke=\"" << colour << "\" stroke-width=\"1\"/>\n";
    }
  }

 private:
  double x_lo_ = std::numeric_limits<double>::infinity();
  double x_hi_ = -std::numeric_limits<double>::infinity();
  double y_lo_ = std::numeric_limits<double>::infinity();
  double y_hi_ = -std::numeric_limits<double>::infinity();
};

void legend(std::ostream& out, const std::vector<std::pair<std::string, const char*>>& entries) {
  double y = kTop + 12;
  const double x = kWidth - kRight + 14;
  for (const auto& [label, colour] : entries) {
    out << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(x + 20) << "\" y2=\""
        << fmt(y) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << fmt(x + 26) << "\" y=\"" << fmt(y + 4) << "\" font-size=\"11\">"
        << escape(label) << "</text>\n";
    y += 18;
  }
}

void open_svg(std::ostream& out) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\""
      << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << ' ' << fmt(kHeight)
      << "\" font-family=\"sans-serif\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace

std::optional<PlotStyle> parse_plot_style(std::string_view name) {
  if (name == "figure2") return PlotStyle::Figure2;
  if (name == "figure5") return PlotStyle::Figure5;
  return std::nullopt;
}

std::string render_figure2(const std::vector<AggregateRow>& rows, const PlotOptions& options) {
  if (rows.empty()) throw std::invalid_argument("nothing to plot: aggregate has no data rows");
  Series ret, t1, t2;
  for (const AggregateRow& r : rows) {
    const auto x = static_cast<double>(r.episode);
    ret.x.push_back(x);
    ret.y.push_back(r.mean_return);
    ret.err.push_back(r.se_return);
    t1.x.push_back(x);
    t1.y.push_back(r.mean_tracked_1);
    t2.x.push_back(x);
    t2.y.push_back(r.mean_tracked_2);
  }
  ret = downsample(ret);
  t1 = downsample(t1);
  t2 = downsample(t2);
  Canvas c;
  c.include(ret);
  c.include(t1);
  c.include(t2);
  c.finalize();
  std::ostringstream out;
  open_svg(out);
  c.axes(out, options.title, "episode");
  c.error_bars(out, ret, kGrey);
  c.polyline(out, ret, kGrey, 1.5, 1.0);
  c.polyline(out, t1, kGreen, 1.5, 1.0);
  c.polyline(out, t2, kRed, 1.5, 1.0);
  legend(out, {{"mean return", kGrey}, {options.tracked_1_label, kGreen},
               {options.tracked_2_label, kRed}});
  out << "</svg>\n";
  return out.str();
}

std::string render_figure5(const RunLog& records, const PlotOptions& options) {
  if (records.empty()) throw std::invalid_argument("nothing to plot: run CSV has no data rows");
  std::vector<std::uint64_t> order;
  std::map<std::uint64_t, RunLog> by_seed;
  for (const RunRecord& r : records) {
    auto [it, inserted] = by_seed.try_emplace(r.seed);
    if (inserted) order.push_back(r.seed);
    it->second.push_back(r);
  }
  std::vector<RunLog> runs;
  for (auto seed : order) runs.push_back(std::move(by_seed[seed]));

  Series ret;
  for (const AggregateRow& row : aggregate_runs(runs)) {
    ret.x.push_back(static_cast<double>(row.episode));
    ret.y.push_back(row.mean_return);
  }
  ret = downsample(ret);
  std::vector<Series> greens, reds;
  Canvas c;
  c.include(ret);
  for (const RunLog& run : runs) {
    Series g, r;
    for (const RunRecord& rec : run) {
      g.x.push_back(static_cast<double>(rec.episode));
      g.y.push_back(rec.tracked_value_1);
      r.x.push_back(static_cast<double>(rec.episode));
      r.y.push_back(rec.tracked_value_2);
    }
    greens.push_back(downsample(g));
    reds.push_back(downsample(r));
    c.include(greens.back());
    c.include(reds.back());
  }
  c.finalize();
  const double opacity = runs.size() > 1 ? 0.5 : 1.0;
  std::ostringstream out;
  open_svg(out);
  c.axes(out, options.title, "episode");
  for (std::size_t k = 0; k < runs.size(); ++k) {
    c.polyline(out, greens[k], kGreen, 1.0, opacity);
    c.polyline(out, reds[k], kRed, 1.0, opacity);
  }
  c.polyline(out, ret, kGrey, 1.5, 1.0);
  legend(out, {{"mean return", kGrey}, {options.tracked_1_label, kGreen},
               {options.tracked_2_label, kRed}});
  out << "</svg>\n";
  return out.str();
}

void emit_plot(const std::vector<std::filesystem::path>& inputs, PlotStyle style,
               const std::filesystem::path& output, const PlotOptions& options) {
  if (inputs.empty()) throw std::invalid_argument("emit_plot needs at least one input");
  if (style == PlotStyle::Figure2 && inputs.size() != 1) {
    throw std::invalid_argument("figure2 takes exactly one aggregate CSV");
  }
  auto open = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    return in;
  };
  std::string svg;
  try {
    if (style == PlotStyle::Figure2) {
      std::ifstream in = open(inputs.front());
      svg = render_figure2(read_aggregate_csv(in), options);
    } else {
      RunLog all;
      for (const auto& p : inputs) {
        std::ifstream in = open(p);
        RunLog log = read_run_csv(in);
        all.insert(all.end(), log.begin(), log.end());
      }
      svg = render_figure5(all, options);
    }
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(inputs.front().string() + ": " + e.what());
  }
  std::ofstream out(output);
  if (!out) throw std::runtime_error("cannot open " + output.string() + " for writing");
  out << svg;
}

}  // namespace apelab
