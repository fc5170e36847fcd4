#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phs/error.hpp"
#include "phs/format.hpp"
#include "phs/space.hpp"
#include "phs/store.hpp"

namespace phs::report {

/// 11-stop perceptual ramp (viridis samples at 0.0, 0.1, ..., 1.0).
inline constexpr std::array<std::array<int, 3>, 11> kColorRamp{{
    {0x44, 0x01, 0x54},
    {0x48, 0x24, 0x75},
    {0x41, 0x44, 0x87},
    {0x35, 0x5f, 0x8d},
    {0x2a, 0x78, 0x8e},
    {0x21, 0x91, 0x8c},
    {0x22, 0xa8, 0x84},
    {0x44, 0xbf, 0x70},
    {0x7a, 0xd1, 0x51},
    {0xbd, 0xdf, 0x26},
    {0xfd, 0xe7, 0x25},
}};

/// Piecewise-linear lookup, t clamped to [0,1]. Returns "#rrggbb".
inline std::string ramp_color(double t) {
  if (!std::isfinite(t)) t = 0.5;
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * static_cast<double>(kColorRamp.size() - 1);
  const auto lo = std::min(static_cast<std::size_t>(pos), kColorRamp.size() - 2);
  const double frac = pos - static_cast<double>(lo);
  char buf[8];
  std::array<int, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    const double v = kColorRamp[lo][c] + frac * (kColorRamp[lo + 1][c] - kColorRamp[lo][c]);
    rgb[c] = static_cast<int>(std::lround(v));
  }
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

/// Position of `v` on [lo, hi]; a degenerate range maps to the midpoint.
inline double ramp_position(double v, double lo, double hi) {
  if (!(hi > lo)) return 0.5;
  return (v - lo) / (hi - lo);
}

/// A rendered figure: the SVG text and its CSV companion (empty if none).
struct Figure {
  std::string name;
  std::string svg;
  std::string csv;
};

namespace detail {

inline std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  (void)ec;
  std::string s(buf, end);
  if (s == "-0.00") s = "0.00";
  return s;
}

inline std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
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

/// [lo, hi] padded by 5% of the span (or of max(|lo|, 1) when degenerate).
inline std::pair<double, double> padded(double lo, double hi) {
  double span = hi - lo;
  if (!(span > 0.0)) span = std::max(std::abs(lo), 1.0);
  return {lo - 0.05 * span, hi + 0.05 * span};
}

inline constexpr double kWidth = 640.0;
inline constexpr double kHeight = 480.0;
inline constexpr double kLeft = 70.0;
inline constexpr double kRight = 30.0;
inline constexpr double kTop = 40.0;
inline constexpr double kBottom = 60.0;

class Svg {
 public:
  explicit Svg(std::string_view title) {
    out_ += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
            "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
    out_ += "<rect class=\"background\" x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
            "\" fill=\"#ffffff\"/>\n";
    text(kWidth / 2, 24, title, "middle", "title");
  }

  void raw(std::string_view s) { out_ += s; }

  void text(double x, double y, std::string_view s, std::string_view anchor = "start",
            std::string_view cls = "label") {
    out_ += "<text class=\"" + std::string(cls) + "\" x=\"" + num(x) + "\" y=\"" + num(y) +
            "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"" + std::string(anchor) + "\">" +
            escape(s) + "</text>\n";
  }

  void line(double x1, double y1, double x2, double y2, std::string_view cls, std::string_view stroke = "#333333") {
    out_ += "<line class=\"" + std::string(cls) + "\" x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) +
            "\" y2=\"" + num(y2) + "\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"1\"/>\n";
  }

  void circle(double cx, double cy, double r, std::string_view cls, std::string_view fill,
              std::string_view stroke = "none", double stroke_width = 1.0) {
    out_ += "<circle class=\"" + std::string(cls) + "\" cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) +
            "\" fill=\"" + std::string(fill) + "\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"" +
            num(stroke_width) + "\"/>\n";
  }

  void cross(double cx, double cy, double r, std::string_view cls, std::string_view stroke) {
    out_ += "<path class=\"" + std::string(cls) + "\" d=\"M" + num(cx - r) + " " + num(cy - r) + " L" + num(cx + r) +
            " " + num(cy + r) + " M" + num(cx - r) + " " + num(cy + r) + " L" + num(cx + r) + " " + num(cy - r) +
            "\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"2\" fill=\"none\"/>\n";
  }

  void rect(double x, double y, double w, double h, std::string_view cls, std::string_view fill,
            std::string_view stroke = "none") {
    out_ += "<rect class=\"" + std::string(cls) + "\" x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) +
            "\" height=\"" + num(h) + "\" fill=\"" + std::string(fill) + "\" stroke=\"" + std::string(stroke) +
            "\"/>\n";
  }

  void triangle(double x, double y, bool pointing_right, std::string_view cls, std::string_view fill) {
    const double s = 5.0;
    const std::string pts = pointing_right ? num(x - s) + "," + num(y - s) + " " + num(x + s) + "," + num(y) + " " +
                                                 num(x - s) + "," + num(y + s)
                                           : num(x + s) + "," + num(y - s) + " " + num(x - s) + "," + num(y) + " " +
                                                 num(x + s) + "," + num(y + s);
    out_ += "<polygon class=\"" + std::string(cls) + "\" points=\"" + pts + "\" fill=\"" + std::string(fill) + "\"/>\n";
  }

  /// Frame plus `ticks`+1 labelled ticks per axis.
  void axes(std::pair<double, double> xr, std::pair<double, double> yr, std::string_view xlabel,
            std::string_view ylabel, int ticks = 5) {
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    line(x0, y0, x1, y0, "axis");
    line(x0, y0, x0, y1, "axis");
    for (int i = 0; i <= ticks; ++i) {
      const double f = static_cast<double>(i) / ticks;
      const double xv = xr.first + f * (xr.second - xr.first);
      const double yv = yr.first + f * (yr.second - yr.first);
      const double px = x0 + f * (x1 - x0);
      const double py = y0 + f * (y1 - y0);
      line(px, y0, px, y0 + 4, "tick");
      text(px, y0 + 16, format_tick(xv), "middle", "tick-label");
      line(x0 - 4, py, x0, py, "tick");
      text(x0 - 6, py + 4, format_tick(yv), "end", "tick-label");
    }
    text((x0 + x1) / 2, kHeight - 18, xlabel, "middle", "axis-label");
    out_ += "<text class=\"axis-label\" x=\"16\" y=\"" + num((y0 + y1) / 2) +
            "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
            num((y0 + y1) / 2) + ")\">" + escape(ylabel) + "</text>\n";
  }

  std::string finish() {
    out_ += "</svg>\n";
    return std::move(out_);
  }

 private:
  static std::string format_tick(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 4);
    (void)ec;
    std::string s(buf, end);
    return s == "-0" ? "0" : s;
  }

  std::string out_;
};

/// Maps data coordinates into the plot frame.
struct Frame {
  std::pair<double, double> xr;
  std::pair<double, double> yr;

  double px(double x) const { return kLeft + (x - xr.first) / (xr.second - xr.first) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - yr.first) / (yr.second - yr.first) * (kHeight - kTop - kBottom); }
};

inline std::vector<const TrialRecord*> ok_records(std::span<const TrialRecord> records) {
  std::vector<const TrialRecord*> out;
  for (const auto& r : records) {
    if (r.ok() && r.values.size() > 0) out.push_back(&r);
  }
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->set_index < b->set_index; });
  return out;
}

inline std::pair<double, double> result_range(const std::vector<const TrialRecord*>& ok) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* r : ok) {
    lo = std::min(lo, r->result);
    hi = std::max(hi, r->result);
  }
  return {lo, hi};
}

inline const TrialRecord* best_of(const std::vector<const TrialRecord*>& ok) {
  const TrialRecord* best = nullptr;
  for (const auto* r : ok) {
    if (best == nullptr || r->result < best->result) best = r;
  }
  return best;
}

inline std::string provenance_class(const TrialRecord& r) {
  if (r.has_bayes()) return "bayes";
  if (!r.provenance.empty() &&
      std::all_of(r.provenance.begin(), r.provenance.end(), [](Provenance p) { return p == Provenance::explicit_value; }))
    return "explicit";
  return "random";
}

inline const ParameterSpec& numeric_param(const SearchSpace& space, std::string_view name) {
  if (!space.index_of(name)) throw ValidationError("unknown parameter '" + std::string(name) + "'");
  const auto& spec = space.spec(name);
  if (!spec.is_numeric()) throw ValidationError("parameter '" + std::string(name) + "' is not numeric");
  return spec;
}

inline std::pair<double, double> value_range(const std::vector<const TrialRecord*>& ok, std::string_view name) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* r : ok) {
    const double v = r->values.number(name);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

inline constexpr std::string_view kRandomColor = "#1f77b4";
inline constexpr std::string_view kBayesColor = "#d62728";
inline constexpr std::string_view kBestColor = "#0000ff";

}  // namespace detail

/// Result over set index. Circles mark sets without any bayes-resolved
/// parameter, crosses mark sets with at least one.
inline Figure result_over_index(std::span<const TrialRecord> records) {
  using namespace detail;
  const auto ok = ok_records(records);
  if (ok.empty()) throw ValidationError("result_over_index: no successful trials");

  const auto [rlo, rhi] = result_range(ok);
  const Frame frame{padded(static_cast<double>(ok.front()->set_index), static_cast<double>(ok.back()->set_index)),
                    padded(rlo, rhi)};
  Svg svg("Result over parameter set index");
  svg.axes(frame.xr, frame.yr, "parameter set index", "result");
  svg.text(kWidth - kRight, kTop - 6, "circles: random/explicit sets   crosses: Bayesian optimization", "end", "legend");

  std::string csv = "set_index,result,provenance_class\n";
  for (const auto* r : ok) {
    const double x = frame.px(static_cast<double>(r->set_index));
    const double y = frame.py(r->result);
    if (r->has_bayes()) {
      svg.cross(x, y, 4.0, "marker cross", kBayesColor);
    } else {
      svg.circle(x, y, 3.5, "marker", kRandomColor);
    }
    csv += std::to_string(r->set_index) + "," + format_double(r->result) + "," + provenance_class(*r) + "\n";
  }
  return {"fig_result_over_index", svg.finish(), csv};
}

/// Two parameters against each other, colored by result, labelled with the
/// set index. The best set carries a highlight ring.
inline Figure scatter_2d(std::span<const TrialRecord> records, const SearchSpace& space, std::string_view px,
                         std::string_view py) {
  using namespace detail;
  numeric_param(space, px);
  numeric_param(space, py);
  const auto ok = ok_records(records);
  if (ok.empty()) throw ValidationError("scatter_2d: no successful trials");

  const auto [xlo, xhi] = value_range(ok, px);
  const auto [ylo, yhi] = value_range(ok, py);
  const auto [rlo, rhi] = result_range(ok);
  const Frame frame{padded(xlo, xhi), padded(ylo, yhi)};
  Svg svg(std::string(py) + " over " + std::string(px) + " (color: result)");
  svg.axes(frame.xr, frame.yr, px, py);

  const TrialRecord* best = best_of(ok);
  std::string csv = "set_index," + csv::quote(px) + "," + csv::quote(py) + ",result,color\n";
  for (const auto* r : ok) {
    const double x = frame.px(r->values.number(px));
    const double y = frame.py(r->values.number(py));
    const std::string color = ramp_color(ramp_position(r->result, rlo, rhi));
    if (r->has_bayes()) {
      svg.cross(x, y, 4.5, "marker cross", color);
    } else {
      svg.circle(x, y, 4.5, "marker", color);
    }
    svg.text(x + 6, y - 6, std::to_string(r->set_index), "start", "index-label");
    if (r == best) svg.circle(x, y, 9.0, "best-ring", "none", kBestColor, 2.0);
    csv += std::to_string(r->set_index) + "," + format_double(r->values.number(px)) + "," +
           format_double(r->values.number(py)) + "," + format_double(r->result) + "," + color + "\n";
  }
  return {"fig_scatter_" + std::string(px) + "_" + std::string(py), svg.finish(), csv};
}

/// One vertical axis per parameter; each set is a polyline colored by result.
/// Numeric axes are min-max normalized over the records; categorical and
/// opaque values sit at evenly spaced ordinals in declared order.
inline Figure parallel_coords(std::span<const TrialRecord> records, const SearchSpace& space) {
  using namespace detail;
  if (space.size() < 2) throw ValidationError("parallel_coords: needs at least two parameters");
  const auto ok = ok_records(records);
  if (ok.empty()) throw ValidationError("parallel_coords: no successful trials");

  const std::size_t n = space.size();
  std::vector<std::pair<double, double>> ranges(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (space.specs()[k].is_numeric()) ranges[k] = value_range(ok, space.specs()[k].name);
  }
  auto position = [&](const TrialRecord& r, std::size_t k) {
    const auto& spec = space.specs()[k];
    if (spec.is_numeric()) return ramp_position(r.values.number(spec.name), ranges[k].first, ranges[k].second);
    const auto& values = std::visit(
        [](const auto& kind) -> const std::vector<std::string>& {
          using K = std::decay_t<decltype(kind)>;
          if constexpr (std::is_same_v<K, Categorical> || std::is_same_v<K, Opaque>) {
            return kind.values;
          } else {
            throw ValidationError("unreachable");
          }
        },
        spec.kind);
    const auto& s = std::get<std::string>(r.values.at(spec.name));
    const auto idx = static_cast<double>(std::find(values.begin(), values.end(), s) - values.begin());
    return values.size() < 2 ? 0.5 : idx / static_cast<double>(values.size() - 1);
  };

  const auto [rlo, rhi] = result_range(ok);
  Svg svg("Parallel coordinates (color: result)");
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  auto axis_x = [&](std::size_t k) { return x0 + (x1 - x0) * static_cast<double>(k) / static_cast<double>(n - 1); };
  auto axis_y = [&](double t) { return y0 + (y1 - y0) * t; };

  for (const auto* r : ok) {
    std::string pts;
    for (std::size_t k = 0; k < n; ++k) {
      if (k) pts += ' ';
      pts += num(axis_x(k)) + "," + num(axis_y(position(*r, k)));
    }
    svg.raw("<polyline class=\"record\" data-set=\"" + std::to_string(r->set_index) + "\" points=\"" + pts +
            "\" fill=\"none\" stroke=\"" + ramp_color(ramp_position(r->result, rlo, rhi)) +
            "\" stroke-width=\"1.5\"/>\n");
  }
  for (std::size_t k = 0; k < n; ++k) {
    svg.line(axis_x(k), y0, axis_x(k), y1, "param-axis");
    svg.text(axis_x(k), y0 + 18, space.specs()[k].name, "middle", "axis-label");
  }
  return {"fig_parallel_coords", svg.finish(), ""};
}

/// One lane per worker; each trial is a bar from start to end with a start
/// triangle and an end triangle. Time is in seconds since the first start.
inline Figure worker_timeline(std::span<const TrialRecord> records, std::size_t pool_size) {
  using namespace detail;
  if (records.empty()) throw ValidationError("worker_timeline: no trials");
  std::size_t lanes = pool_size;
  std::int64_t t0 = std::numeric_limits<std::int64_t>::max();
  std::int64_t t1 = std::numeric_limits<std::int64_t>::min();
  std::map<std::size_t, std::vector<const TrialRecord*>> by_worker;
  for (const auto& r : records) {
    if (r.start_ts <= 0 || r.end_ts <= 0)
      throw ValidationError("worker_timeline: set " + std::to_string(r.set_index) + " has no timestamps");
    if (r.end_ts < r.start_ts)
      throw ValidationError("worker_timeline: set " + std::to_string(r.set_index) + " ends before it starts");
    lanes = std::max(lanes, r.worker_id + 1);
    t0 = std::min(t0, r.start_ts);
    t1 = std::max(t1, r.end_ts);
    by_worker[r.worker_id].push_back(&r);
  }
  for (auto& [w, list] : by_worker) {
    std::sort(list.begin(), list.end(), [](auto* a, auto* b) { return a->start_ts < b->start_ts; });
    for (std::size_t i = 1; i < list.size(); ++i) {
      if (list[i]->start_ts < list[i - 1]->end_ts)
        throw ValidationError("worker_timeline: worker " + std::to_string(w) + " runs sets " +
                              std::to_string(list[i - 1]->set_index) + " and " + std::to_string(list[i]->set_index) +
                              " at the same time");
    }
  }

  const double span = static_cast<double>(t1 - t0) * 1e-6;
  const Frame frame{padded(0.0, span), {-0.5, static_cast<double>(lanes) - 0.5}};
  Svg svg("Worker timeline");
  svg.axes(frame.xr, frame.yr, "time since start [s]", "worker", static_cast<int>(std::min<std::size_t>(lanes, 5)));
  for (std::size_t w = 0; w < lanes; ++w) {
    svg.raw("<g class=\"lane\" data-worker=\"" + std::to_string(w) + "\">\n");
    const double y = frame.py(static_cast<double>(w));
    svg.line(frame.px(frame.xr.first), y, frame.px(frame.xr.second), y, "lane-line", "#dddddd");
    if (auto it = by_worker.find(w); it != by_worker.end()) {
      for (const auto* r : it->second) {
        const double xs = frame.px(static_cast<double>(r->start_ts - t0) * 1e-6);
        const double xe = frame.px(static_cast<double>(r->end_ts - t0) * 1e-6);
        svg.rect(xs, y - 4, std::max(xe - xs, 0.5), 8, r->ok() ? "bar" : "bar failed", r->ok() ? "#9ecae1" : "#cccccc");
        svg.triangle(xs, y - 10, true, "start", "#2ca02c");
        svg.triangle(xe, y - 10, false, "end", "#d62728");
      }
    }
    svg.raw("</g>\n");
  }

  std::string csv = "set_index,worker_id,start_s,end_s,status\n";
  std::vector<const TrialRecord*> ordered;
  for (const auto& r : records) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->set_index < b->set_index; });
  for (const auto* r : ordered) {
    csv += std::to_string(r->set_index) + "," + std::to_string(r->worker_id) + "," +
           format_double(static_cast<double>(r->start_ts - t0) * 1e-6) + "," +
           format_double(static_cast<double>(r->end_ts - t0) * 1e-6) + "," + (r->ok() ? "ok" : "failed") + "\n";
  }
  return {"fig_worker_timeline", svg.finish(), csv};
}

/// Sample point for interpolation, in normalized coordinates.
struct Sample {
  double u = 0.0;
  double v = 0.0;
  double value = 0.0;
};

/// Inverse-distance weighting with power 2. A sample closer than 1e-9 to the
/// query returns its own value (the first such sample in input order).
inline double idw(std::span<const Sample> samples, double u, double v) {
  double num_sum = 0.0;
  double den = 0.0;
  for (const auto& s : samples) {
    const double d2 = (s.u - u) * (s.u - u) + (s.v - v) * (s.v - v);
    if (d2 <= 1e-18) return s.value;
    const double w = 1.0 / d2;
    num_sum += w * s.value;
    den += w;
  }
  return num_sum / den;
}

/// Result interpolated onto a grid_n x grid_n grid over (px, py), drawn as
/// filled cells with the samples and the best-result ring on top.
inline Figure contour(std::span<const TrialRecord> records, const SearchSpace& space, std::string_view px,
                      std::string_view py, std::size_t grid_n = 40) {
  using namespace detail;
  numeric_param(space, px);
  numeric_param(space, py);
  if (grid_n < 2) throw ValidationError("contour: grid needs at least 2 nodes per axis");
  const auto ok = ok_records(records);
  std::vector<std::pair<double, double>> distinct;
  for (const auto* r : ok) {
    const std::pair<double, double> p{r->values.number(px), r->values.number(py)};
    if (std::find(distinct.begin(), distinct.end(), p) == distinct.end()) distinct.push_back(p);
  }
  if (distinct.size() < 3) throw ValidationError("contour: needs at least 3 distinct sample points");

  const auto [xlo, xhi] = value_range(ok, px);
  const auto [ylo, yhi] = value_range(ok, py);
  auto unit = [](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; };
  std::vector<Sample> samples;
  for (const auto* r : ok)
    samples.push_back({unit(r->values.number(px), xlo, xhi), unit(r->values.number(py), ylo, yhi), r->result});

  const auto [rlo, rhi] = result_range(ok);
  const double xspan = xhi > xlo ? xhi - xlo : 0.0;
  const double yspan = yhi > ylo ? yhi - ylo : 0.0;
  const Frame frame{{xlo, xspan > 0 ? xhi : xlo + 1.0}, {ylo, yspan > 0 ? yhi : ylo + 1.0}};

  Svg svg("Interpolated " + std::string(py) + " over " + std::string(px) + " (color: result)");
  std::string csv = "i,j," + csv::quote(px) + "," + csv::quote(py) + ",value\n";
  const double step = 1.0 / static_cast<double>(grid_n - 1);
  for (std::size_t j = 0; j < grid_n; ++j) {
    for (std::size_t i = 0; i < grid_n; ++i) {
      const double u = static_cast<double>(i) * step;
      const double v = static_cast<double>(j) * step;
      const double value = idw(samples, u, v);
      const double xv = xlo + u * (frame.xr.second - frame.xr.first);
      const double yv = ylo + v * (frame.yr.second - frame.yr.first);
      const double ua = std::max(0.0, u - step / 2), ub = std::min(1.0, u + step / 2);
      const double va = std::max(0.0, v - step / 2), vb = std::min(1.0, v + step / 2);
      const double x_a = frame.px(frame.xr.first + ua * (frame.xr.second - frame.xr.first));
      const double x_b = frame.px(frame.xr.first + ub * (frame.xr.second - frame.xr.first));
      const double y_a = frame.py(frame.yr.first + vb * (frame.yr.second - frame.yr.first));
      const double y_b = frame.py(frame.yr.first + va * (frame.yr.second - frame.yr.first));
      const std::string color = ramp_color(ramp_position(value, rlo, rhi));
      svg.rect(x_a, y_a, x_b - x_a, y_b - y_a, "cell", color, color);
      csv += std::to_string(i) + "," + std::to_string(j) + "," + format_double(xv) + "," + format_double(yv) + "," +
             format_double(value) + "\n";
    }
  }
  svg.axes(frame.xr, frame.yr, px, py);
  const TrialRecord* best = best_of(ok);
  for (const auto* r : ok) {
    const double x = frame.px(r->values.number(px));
    const double y = frame.py(r->values.number(py));
    svg.circle(x, y, 3.0, "sample", ramp_color(ramp_position(r->result, rlo, rhi)), "#000000", 0.8);
    if (r == best) svg.circle(x, y, 9.0, "best-ring", "none", kBestColor, 2.0);
  }
  return {"fig_contour_" + std::string(px) + "_" + std::string(py), svg.finish(), csv};
}

/// Writes <name>.svg and, when present, <name>.csv into `dir`.
inline void write_figure(const Figure& fig, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw StorageError("cannot write " + p.string());
  };
  write(dir / (fig.name + ".svg"), fig.svg);
  if (!fig.csv.empty()) write(dir / (fig.name + ".csv"), fig.csv);
}

}  // namespace phs::report
