#include "svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace lstmviz::cli {

namespace {

constexpr double kWidth = 860.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 20.0;
constexpr double kTop = 36.0;

// Categorical palette; classes beyond its length wrap around.
constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                               "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                               "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string header(double height, const std::string& title) {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\""
     << num(height) << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(height) << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << num(kWidth) << "\" height=\"" << num(height)
     << "\" fill=\"white\"/>\n"
     << "<text x=\"" << num(kLeft) << "\" y=\"22\" font-family=\"sans-serif\" font-size=\"14\">"
     << xml_escape(title) << "</text>\n";
  return os.str();
}

std::string text(double x, double y, const std::string& s, const char* anchor = "start",
                 int size = 11) {
  std::ostringstream os;
  os << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\""
     << size << "\" text-anchor=\"" << anchor << "\">" << xml_escape(s) << "</text>\n";
  return os.str();
}

std::string line(double x1, double y1, double x2, double y2, const char* stroke = "#444",
                 double width = 1.0) {
  std::ostringstream os;
  os << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\""
     << num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"/>\n";
  return os.str();
}

struct Axis {
  double lo;
  double hi;
  double pixel_lo;  // pixel of `lo`
  double pixel_hi;

  double operator()(double v) const {
    if (hi == lo) return 0.5 * (pixel_lo + pixel_hi);
    return pixel_lo + (v - lo) / (hi - lo) * (pixel_hi - pixel_lo);
  }
};

std::string polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                     const Axis& ax, const Axis& ay, const char* stroke) {
  std::ostringstream os;
  os << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ' ';
    os << num(ax(xs[i])) << ',' << num(ay(ys[i]));
  }
  os << "\"/>\n";
  return os.str();
}

std::string frame(const Axis& ax, const Axis& ay, const std::string& xlabel,
                  const std::string& ylabel) {
  std::string s;
  s += line(ax.pixel_lo, ay.pixel_lo, ax.pixel_hi, ay.pixel_lo);
  s += line(ax.pixel_lo, ay.pixel_lo, ax.pixel_lo, ay.pixel_hi);
  for (double v : {ay.lo, ay.hi}) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    s += text(ax.pixel_lo - 6, ay(v) + 4, os.str(), "end");
  }
  s += text(0.5 * (ax.pixel_lo + ax.pixel_hi), ay.pixel_lo + 30, xlabel, "middle");
  s += text(14, 0.5 * (ay.pixel_lo + ay.pixel_hi), ylabel, "start");
  return s;
}

}  // namespace

std::string xml_escape(const std::string& in) {
  std::string out;
  out.reserve(in.size());
  for (char c : in) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string salience_svg(const Matrix& x, const SalienceMap& map, const std::string& title) {
  const double height = 300.0;
  const Eigen::Index T = x.rows();
  const Axis ax{0.0, static_cast<double>(T), kLeft, kWidth - kRight};
  double lo = x.size() ? x.minCoeff() : 0.0, hi = x.size() ? x.maxCoeff() : 1.0;
  if (hi == lo) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  const Axis ay{lo - pad, hi + pad, height - 50.0, kTop};

  std::string s = header(height, title);
  const double cell = (ax.pixel_hi - ax.pixel_lo) / std::max<double>(1.0, static_cast<double>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    const double v = map.values.row(t).maxCoeff();
    if (v <= 0.0) continue;
    std::ostringstream os;
    os << "<rect x=\"" << num(ax(static_cast<double>(t))) << "\" y=\"" << num(ay.pixel_hi)
       << "\" width=\"" << num(cell + 0.05) << "\" height=\"" << num(ay.pixel_lo - ay.pixel_hi)
       << "\" fill=\"#d62728\" fill-opacity=\"" << num(std::clamp(v, 0.0, 1.0)) << "\"/>\n";
    s += os.str();
  }
  std::vector<double> ts(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) ts[t] = static_cast<double>(t) + 0.5;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    std::vector<double> ys(x.col(j).data(), x.col(j).data() + T);
    s += polyline(ts, ys, ax, ay, j == 0 ? "#000000" : kPalette[j % kPalette.size()]);
  }
  s += frame(ax, ay, "time step", "input");
  s += text(kWidth - kRight, 22, "salience: white 0 to red 1 (" + to_string(map.technique) + ")",
            "end");
  s += "</svg>\n";
  return s;
}

std::string temporal_svg(const TemporalScores& scores, const std::string& title) {
  const double height = 300.0;
  const Eigen::Index T = scores.probs.rows();
  const Axis ax{0.0, static_cast<double>(T), kLeft, kWidth - kRight};
  const double band_top = height - 78.0, band_bottom = height - 60.0;
  const Axis ay{0.0, 1.0, band_top - 14.0, kTop};

  std::string s = header(height, title);
  const double cell = (ax.pixel_hi - ax.pixel_lo) / std::max<double>(1.0, static_cast<double>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    const int k = scores.predicted[static_cast<std::size_t>(t)];
    std::ostringstream os;
    os << "<rect x=\"" << num(ax(static_cast<double>(t))) << "\" y=\"" << num(band_top)
       << "\" width=\"" << num(cell + 0.05) << "\" height=\"" << num(band_bottom - band_top)
       << "\" fill=\"" << kPalette[static_cast<std::size_t>(k) % kPalette.size()] << "\"/>\n";
    s += os.str();
  }
  std::vector<double> ts(static_cast<std::size_t>(T)), ps(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    ts[t] = static_cast<double>(t) + 0.5;
    ps[t] = scores.true_class_prob[t];
  }
  s += polyline(ts, ps, ax, ay, "#000000");
  s += frame(ax, ay, "time step (band: predicted class)",
             "P(class " + std::to_string(scores.true_class) + ")");
  // Legend of the classes that occur in the band.
  std::vector<int> seen(scores.predicted);
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  double lx = kWidth - kRight - 70.0 * static_cast<double>(seen.size());
  for (int k : seen) {
    std::ostringstream os;
    os << "<rect x=\"" << num(lx) << "\" y=\"12\" width=\"12\" height=\"12\" fill=\""
       << kPalette[static_cast<std::size_t>(k) % kPalette.size()] << "\"/>\n";
    s += os.str();
    s += text(lx + 16, 22, "class " + std::to_string(k));
    lx += 70.0;
  }
  s += "</svg>\n";
  return s;
}

std::string curves_svg(const ComparisonTable& table, const std::string& title) {
  const double height = 340.0;
  const double a_lo = table.alphas.front(), a_hi = table.alphas.back();
  double y_lo = std::min(0.0, table.y_min), y_hi = std::max(0.0, table.y_max);
  if (y_hi == y_lo) y_hi = y_lo + 1.0;
  const Axis ax{a_lo, a_hi, kLeft, kWidth - kRight - 130.0};
  const Axis ay{y_lo, y_hi, height - 50.0, kTop};

  std::string s = header(height, title);
  s += line(ax.pixel_lo, ay(0.0), ax.pixel_hi, ay(0.0), "#bbbbbb");
  for (std::size_t i = 0; i < table.techniques.size(); ++i) {
    const char* colour = kPalette[i % kPalette.size()];
    s += polyline(table.alphas, table.reductions[i], ax, ay, colour);
    for (std::size_t a = 0; a < table.alphas.size(); ++a) {
      std::ostringstream os;
      os << "<circle cx=\"" << num(ax(table.alphas[a])) << "\" cy=\""
         << num(ay(table.reductions[i][a])) << "\" r=\"2.5\" fill=\"" << colour << "\"/>\n";
      s += os.str();
    }
    const double ly = kTop + 18.0 * static_cast<double>(i) + 8.0;
    s += line(ax.pixel_hi + 16, ly, ax.pixel_hi + 40, ly, colour, 2.0);
    s += text(ax.pixel_hi + 46, ly + 4, table.techniques[i]);
  }
  s += frame(ax, ay, "alpha", "reduction");
  s += "</svg>\n";
  return s;
}

}  // namespace lstmviz::cli
