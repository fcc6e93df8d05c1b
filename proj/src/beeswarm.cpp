#include "xpd/beeswarm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace xpd {

namespace {

constexpr double kWidth = 900.0;
constexpr double kLeft = 180.0;
constexpr double kRight = 40.0;
constexpr double kTop = 50.0;
constexpr double kBand = 28.0;
constexpr double kBottom = 60.0;

std::string fmt(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  if (s == "-0.00") s = "0.00";
  return s;
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

std::string color(double t) {
  const auto r = static_cast<int>(std::lround(255.0 * t));
  const auto b = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  return "rgb(" + std::to_string(r) + ",0," + std::to_string(b) + ")";
}

}  // namespace

std::vector<double> value_percentiles(const Matrix& x, std::size_t feature) {
  const std::size_t n = x.rows();
  std::vector<double> out(n, 0.5);
  if (n < 2) return out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x(a, feature) < x(b, feature); });
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x(order[j], feature) == x(order[i], feature)) ++j;
    // less = i values strictly below, equal = j - i
    const double p = (static_cast<double>(i) + static_cast<double>(j - i - 1) / 2.0) / static_cast<double>(n - 1);
    for (std::size_t k = i; k < j; ++k) out[order[k]] = p;
    i = j;
  }
  return out;
}

std::string render_beeswarm(const Matrix& phis, const Matrix& x, const std::vector<std::string>& names,
                            const BeeswarmOptions& options) {
  if (phis.rows() == 0 || phis.cols() == 0) throw DataError("beeswarm: empty attribution matrix");
  if (x.rows() != phis.rows() || x.cols() != phis.cols() || names.size() != phis.cols()) {
    throw DataError("beeswarm: attribution, data and name dimensions differ");
  }
  const std::size_t n = phis.rows();
  const std::size_t d = phis.cols();

  std::vector<double> importance(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) importance[j] += std::abs(phis(i, j));
  }
  for (auto& v : importance) v /= static_cast<double>(n);
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });
  order.resize(std::min(d, options.max_features));

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (auto j : order) {
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, phis(i, j));
      hi = std::max(hi, phis(i, j));
    }
  }
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double plot_width = kWidth - kLeft - kRight;
  auto to_px = [&](double phi) { return kLeft + (phi - lo) / (hi - lo) * plot_width; };

  const double height = kTop + kBand * static_cast<double>(order.size()) + kBottom;
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth, 0) << "\" height=\"" << fmt(height, 0)
      << "\" viewBox=\"0 0 " << fmt(kWidth, 0) << ' ' << fmt(height, 0) << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!options.title.empty()) {
    svg << "<text x=\"" << fmt(kWidth / 2, 0) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
        << escape(options.title) << "</text>\n";
  }
  const double zero_x = to_px(0.0);
  svg << "<line x1=\"" << fmt(zero_x) << "\" y1=\"" << fmt(kTop - 10) << "\" x2=\"" << fmt(zero_x) << "\" y2=\""
      << fmt(height - kBottom + 5) << "\" stroke=\"#999\" stroke-width=\"1\"/>\n";

  std::mt19937_64 rng(options.jitter_seed);
  std::uniform_real_distribution<double> jitter(-0.35 * kBand, 0.35 * kBand);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const auto j = order[rank];
    const double center = kTop + kBand * (static_cast<double>(rank) + 0.5);
    const auto pct = value_percentiles(x, j);
    svg << "<g class=\"feature\" data-feature=\"" << escape(names[j]) << "\" data-rank=\"" << rank
        << "\" data-mean-abs-phi=\"" << fmt(importance[j], 6) << "\">\n";
    svg << "<text x=\"" << fmt(kLeft - 10) << "\" y=\"" << fmt(center + 4) << "\" text-anchor=\"end\">"
        << escape(names[j]) << "</text>\n";
    for (std::size_t i = 0; i < n; ++i) {
      const double cy = n == 1 ? center : center + jitter(rng);
      svg << "<circle cx=\"" << fmt(to_px(phis(i, j))) << "\" cy=\"" << fmt(cy) << "\" r=\"2.5\" fill=\""
          << color(pct[i]) << "\" fill-opacity=\"0.8\" data-phi=\"" << fmt(phis(i, j), 6) << "\"/>\n";
    }
    svg << "</g>\n";
  }

  const double axis_y = height - kBottom + 5;
  svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(axis_y) << "\" x2=\"" << fmt(kWidth - kRight) << "\" y2=\""
      << fmt(axis_y) << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    svg << "<text x=\"" << fmt(to_px(v)) << "\" y=\"" << fmt(axis_y + 16) << "\" text-anchor=\"middle\">" << fmt(v, 2)
        << "</text>\n";
  }
  svg << "<text x=\"" << fmt(kLeft + plot_width / 2) << "\" y=\"" << fmt(axis_y + 34)
      << "\" text-anchor=\"middle\">SHAP value (impact on log-odds)</text>\n";
  svg << "<text x=\"" << fmt(kWidth - kRight) << "\" y=\"" << fmt(kTop - 20)
      << "\" text-anchor=\"end\"><tspan fill=\"rgb(0,0,255)\">low</tspan> / <tspan fill=\"rgb(255,0,0)\">high</tspan>"
         " feature value</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

void emit_beeswarm(const Matrix& phis, const Matrix& x, const std::vector<std::string>& names,
                   const std::filesystem::path& path, const BeeswarmOptions& options) {
  const auto text = render_beeswarm(phis, x, names, options);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace xpd
