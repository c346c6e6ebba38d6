#include "sbreak/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "sbreak/csvio.hpp"
#include "sbreak/errors.hpp"

namespace sbreak {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kMargin = 56.0;

struct AxisMap {
    double x0, x1, y0, y1;  // data ranges (y0 = bottom value)

    double px(double x) const {
        return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2.0 * kMargin);
    }
    double py(double y) const {
        return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2.0 * kMargin);
    }
};

// Two-decimal fixed form for screen coordinates; data values elsewhere use
// the full round-trip form.
std::string px2(double v) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << v;
    return os.str();
}

void pad_range(double& a, double& b) {
    if (!(b > a)) {
        const double c = a;
        a = c - 0.5;
        b = c + 0.5;
    } else {
        const double pad = 0.05 * (b - a);
        a -= pad;
        b += pad;
    }
}

std::ofstream open_svg(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    return out;
}

void frame(std::ofstream& out) {
    out << "<rect x=\"" << px2(kMargin) << "\" y=\"" << px2(kMargin) << "\" width=\""
        << px2(kWidth - 2 * kMargin) << "\" height=\"" << px2(kHeight - 2 * kMargin)
        << "\" fill=\"none\" stroke=\"#404040\" stroke-width=\"1\"/>\n";
}

void text_at(std::ofstream& out, double x, double y, const std::string& s,
             const char* anchor = "start") {
    out << "<text x=\"" << px2(x) << "\" y=\"" << px2(y)
        << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"" << anchor << "\">" << s
        << "</text>\n";
}

void close_svg(std::ofstream& out, const std::string& path) {
    out << "</svg>\n";
    out.flush();
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace

void write_profile_svg(const std::string& path, int k_min, const std::vector<double>& profile,
                       int k_hat) {
    std::vector<std::pair<double, double>> pts;
    double ymin = std::numeric_limits<double>::infinity();
    double ymax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const double s = profile[i];
        if (!std::isfinite(s)) continue;
        pts.emplace_back(static_cast<double>(k_min) + static_cast<double>(i), s);
        ymin = std::min(ymin, s);
        ymax = std::max(ymax, s);
    }
    std::ofstream out = open_svg(path);
    if (pts.empty()) {
        text_at(out, kWidth / 2, kHeight / 2, "profile has no finite entries", "middle");
        close_svg(out, path);
        return;
    }
    AxisMap ax{pts.front().first, pts.back().first, ymin, ymax};
    pad_range(ax.x0, ax.x1);
    pad_range(ax.y0, ax.y1);
    frame(out);
    out << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) out << " ";
        out << px2(ax.px(pts[i].first)) << "," << px2(ax.py(pts[i].second));
    }
    out << "\"/>\n";
    const double xk = ax.px(static_cast<double>(k_hat));
    out << "<line x1=\"" << px2(xk) << "\" y1=\"" << px2(kMargin) << "\" x2=\"" << px2(xk)
        << "\" y2=\"" << px2(kHeight - kMargin)
        << "\" stroke=\"#b22222\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n";
    text_at(out, kMargin, kMargin - 10, "joint scale by split");
    text_at(out, kWidth - kMargin, kMargin - 10, "k_hat = " + std::to_string(k_hat), "end");
    text_at(out, kMargin, kHeight - kMargin + 16, std::to_string(k_min));
    text_at(out, kWidth - kMargin, kHeight - kMargin + 16,
            std::to_string(k_min + static_cast<int>(profile.size()) - 1), "end");
    text_at(out, kMargin - 4, kHeight - kMargin, format_double(ymin), "end");
    text_at(out, kMargin - 4, kMargin + 8, format_double(ymax), "end");
    close_svg(out, path);
}

void write_rate_svg(const std::string& path, const RateReport& report, const std::string& metric) {
    // Points: log-log summaries for the metric on the preferred basis.
    const SlopeFit* fit = preferred_slope(report, metric);
    const std::string basis = fit != nullptr ? fit->basis : "mean";
    std::vector<std::pair<double, double>> pts;  // (log n, log err)
    std::vector<int> ns;
    for (const RateCell& c : report.cells) {
        if (c.metric != metric) continue;
        const double v = basis == "median" ? c.median : c.mean;
        if (!(v > 0.0)) continue;
        pts.emplace_back(std::log(static_cast<double>(c.n)), std::log(v));
        ns.push_back(c.n);
    }
    std::ofstream out = open_svg(path);
    if (pts.size() < 2) {
        text_at(out, kWidth / 2, kHeight / 2, metric + ": too few positive summaries to plot",
                "middle");
        close_svg(out, path);
        return;
    }
    AxisMap ax{pts.front().first, pts.back().first,
               std::numeric_limits<double>::infinity(),
               -std::numeric_limits<double>::infinity()};
    const double target =
        metric == "pi" ? report.pi_slope_target : report.beta_slope_target;
    for (const auto& p : pts) {
        double lo = p.second, hi = p.second;
        if (fit != nullptr) {
            const double yf = fit->intercept + fit->slope * p.first;
            lo = std::min(lo, yf);
            hi = std::max(hi, yf);
        }
        const double yt = pts.front().second + target * (p.first - pts.front().first);
        lo = std::min(lo, yt);
        hi = std::max(hi, yt);
        ax.y0 = std::min(ax.y0, lo);
        ax.y1 = std::max(ax.y1, hi);
    }
    pad_range(ax.x0, ax.x1);
    pad_range(ax.y0, ax.y1);
    frame(out);
    // Theoretical slope, anchored at the first point.
    out << "<line x1=\"" << px2(ax.px(pts.front().first)) << "\" y1=\""
        << px2(ax.py(pts.front().second)) << "\" x2=\"" << px2(ax.px(pts.back().first))
        << "\" y2=\""
        << px2(ax.py(pts.front().second + target * (pts.back().first - pts.front().first)))
        << "\" stroke=\"#888888\" stroke-width=\"1\" stroke-dasharray=\"5 4\"/>\n";
    if (fit != nullptr) {
        out << "<line x1=\"" << px2(ax.px(pts.front().first)) << "\" y1=\""
            << px2(ax.py(fit->intercept + fit->slope * pts.front().first)) << "\" x2=\""
            << px2(ax.px(pts.back().first)) << "\" y2=\""
            << px2(ax.py(fit->intercept + fit->slope * pts.back().first))
            << "\" stroke=\"#b22222\" stroke-width=\"1.2\"/>\n";
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        out << "<circle cx=\"" << px2(ax.px(pts[i].first)) << "\" cy=\""
            << px2(ax.py(pts[i].second)) << "\" r=\"3\" fill=\"#1f6fb2\"/>\n";
        text_at(out, ax.px(pts[i].first), kHeight - kMargin + 16, std::to_string(ns[i]),
                "middle");
    }
    text_at(out, kMargin, kMargin - 10,
            metric + " error vs n (log-log, " + basis + " basis)");
    std::string legend = "target slope " + format_double(target);
    if (fit != nullptr) legend += ", fitted " + format_double(fit->slope);
    text_at(out, kWidth - kMargin, kMargin - 10, legend, "end");
    text_at(out, kMargin - 4, kHeight - kMargin, format_double(std::exp(ax.y0)), "end");
    text_at(out, kMargin - 4, kMargin + 8, format_double(std::exp(ax.y1)), "end");
    close_svg(out, path);
}

}  // namespace sbreak
