#include "faceclust/plots.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "faceclust/error.hpp"

namespace faceclust {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string header(int width, int height) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
           std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " + std::to_string(height) +
           "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle") {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" + s + "</text>\n";
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::string elbow_svg(const ElbowCurve& curve, std::optional<std::size_t> knee) {
    constexpr int W = 640, H = 400, L = 70, R = 20, T = 30, B = 50;
    std::string s = header(W, H);
    s += text(W / 2.0, 18, "Elbow curve: SSE by k");
    const auto& pts = curve.points;
    if (pts.empty()) return s + "</svg>\n";
    double ymax = 0.0;
    for (const auto& p : pts) ymax = std::max(ymax, p.sse);
    if (ymax <= 0.0) ymax = 1.0;
    const double k0 = static_cast<double>(pts.front().k), k1 = static_cast<double>(pts.back().k);
    const double kspan = k1 > k0 ? k1 - k0 : 1.0;
    auto px = [&](double k) { return L + (k - k0) / kspan * (W - L - R); };
    auto py = [&](double v) { return H - B - v / ymax * (H - T - B); };

    s += "<line x1=\"" + num(L) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(W - R) + "\" y2=\"" + num(H - B) +
         "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(L) + "\" y1=\"" + num(T) + "\" x2=\"" + num(L) + "\" y2=\"" + num(H - B) +
         "\" stroke=\"black\"/>\n";
    for (const auto& p : pts) s += text(px(static_cast<double>(p.k)), H - B + 18, std::to_string(p.k));
    for (int i = 0; i <= 4; ++i) {
        const double v = ymax * i / 4.0;
        char label[32];
        std::snprintf(label, sizeof label, "%.3g", v);
        s += text(L - 6, py(v) + 4, label, "end");
    }
    s += text(W / 2.0, H - 10, "number of clusters k");
    s += "<text x=\"16\" y=\"" + num(H / 2.0) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + num(H / 2.0) +
         ")\">SSE</text>\n";

    s += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
        s += (i ? " " : "") + num(px(static_cast<double>(pts[i].k))) + "," + num(py(pts[i].sse));
    s += "\"/>\n";
    for (const auto& p : pts) {
        const bool is_knee = knee && *knee == p.k;
        s += "<circle cx=\"" + num(px(static_cast<double>(p.k))) + "\" cy=\"" + num(py(p.sse)) + "\" r=\"" +
             (is_knee ? "6" : "3.5") + "\" fill=\"" + (is_knee ? "#d62728" : "#1f77b4") + "\"/>\n";
    }
    return s + "</svg>\n";
}

std::string silhouette_svg(const SilhouetteReport& report, std::span<const std::size_t> labels) {
    require(labels.size() == report.per_sample.size(), "silhouette plot: label count mismatch");
    constexpr int W = 640, L = 80, R = 20, T = 30, B = 50, kGap = 8;
    const std::size_t n = labels.size();
    const double bar = n > 0 ? std::clamp(360.0 / static_cast<double>(n), 1.0, 8.0) : 8.0;
    const std::size_t k = report.cluster_sizes.size();
    const int H = static_cast<int>(T + B + bar * static_cast<double>(n) + kGap * static_cast<double>(k));

    std::string s = header(W, H);
    s += text(W / 2.0, 18, "Silhouette values by cluster");
    auto px = [&](double v) { return L + (v + 1.0) / 2.0 * (W - L - R); };

    double y = T;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> vals;
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] == c) vals.push_back(report.per_sample[i]);
        std::sort(vals.begin(), vals.end(), std::greater<>());
        const double top = y;
        for (double v : vals) {
            const double x0 = std::min(px(0.0), px(v)), x1 = std::max(px(0.0), px(v));
            s += "<rect x=\"" + num(x0) + "\" y=\"" + num(y) + "\" width=\"" + num(x1 - x0) + "\" height=\"" +
                 num(bar) + "\" fill=\"" + kPalette[c % 10] + "\"/>\n";
            y += bar;
        }
        s += text(L - 8, (top + y) / 2.0 + 4, "cluster " + std::to_string(c), "end");
        y += kGap;
    }

    s += "<line x1=\"" + num(px(0.0)) + "\" y1=\"" + num(T) + "\" x2=\"" + num(px(0.0)) + "\" y2=\"" + num(H - B) +
         "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(L) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(W - R) + "\" y2=\"" + num(H - B) +
         "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = -1.0 + 0.5 * i;
        char label[16];
        std::snprintf(label, sizeof label, "%.1f", v);
        s += text(px(v), H - B + 18, label);
    }
    s += "<line x1=\"" + num(px(report.overall_mean)) + "\" y1=\"" + num(T) + "\" x2=\"" +
         num(px(report.overall_mean)) + "\" y2=\"" + num(H - B) +
         "\" stroke=\"red\" stroke-width=\"2\" stroke-dasharray=\"6,4\"/>\n";
    s += text(W / 2.0, H - 10, "silhouette value (red: overall mean " + num(report.overall_mean) + ")");
    return s + "</svg>\n";
}

GrayImage montage(std::span<const GrayImage> images, int tile, int columns) {
    require(tile >= 1 && columns >= 1, "montage: tile and columns must be >= 1");
    const int count = static_cast<int>(images.size());
    const int cols = std::max(1, std::min(columns, count));
    const int rows = std::max(1, (count + cols - 1) / cols);
    GrayImage out(cols * tile, rows * tile, 255.0);
    for (int i = 0; i < count; ++i) {
        const GrayImage t = resize_bilinear(images[static_cast<std::size_t>(i)], tile, tile);
        const int ox = (i % cols) * tile, oy = (i / cols) * tile;
        for (int y = 0; y < tile; ++y)
            for (int x = 0; x < tile; ++x) out.at(ox + x, oy + y) = t.at(x, y);
    }
    return out;
}

}  // namespace faceclust
