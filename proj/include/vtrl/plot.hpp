#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vtrl/common.hpp"
#include "vtrl/image.hpp"

namespace vtrl {

// Small raster charts for run reports: line chart for loss curves, bar chart
// for per-class accuracy. No text; axes plus series only.
namespace plot {

inline const std::vector<Color>& series_colors() {
    static const std::vector<Color> v = {{0.85, 0.20, 0.20}, {0.20, 0.35, 0.85}, {0.15, 0.65, 0.25},
                                         {0.85, 0.60, 0.10}, {0.55, 0.20, 0.75}, {0.10, 0.65, 0.65}};
    return v;
}

inline void draw_hline(ImageGrid& img, int y, int x0, int x1, const Color& c) {
    if (y < 0 || y >= img.h) return;
    for (int x = std::max(0, x0); x < std::min(img.w, x1); ++x)
        for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = c[ch];
}

inline void draw_vline(ImageGrid& img, int x, int y0, int y1, const Color& c) {
    if (x < 0 || x >= img.w) return;
    for (int y = std::max(0, y0); y < std::min(img.h, y1); ++y)
        for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = c[ch];
}

inline void draw_segment(ImageGrid& img, real x0, real y0, real x1, real y1, const Color& c) {
    const int steps = std::max(2, static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) * 2);
    for (int s = 0; s <= steps; ++s) {
        const real t = static_cast<real>(s) / steps;
        const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
        const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
        if (x < 0 || x >= img.w || y < 0 || y >= img.h) continue;
        for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = c[ch];
    }
}

inline ImageGrid line_chart(const std::vector<std::vector<real>>& series, int w = 480, int h = 320) {
    ImageGrid img(h, w, {1.0, 1.0, 1.0});
    const int ml = 40, mr = 12, mt = 12, mb = 28;  // margins
    const Color axis{0.25, 0.25, 0.25}, grid{0.88, 0.88, 0.88};
    real lo = 0.0, hi = 1e-9;
    std::size_t n = 2;
    for (const auto& s : series) {
        n = std::max(n, s.size());
        for (real v : s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi <= lo) hi = lo + 1.0;
    for (int g = 1; g <= 3; ++g) draw_hline(img, mt + g * (h - mt - mb) / 4, ml, w - mr, grid);
    draw_vline(img, ml, mt, h - mb, axis);
    draw_hline(img, h - mb, ml, w - mr, axis);
    auto px = [&](std::size_t i) { return ml + static_cast<real>(i) / (n - 1) * (w - ml - mr - 1); };
    auto py = [&](real v) { return (h - mb) - (v - lo) / (hi - lo) * (h - mt - mb - 1); };
    for (std::size_t si = 0; si < series.size(); ++si) {
        const Color& c = series_colors()[si % series_colors().size()];
        const auto& s = series[si];
        for (std::size_t i = 1; i < s.size(); ++i)
            draw_segment(img, px(i - 1), py(s[i - 1]), px(i), py(s[i]), c);
    }
    return img;
}

inline ImageGrid bar_chart(const std::vector<real>& values, int w = 480, int h = 320) {
    ImageGrid img(h, w, {1.0, 1.0, 1.0});
    const int ml = 40, mr = 12, mt = 12, mb = 28;
    const Color axis{0.25, 0.25, 0.25};
    draw_vline(img, ml, mt, h - mb, axis);
    draw_hline(img, h - mb, ml, w - mr, axis);
    if (values.empty()) return img;
    const real hi = std::max(1.0, *std::max_element(values.begin(), values.end()));
    const int span = w - ml - mr;
    const int bw = std::max(2, span / static_cast<int>(values.size() * 2));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const Color& c = series_colors()[i % series_colors().size()];
        const int x0 = ml + static_cast<int>((i * 2 + 1) * span / (values.size() * 2)) - bw / 2;
        const int top = (h - mb) - static_cast<int>((values[i] / hi) * (h - mt - mb - 1));
        for (int x = x0; x < x0 + bw; ++x) draw_vline(img, x, top, h - mb, c);
    }
    return img;
}

}  // namespace plot
}  // namespace vtrl
