#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <iostream>
#include <optional>
#include <vector>

#include "vtrl/box.hpp"
#include "vtrl/classifier.hpp"
#include "vtrl/common.hpp"
#include "vtrl/image.hpp"

namespace vtrl {

// The localization backbone is exactly the conv-GAP-linear classifier.
using CamBackbone = ConvClassifier;

struct ActivationMap {
    std::vector<real> grid;  // h*w
    int h = 0, w = 0;
    int class_id = -1;

    real at(int y, int x) const { return grid[static_cast<std::size_t>(y) * w + x]; }
};

// M_c(x,y) = sum_k w_k^c * f_k(x,y), evaluated at feature resolution.
inline ActivationMap class_activation_map(CamBackbone& backbone, const ImageGrid& image, int class_id) {
    if (class_id < 0 || class_id >= backbone.cfg.n_classes) throw config_error("invalid class id");
    const auto& feats = backbone.feature_maps(backbone.to_input(image));
    ActivationMap m;
    m.h = backbone.feat_h();
    m.w = backbone.feat_w();
    m.class_id = class_id;
    m.grid.assign(static_cast<std::size_t>(m.h) * m.w, 0.0);
    const int K = backbone.cfg.feat_channels;
    const real* wrow = &backbone.head.w[static_cast<std::size_t>(class_id) * K];
    for (int i = 0; i < m.h * m.w; ++i) {
        real acc = 0.0;
        const real* f = &feats[static_cast<std::size_t>(i) * K];
        for (int k = 0; k < K; ++k) acc += wrow[k] * f[k];
        m.grid[static_cast<std::size_t>(i)] = acc;
    }
    return m;
}

// Min-max normalization into 256 integer bins. Constant maps are degenerate.
inline std::optional<std::vector<int>> quantize_map(const std::vector<real>& grid) {
    real lo = grid[0], hi = grid[0];
    for (real v : grid) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) return std::nullopt;
    std::vector<int> bins(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        bins[i] = static_cast<int>(std::lround((grid[i] - lo) / (hi - lo) * 255.0));
    return bins;
}

// OTSU threshold over the 256-bin histogram: smallest t maximizing
// between-class variance. The variance comparison runs in exact integer
// arithmetic, sigma_B^2(t) proportional to (S0*N - S*w0)^2 / (w0*(N-w0)),
// so the argmax never depends on floating-point rounding.
inline int otsu_threshold_bins(const std::vector<int>& bins) {
    long long hist[256] = {0};
    for (int b : bins) ++hist[b];
    const long long N = static_cast<long long>(bins.size());
    long long S = 0;
    for (int t = 0; t < 256; ++t) S += static_cast<long long>(t) * hist[t];

    int best_t = 0;
    __int128 best_num = -1, best_den = 1;  // best = num/den
    long long w0 = 0, S0 = 0;
    for (int t = 0; t < 256; ++t) {
        w0 += hist[t];
        S0 += static_cast<long long>(t) * hist[t];
        const long long w1 = N - w0;
        if (w0 == 0 || w1 == 0) continue;  // variance is zero; t=0 default covers ties
        const __int128 a = static_cast<__int128>(S0) * N - static_cast<__int128>(S) * w0;
        const __int128 num = a * a;
        const __int128 den = static_cast<__int128>(w0) * w1;
        // num/den > best_num/best_den  <=>  num*best_den > best_num*den
        if (num * best_den > best_num * den) {
            best_num = num;
            best_den = den;
            best_t = t;
        }
    }
    return best_t;
}

// Degenerate (constant) maps yield nullopt; the caller treats the whole image
// as foreground.
inline std::optional<int> otsu_threshold(const ActivationMap& map) {
    const auto bins = quantize_map(map.grid);
    if (!bins) return std::nullopt;
    return otsu_threshold_bins(*bins);
}

// Largest 4-connected true region, ties going to the component containing the
// smallest row-major pixel index. Returns its tight bbox in grid coordinates.
inline std::optional<RegionBox> largest_component_bbox(const std::vector<std::uint8_t>& mask, int h, int w) {
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::optional<RegionBox> best;
    long long best_count = 0;
    std::deque<std::pair<int, int>> queue;
    for (int sy = 0; sy < h; ++sy)
        for (int sx = 0; sx < w; ++sx) {
            const std::size_t si = static_cast<std::size_t>(sy) * w + sx;
            if (!mask[si] || seen[si]) continue;
            long long count = 0;
            RegionBox box{sx, sy, sx + 1, sy + 1};
            seen[si] = 1;
            queue.emplace_back(sx, sy);
            while (!queue.empty()) {
                auto [x, y] = queue.front();
                queue.pop_front();
                ++count;
                box.x0 = std::min(box.x0, x);
                box.y0 = std::min(box.y0, y);
                box.x1 = std::max(box.x1, x + 1);
                box.y1 = std::max(box.y1, y + 1);
                constexpr int dx[4] = {1, -1, 0, 0};
                constexpr int dy[4] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    const int nx = x + dx[d], ny = y + dy[d];
                    if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                    const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                    if (mask[ni] && !seen[ni]) {
                        seen[ni] = 1;
                        queue.emplace_back(nx, ny);
                    }
                }
            }
            if (count > best_count) {  // strict: earliest component wins ties
                best_count = count;
                best = box;
            }
        }
    return best;
}

// Predicted class -> activation map -> OTSU mask -> largest component ->
// bbox scaled outward to image coordinates. Degenerate branches fall back to
// the full-image box.
inline RegionBox localize_object(CamBackbone& backbone, const ImageGrid& image, bool log_fallback = true) {
    const int cls = backbone.predict_class(image);
    const ActivationMap cam = class_activation_map(backbone, image, cls);
    const auto bins = quantize_map(cam.grid);
    if (!bins) {
        if (log_fallback) std::cerr << "[vtrl] localize: constant activation map, full-image fallback\n";
        return image.full_box();
    }
    const int t = otsu_threshold_bins(*bins);
    std::vector<std::uint8_t> mask(bins->size());
    for (std::size_t i = 0; i < bins->size(); ++i) mask[i] = (*bins)[i] > t ? 1 : 0;
    const auto grid_box = largest_component_bbox(mask, cam.h, cam.w);
    if (!grid_box) {
        if (log_fallback) std::cerr << "[vtrl] localize: empty foreground mask, full-image fallback\n";
        return image.full_box();
    }
    const real sx = static_cast<real>(image.w) / cam.w;
    const real sy = static_cast<real>(image.h) / cam.h;
    const RegionBox out = scale_box_outward(*grid_box, sx, sy, image.w, image.h);
    return out.valid() ? out : image.full_box();
}

}  // namespace vtrl
