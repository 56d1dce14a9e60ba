#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "vtrl/box.hpp"
#include "vtrl/common.hpp"

namespace vtrl {

using Color = std::array<real, 3>;

// Dense H x W x 3 grid, row-major, channel-last, values in [0,1].
struct ImageGrid {
    int h = 0, w = 0;
    std::vector<real> data;  // h*w*3

    ImageGrid() = default;
    ImageGrid(int h_, int w_, const Color& fill_color = {0, 0, 0}) : h(h_), w(w_), data(static_cast<std::size_t>(h_) * w_ * 3) {
        fill(fill_color);
    }

    real& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
    real at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }

    void fill(const Color& c) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int ch = 0; ch < 3; ++ch) at(y, x, ch) = c[ch];
    }

    void fill_rect(const RegionBox& b, const Color& c) {
        const RegionBox r = clip_to(b, w, h);
        for (int y = r.y0; y < r.y1; ++y)
            for (int x = r.x0; x < r.x1; ++x)
                for (int ch = 0; ch < 3; ++ch) at(y, x, ch) = c[ch];
    }

    RegionBox full_box() const { return RegionBox{0, 0, w, h}; }

    bool operator==(const ImageGrid& o) const { return h == o.h && w == o.w && data == o.data; }
};

// Exact pixel sub-grid. Resizing is a separate step (resize_bilinear).
inline ImageGrid crop(const ImageGrid& img, const RegionBox& box) {
    if (!box.valid() || box.x0 < 0 || box.y0 < 0 || box.x1 > img.w || box.y1 > img.h)
        throw shape_error("crop box out of bounds or degenerate");
    ImageGrid out(box.height(), box.width());
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(box.y0 + y, box.x0 + x, c);
    return out;
}

inline ImageGrid resize_bilinear(const ImageGrid& img, int oh, int ow) {
    if (oh < 1 || ow < 1) throw shape_error("resize target must be positive");
    ImageGrid out(oh, ow);
    if (img.h == oh && img.w == ow) {
        out.data = img.data;
        return out;
    }
    // Align-corners-off convention: sample at pixel centers.
    const real sy = static_cast<real>(img.h) / oh;
    const real sx = static_cast<real>(img.w) / ow;
    for (int y = 0; y < oh; ++y) {
        const real fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<real>(img.h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.h - 1);
        const real wy = fy - y0;
        for (int x = 0; x < ow; ++x) {
            const real fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<real>(img.w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.w - 1);
            const real wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const real top = img.at(y0, x0, c) * (1 - wx) + img.at(y0, x1, c) * wx;
                const real bot = img.at(y1, x0, c) * (1 - wx) + img.at(y1, x1, c) * wx;
                out.at(y, x, c) = top * (1 - wy) + bot * wy;
            }
        }
    }
    return out;
}

inline real mean_channel(const ImageGrid& img, const RegionBox& box, int c) {
    const RegionBox r = clip_to(box, img.w, img.h);
    if (!r.valid()) return 0.0;
    real s = 0.0;
    for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) s += img.at(y, x, c);
    return s / static_cast<real>(r.area());
}

}  // namespace vtrl
