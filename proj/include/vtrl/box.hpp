#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "vtrl/common.hpp"

namespace vtrl {

// Axis-aligned box in pixel coordinates, half-open: [x0,x1) x [y0,y1).
struct RegionBox {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    long long area() const { return static_cast<long long>(width()) * height(); }
    bool valid() const { return x1 > x0 && y1 > y0; }

    bool contains(const RegionBox& b) const {
        return b.x0 >= x0 && b.y0 >= y0 && b.x1 <= x1 && b.y1 <= y1;
    }
    bool operator==(const RegionBox& b) const {
        return x0 == b.x0 && y0 == b.y0 && x1 == b.x1 && y1 == b.y1;
    }
    bool operator<(const RegionBox& b) const {
        if (y0 != b.y0) return y0 < b.y0;
        if (x0 != b.x0) return x0 < b.x0;
        if (y1 != b.y1) return y1 < b.y1;
        return x1 < b.x1;
    }
};

inline RegionBox intersect(const RegionBox& a, const RegionBox& b) {
    RegionBox r{std::max(a.x0, b.x0), std::max(a.y0, b.y0),
                std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
    if (!r.valid()) return RegionBox{0, 0, 0, 0};
    return r;
}

inline real iou(const RegionBox& a, const RegionBox& b) {
    const long long inter = intersect(a, b).area();
    const long long uni = a.area() + b.area() - inter;
    if (uni <= 0) return 0.0;
    return static_cast<real>(inter) / static_cast<real>(uni);
}

inline RegionBox clip_to(const RegionBox& b, int width, int height) {
    RegionBox r{std::clamp(b.x0, 0, width), std::clamp(b.y0, 0, height),
                std::clamp(b.x1, 0, width), std::clamp(b.y1, 0, height)};
    return r;
}

// Feature-grid box -> image box. Corners round outward so the scaled box
// never undershoots the activated region.
inline RegionBox scale_box_outward(const RegionBox& b, real sx, real sy, int width, int height) {
    RegionBox r{static_cast<int>(std::floor(b.x0 * sx)), static_cast<int>(std::floor(b.y0 * sy)),
                static_cast<int>(std::ceil(b.x1 * sx)), static_cast<int>(std::ceil(b.y1 * sy))};
    return clip_to(r, width, height);
}

}  // namespace vtrl
