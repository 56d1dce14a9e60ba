#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vtrl/box.hpp"
#include "vtrl/common.hpp"
#include "vtrl/image.hpp"

namespace vtrl {

constexpr int kProposalCap = 1000;
constexpr int kMinProposalSide = 4;

struct ProposalSet {
    std::string image_id;
    std::vector<RegionBox> boxes;
    std::vector<real> scores;  // empty until filtering attaches them
};

struct ProposalConfig {
    std::vector<int> scales = {16, 20, 32};
    std::vector<int> strides = {4, 4, 8};  // one per scale, or a single shared stride
    int cap = kProposalCap;

    int stride_for(std::size_t scale_index) const {
        if (strides.empty()) throw config_error("no strides configured");
        return strides.size() == 1 ? strides[0] : strides.at(scale_index);
    }
};

// Deterministic multi-scale sliding-window stand-in for selective search.
// Window layout depends only on image dimensions and config, never on pixels.
inline ProposalSet generate_proposals(const ImageGrid& image, const ProposalConfig& cfg,
                                      const std::string& image_id = "") {
    if (cfg.scales.empty()) throw config_error("no proposal scales configured");
    if (cfg.cap < 1) throw config_error("proposal cap must be >= 1");
    for (int s : cfg.scales)
        if (s > image.w || s > image.h) throw config_error("proposal scale exceeds image size");

    ProposalSet out;
    out.image_id = image_id;
    std::set<RegionBox> seen;
    for (std::size_t si = 0; si < cfg.scales.size(); ++si) {
        const int s = cfg.scales[si];
        const int stride = cfg.stride_for(si);
        if (stride < 1) throw config_error("stride must be >= 1");
        for (int y = 0; y + s <= image.h; y += stride) {
            for (int x = 0; x + s <= image.w; x += stride) {
                const RegionBox b{x, y, x + s, y + s};
                if (static_cast<int>(out.boxes.size()) >= cfg.cap) return out;
                if (seen.insert(b).second) out.boxes.push_back(b);
            }
        }
    }
    return out;
}

// Box-list import: one "image_id x0 y0 x1 y1" per line. Boxes are clipped to
// image bounds, deduplicated in file order, and capped.
inline ProposalSet import_proposals(const std::string& path, const std::string& image_id,
                                    int image_w, int image_h, int cap = kProposalCap) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open proposal file: " + path);
    ProposalSet out;
    out.image_id = image_id;
    std::set<RegionBox> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string id;
        RegionBox b;
        if (!(is >> id >> b.x0 >> b.y0 >> b.x1 >> b.y1))
            throw format_error(path + ":" + std::to_string(lineno) + ": malformed proposal line");
        if (id != image_id) continue;
        b = clip_to(b, image_w, image_h);
        if (!b.valid() || b.width() < kMinProposalSide || b.height() < kMinProposalSide) continue;
        if (static_cast<int>(out.boxes.size()) >= cap) break;
        if (seen.insert(b).second) out.boxes.push_back(b);
    }
    return out;
}

inline void write_proposals(std::ostream& os, const ProposalSet& ps) {
    for (const auto& b : ps.boxes)
        os << ps.image_id << ' ' << b.x0 << ' ' << b.y0 << ' ' << b.x1 << ' ' << b.y1 << '\n';
}

// Filter net: keep the k proposals whose crops the classifier scores highest
// for the image's predicted class. Scoring callback takes a crop and a class.
template <typename ScoreFn>
ProposalSet filter_proposals(const ImageGrid& image, const ProposalSet& proposals, int predicted_class,
                             ScoreFn&& score_crop_for_class, int k) {
    if (k < 1) throw config_error("filter_proposals: k must be >= 1");
    struct Scored {
        real score;
        std::size_t order;
    };
    std::vector<Scored> scored;
    scored.reserve(proposals.boxes.size());
    for (std::size_t i = 0; i < proposals.boxes.size(); ++i) {
        const ImageGrid c = crop(image, proposals.boxes[i]);
        scored.push_back(Scored{score_crop_for_class(c, predicted_class), i});
    }
    // Ties broken by canonical (input) order.
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) { return a.score > b.score; });
    ProposalSet out;
    out.image_id = proposals.image_id;
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
    for (std::size_t i = 0; i < keep; ++i) {
        out.boxes.push_back(proposals.boxes[scored[i].order]);
        out.scores.push_back(scored[i].score);
    }
    return out;
}

}  // namespace vtrl
