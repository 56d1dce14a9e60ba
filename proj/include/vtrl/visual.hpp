#pragma once

#include <array>
#include <optional>
#include <vector>

#include "vtrl/classifier.hpp"
#include "vtrl/common.hpp"
#include "vtrl/image.hpp"

namespace vtrl {

// Stage chain of Algorithm-1: each stage starts from the previous stage's
// parameters (ori starts from random init) and fine-tunes on its own view.
inline ConvClassifier train_stage(const std::vector<const ImageGrid*>& view, const std::vector<int>& labels,
                                  const ConvClassifier& init, const std::string& stage, const TrainConfig& tc) {
    if (view.empty()) throw config_error("train_stage(" + stage + "): empty dataset view");
    ConvClassifier model = init;  // parameter shapes identical across stages
    model.cfg.stage = stage;
    train_classifier(model, view, labels, tc);
    return model;
}

// Mean of the per-crop probability vectors.
inline std::vector<real> part_prediction(ConvClassifier& model, const std::vector<ImageGrid>& part_crops) {
    if (part_crops.empty()) throw config_error("part_prediction: no crops (caller should omit the part term)");
    std::vector<real> acc(static_cast<std::size_t>(model.cfg.n_classes), 0.0);
    for (const auto& c : part_crops) {
        const auto s = model.predict_scores(c);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s[i];
    }
    for (auto& v : acc) v /= static_cast<real>(part_crops.size());
    return acc;
}

// Weighted mean of the three stage predictions. A missing part term drops its
// weight from the normalization (the (w1,w2,0) fallback path).
inline std::vector<real> visual_prediction(const std::vector<real>& s_ori, const std::vector<real>& s_obj,
                                           const std::vector<real>* s_part, const std::array<real, 3>& weights) {
    if (weights[0] < 0 || weights[1] < 0 || weights[2] < 0) throw config_error("negative fusion weight");
    if (s_ori.size() != s_obj.size() || (s_part && s_part->size() != s_ori.size()))
        throw shape_error("visual_prediction: score length mismatch");
    const real w3 = s_part ? weights[2] : 0.0;
    const real total = weights[0] + weights[1] + w3;
    if (total <= 0.0) throw config_error("all fusion weights are zero");
    std::vector<real> out(s_ori.size(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        real v = weights[0] * s_ori[i] + weights[1] * s_obj[i];
        if (s_part) v += w3 * (*s_part)[i];
        out[i] = v / total;
    }
    return out;
}

struct StageScores {
    std::vector<real> ori, obj;
    std::optional<std::vector<real>> part;
};

inline int argmax_score(const std::vector<real>& s) {
    int best = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i] > s[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

// Weighted mean that copes with degenerate weight/part combinations: a
// missing part term with zero remaining mass falls back to (1,1,0).
inline std::vector<real> visual_prediction_safe(const StageScores& s, std::array<real, 3> w) {
    if (!s.part) w[2] = 0.0;
    if (w[0] + w[1] + w[2] <= 0.0) w = {1.0, 1.0, 0.0};
    return visual_prediction(s.ori, s.obj, s.part ? &*s.part : nullptr, w);
}

// Validation grid search for the weighted-mean weights. Earliest grid triple
// wins ties, so the result is deterministic.
inline std::array<real, 3> select_visual_weights(const std::vector<StageScores>& val_scores,
                                                 const std::vector<int>& val_labels,
                                                 const std::vector<real>& grid = {0.0, 0.5, 1.0}) {
    if (val_scores.size() != val_labels.size()) throw shape_error("select_visual_weights: length mismatch");
    bool any_missing_part = false;
    for (const auto& s : val_scores)
        if (!s.part) any_missing_part = true;
    std::array<real, 3> best{1.0, 1.0, 1.0};
    real best_acc = -1.0;
    for (real w1 : grid)
        for (real w2 : grid)
            for (real w3 : grid) {
                if (w1 + w2 + w3 <= 0.0) continue;
                if (any_missing_part && w1 + w2 <= 0.0) continue;
                int correct = 0;
                for (std::size_t i = 0; i < val_scores.size(); ++i) {
                    const auto& s = val_scores[i];
                    const auto fused = visual_prediction(s.ori, s.obj, s.part ? &*s.part : nullptr, {w1, w2, w3});
                    if (argmax_score(fused) == val_labels[i]) ++correct;
                }
                const real acc = val_scores.empty() ? 0.0 : static_cast<real>(correct) / val_scores.size();
                if (acc > best_acc) {
                    best_acc = acc;
                    best = {w1, w2, w3};
                }
            }
    return best;
}

}  // namespace vtrl
