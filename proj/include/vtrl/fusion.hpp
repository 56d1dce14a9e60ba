#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtrl/common.hpp"
#include "vtrl/visual.hpp"

namespace vtrl {

// Final prediction: f(I) = f_v + beta * f_t, elementwise.
inline std::vector<real> fuse(const std::vector<real>& f_v, const std::vector<real>& f_t, real beta) {
    if (f_v.size() != f_t.size()) throw shape_error("fuse: score length mismatch");
    std::vector<real> out(f_v.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f_v[i] + beta * f_t[i];
    return out;
}

inline real accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) throw shape_error("accuracy: length mismatch");
    if (labels.empty()) throw config_error("accuracy undefined on empty test set");
    long long correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (predictions[i] == labels[i]) ++correct;
    return static_cast<real>(correct) / static_cast<real>(labels.size());
}

// Grid search for beta on validation scores; smallest beta wins ties.
inline real select_beta(const std::vector<std::vector<real>>& val_scores_v,
                        const std::vector<std::vector<real>>& val_scores_t,
                        const std::vector<int>& val_labels, std::vector<real> grid) {
    if (grid.empty()) throw config_error("select_beta: empty grid");
    if (val_scores_v.size() != val_labels.size() || val_scores_t.size() != val_labels.size())
        throw shape_error("select_beta: length mismatch");
    std::sort(grid.begin(), grid.end());
    real best_beta = grid.front();
    real best_acc = -1.0;
    for (real beta : grid) {
        int correct = 0;
        for (std::size_t i = 0; i < val_labels.size(); ++i)
            if (argmax_score(fuse(val_scores_v[i], val_scores_t[i], beta)) == val_labels[i]) ++correct;
        const real acc = val_labels.empty() ? 0.0 : static_cast<real>(correct) / val_labels.size();
        if (acc > best_acc) {
            best_acc = acc;
            best_beta = beta;
        }
    }
    return best_beta;
}

struct FusionConfig {
    real beta = 2.0;
    std::vector<real> beta_grid = {0.0, 0.5, 1.0, 1.5, 2.0, 3.0};

    void validate() const {
        if (beta < 0.0) throw config_error("beta must be >= 0");
    }
};

struct EvalReport {
    long long r = 0;    // test-set size
    long long r_a = 0;  // correctly classified
    real fused_accuracy = 0.0;
    real visual_accuracy = 0.0;
    real textual_accuracy = 0.0;
    std::map<std::string, real> ablations;  // row name -> fused accuracy
    std::vector<real> per_class_accuracy;
    std::vector<std::vector<long long>> confusion;  // [label][prediction]
    real beta = 2.0;
    std::array<real, 3> visual_weights{1.0, 1.0, 1.0};

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["R"] = r;
        j["R_a"] = r_a;
        j["accuracy"] = fused_accuracy;
        j["visual_accuracy"] = visual_accuracy;
        j["textual_accuracy"] = textual_accuracy;
        j["per_class_accuracy"] = per_class_accuracy;
        j["confusion"] = confusion;
        j["beta"] = beta;
        j["visual_weights"] = visual_weights;
        j["ablations"] = ablations;
        return j;
    }
    static EvalReport from_json(const nlohmann::json& j) {
        EvalReport r;
        r.r = j.at("R").get<long long>();
        r.r_a = j.at("R_a").get<long long>();
        r.fused_accuracy = j.at("accuracy").get<real>();
        r.visual_accuracy = j.at("visual_accuracy").get<real>();
        r.textual_accuracy = j.at("textual_accuracy").get<real>();
        r.per_class_accuracy = j.at("per_class_accuracy").get<std::vector<real>>();
        r.confusion = j.at("confusion").get<std::vector<std::vector<long long>>>();
        r.beta = j.at("beta").get<real>();
        const auto w = j.at("visual_weights").get<std::vector<real>>();
        r.visual_weights = {w.at(0), w.at(1), w.at(2)};
        r.ablations = j.at("ablations").get<std::map<std::string, real>>();
        return r;
    }
};

}  // namespace vtrl
