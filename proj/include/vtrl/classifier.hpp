#pragma once

#include <string>
#include <vector>

#include "vtrl/common.hpp"
#include "vtrl/image.hpp"
#include "vtrl/nn.hpp"

namespace vtrl {

// Small conv encoder ending in K feature maps, then global average pooling and
// a bias-free linear head. The bias-free head makes the activation-map path
// and the classification path agree exactly: sum over an activation map equals
// (h*w) times that class's logit.
struct ClassifierConfig {
    int input_size = 64;
    int n_classes = 2;
    int feat_channels = 64;
    std::string stage = "ori";  // ori | object | part
    std::uint64_t seed = 0;
};

struct ConvClassifier {
    ClassifierConfig cfg;
    nn::Conv2d c1, c2, c3, c4;
    nn::LeakyRelu a1{0.1}, a2{0.1}, a3{0.1}, a4{0.1};
    nn::GlobalAvgPool gap;
    nn::Linear head;

    static ConvClassifier create(const ClassifierConfig& cfg) {
        ConvClassifier m;
        m.cfg = cfg;
        Rng rng = make_rng(cfg.seed, "classifier:" + cfg.stage);
        const int s = cfg.input_size;
        m.c1.configure(s, s, 3, 12, 3, 2, 1, rng);
        m.c2.configure(m.c1.out_h, m.c1.out_w, 12, 24, 3, 2, 1, rng);
        m.c3.configure(m.c2.out_h, m.c2.out_w, 24, 48, 3, 2, 1, rng);
        m.c4.configure(m.c3.out_h, m.c3.out_w, 48, cfg.feat_channels, 3, 1, 1, rng);
        m.gap.configure(m.c4.out_h, m.c4.out_w, cfg.feat_channels);
        m.head.configure(cfg.feat_channels, cfg.n_classes, rng, /*bias=*/false);
        return m;
    }

    int feat_h() const { return c4.out_h; }
    int feat_w() const { return c4.out_w; }

    nn::Params params() {
        nn::Params ps;
        c1.collect(ps, "c1");
        c2.collect(ps, "c2");
        c3.collect(ps, "c3");
        c4.collect(ps, "c4");
        head.collect(ps, "head");
        return ps;
    }

    std::vector<real> to_input(const ImageGrid& img) const {
        if (img.h == cfg.input_size && img.w == cfg.input_size) return img.data;
        return resize_bilinear(img, cfg.input_size, cfg.input_size).data;
    }

    // Last-conv activations f_k(x,y), laid out h*w*K.
    const std::vector<real>& feature_maps(const std::vector<real>& x) {
        return a4.forward(c4.forward(a3.forward(c3.forward(a2.forward(c2.forward(a1.forward(c1.forward(x))))))));
    }

    std::vector<real> logits(const std::vector<real>& x) {
        return head.forward(gap.forward(feature_maps(x)));
    }

    void backward_from_logits(const std::vector<real>& glogits) {
        c1.backward(a1.backward(c2.backward(a2.backward(
            c3.backward(a3.backward(c4.backward(a4.backward(gap.backward(head.backward(glogits))))))))));
    }

    std::vector<real> predict_scores(const ImageGrid& img) {
        return nn::softmax(logits(to_input(img)));
    }
    int predict_class(const ImageGrid& img) {
        const auto s = predict_scores(img);
        int best = 0;
        for (std::size_t i = 1; i < s.size(); ++i)
            if (s[i] > s[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
        return best;
    }
};

struct TrainConfig {
    int steps = 600;
    int batch = 16;
    real lr = 1e-3;
    std::uint64_t seed = 0;
};

// Minibatch cross-entropy training over a fixed view of (image, label) pairs.
// Inputs are pre-resized once; sampling and updates are fully deterministic.
inline std::vector<real> train_classifier(ConvClassifier& model, const std::vector<const ImageGrid*>& images,
                                          const std::vector<int>& labels, const TrainConfig& tc) {
    if (images.empty()) throw config_error("train_classifier: empty dataset view");
    if (images.size() != labels.size()) throw shape_error("images/labels length mismatch");
    std::vector<std::vector<real>> inputs;
    inputs.reserve(images.size());
    for (const auto* im : images) inputs.push_back(model.to_input(*im));

    nn::Adam opt(nn::AdamConfig{tc.lr, 0.9, 0.999, 1e-8});
    auto ps = model.params();
    opt.attach(ps);
    Rng rng = make_rng(tc.seed, "train:" + model.cfg.stage);
    std::uniform_int_distribution<std::size_t> pick(0, inputs.size() - 1);

    std::vector<real> history;
    history.reserve(static_cast<std::size_t>(tc.steps));
    for (int step = 0; step < tc.steps; ++step) {
        nn::zero_grads(ps);
        real loss = 0.0;
        for (int b = 0; b < tc.batch; ++b) {
            const std::size_t i = pick(rng);
            std::vector<real> glogits;
            loss += nn::softmax_xent(model.logits(inputs[i]), labels[i], glogits);
            for (auto& g : glogits) g /= static_cast<real>(tc.batch);
            model.backward_from_logits(glogits);
        }
        loss /= static_cast<real>(tc.batch);
        if (!std::isfinite(loss)) throw train_error("classifier loss diverged at step " + std::to_string(step));
        opt.step(ps);
        history.push_back(loss);
    }
    return history;
}

}  // namespace vtrl
