#pragma once

#include <algorithm>
#include <string>
#include <unordered_map>
#include <vector>

#include "vtrl/common.hpp"
#include "vtrl/corpus.hpp"
#include "vtrl/image.hpp"
#include "vtrl/nn.hpp"
#include "vtrl/text.hpp"

namespace vtrl {

// Token vocabulary for the encoders: every training token, id 0 reserved for
// unknowns. Distinct from the mining vocabulary, which filters by df.
struct TokenVocab {
    std::vector<std::string> tokens;  // tokens[0] == "<unk>"
    std::unordered_map<std::string, int> index;

    static TokenVocab build(const std::vector<Description>& corpus) {
        TokenVocab v;
        v.tokens.push_back("<unk>");
        for (const auto& d : corpus)
            for (const auto& t : d.tokens)
                if (v.index.emplace(t, static_cast<int>(v.tokens.size())).second) v.tokens.push_back(t);
        return v;
    }

    int size() const { return static_cast<int>(tokens.size()); }

    std::vector<int> encode(const std::vector<std::string>& toks) const {
        std::vector<int> ids;
        ids.reserve(toks.size());
        for (const auto& t : toks) {
            auto it = index.find(t);
            ids.push_back(it == index.end() ? 0 : it->second);
        }
        if (ids.empty()) ids.push_back(0);
        return ids;
    }
};

// phi: token embeddings -> temporal convolution -> recurrent layer, hidden
// states averaged over the sequence.
struct TextEncoderConfig {
    int vocab = 1;
    int emb_dim = 32;
    int dim = 64;  // hidden size == output dimension
    std::uint64_t seed = 0;
};

struct TextualEncoder {
    TextEncoderConfig cfg;
    nn::Embedding emb;
    nn::TemporalConv tconv;
    nn::LeakyRelu act{0.0};
    nn::Rnn rnn;
    int t_cache = 0;

    static TextualEncoder create(const TextEncoderConfig& cfg) {
        TextualEncoder e;
        e.cfg = cfg;
        Rng rng = make_rng(cfg.seed, "text_encoder");
        e.emb.configure(cfg.vocab, cfg.emb_dim, rng);
        e.tconv.configure(cfg.emb_dim, cfg.dim, rng);
        e.rnn.configure(cfg.dim, cfg.dim, rng);
        return e;
    }

    nn::Params params() {
        nn::Params ps;
        emb.collect(ps, "emb");
        tconv.collect(ps, "tconv");
        rnn.collect(ps, "rnn");
        return ps;
    }

    std::vector<real> forward(const std::vector<int>& ids) {
        if (ids.empty()) throw shape_error("text encoder needs >= 1 token");
        const int T = static_cast<int>(ids.size());
        t_cache = T;
        const auto h = rnn.forward(act.forward(tconv.forward(emb.forward(ids), T)), T);
        std::vector<real> out(static_cast<std::size_t>(cfg.dim), 0.0);
        for (int t = 0; t < T; ++t)
            for (int d = 0; d < cfg.dim; ++d) out[static_cast<std::size_t>(d)] += h[static_cast<std::size_t>(t) * cfg.dim + d];
        for (auto& v : out) v /= static_cast<real>(T);
        return out;
    }

    void backward(const std::vector<real>& gout) {
        const int T = t_cache;
        std::vector<real> gh(static_cast<std::size_t>(T) * cfg.dim);
        for (int t = 0; t < T; ++t)
            for (int d = 0; d < cfg.dim; ++d)
                gh[static_cast<std::size_t>(t) * cfg.dim + d] = gout[static_cast<std::size_t>(d)] / static_cast<real>(T);
        emb.backward(tconv.backward(act.backward(rnn.backward(gh))));
    }
};

// theta: conv encoder with a linear projection head.
struct VisualEncoderConfig {
    int input_size = 64;
    int dim = 64;
    std::uint64_t seed = 0;
};

struct VisualEncoder {
    VisualEncoderConfig cfg;
    nn::Conv2d c1, c2, c3, c4;
    nn::LeakyRelu a1{0.1}, a2{0.1}, a3{0.1}, a4{0.1};
    nn::GlobalAvgPool gap;
    nn::Linear proj;

    static VisualEncoder create(const VisualEncoderConfig& cfg) {
        VisualEncoder e;
        e.cfg = cfg;
        Rng rng = make_rng(cfg.seed, "visual_encoder");
        const int s = cfg.input_size;
        e.c1.configure(s, s, 3, 12, 3, 2, 1, rng);
        e.c2.configure(e.c1.out_h, e.c1.out_w, 12, 24, 3, 2, 1, rng);
        e.c3.configure(e.c2.out_h, e.c2.out_w, 24, 48, 3, 2, 1, rng);
        e.c4.configure(e.c3.out_h, e.c3.out_w, 48, 64, 3, 1, 1, rng);
        e.gap.configure(e.c4.out_h, e.c4.out_w, 64);
        e.proj.configure(64, cfg.dim, rng);
        return e;
    }

    nn::Params params() {
        nn::Params ps;
        c1.collect(ps, "c1");
        c2.collect(ps, "c2");
        c3.collect(ps, "c3");
        c4.collect(ps, "c4");
        proj.collect(ps, "proj");
        return ps;
    }

    std::vector<real> to_input(const ImageGrid& img) const {
        if (img.h == cfg.input_size && img.w == cfg.input_size) return img.data;
        return resize_bilinear(img, cfg.input_size, cfg.input_size).data;
    }

    std::vector<real> forward(const std::vector<real>& x) {
        return proj.forward(gap.forward(
            a4.forward(c4.forward(a3.forward(c3.forward(a2.forward(c2.forward(a1.forward(c1.forward(x))))))))));
    }

    void backward(const std::vector<real>& gout) {
        c1.backward(a1.backward(c2.backward(a2.backward(
            c3.backward(a3.backward(c4.backward(a4.backward(gap.backward(proj.backward(gout))))))))));
    }
};

// Eq. 10: F(v,t) = theta(v)^T phi(t).
inline real compatibility(const std::vector<real>& v_embed, const std::vector<real>& t_embed) {
    if (v_embed.size() != t_embed.size()) throw shape_error("compatibility: dimension mismatch");
    real acc = 0.0;
    for (std::size_t i = 0; i < v_embed.size(); ++i) acc += v_embed[i] * t_embed[i];
    return acc;
}

// Empirical class banks: encoded descriptions per class (T(y)) and encoded
// images per class (V(y)).
struct ClassTextBank {
    std::vector<std::vector<std::vector<real>>> by_class;  // class -> list of embeddings

    void validate() const {
        if (by_class.empty()) throw config_error("empty class bank");
        for (const auto& c : by_class)
            if (c.empty()) throw config_error("class bank has an empty class");
    }
};

using ClassImageBank = ClassTextBank;

// Eq. 8 scores: mean compatibility against each class's bank entries, summed
// then divided, in bank order. Returns (argmax class, raw score vector); ties
// go to the smallest class id.
inline std::pair<int, std::vector<real>> classify_embedding(const std::vector<real>& query,
                                                            const ClassTextBank& bank) {
    bank.validate();
    std::vector<real> scores;
    scores.reserve(bank.by_class.size());
    for (const auto& entries : bank.by_class) {
        real acc = 0.0;
        for (const auto& e : entries) acc += compatibility(query, e);
        scores.push_back(acc / static_cast<real>(entries.size()));
    }
    int best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    return {best, scores};
}

// Eq. 7 diagnostic: mean 0-1 loss of the visual classifier plus the textual
// classifier; range [0, 2].
inline real joint_empirical_risk(const std::vector<int>& image_preds, const std::vector<int>& text_preds,
                                 const std::vector<int>& labels) {
    if (image_preds.size() != labels.size() || text_preds.size() != labels.size())
        throw shape_error("joint_empirical_risk: length mismatch");
    if (labels.empty()) throw shape_error("joint_empirical_risk: empty inputs");
    real acc = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        acc += (image_preds[i] != labels[i] ? 1.0 : 0.0);
        acc += (text_preds[i] != labels[i] ? 1.0 : 0.0);
    }
    return acc / static_cast<real>(labels.size());
}

// ---------------------------------------------------------------------------
// Training: symmetric softmax surrogate of the empirical risk over per-class
// mean compatibilities, batch-local banks, stratified batches.
// ---------------------------------------------------------------------------

struct JointConfig {
    int steps = 400;
    int per_class = 4;
    real lr = 1e-3;
    int dim = 64;
    int emb_dim = 32;
    int input_size = 64;
    std::uint64_t seed = 0;
};

struct JointModel {
    VisualEncoder theta;
    TextualEncoder phi;
    TokenVocab vocab;

    std::vector<real> embed_image(const ImageGrid& img) { return theta.forward(theta.to_input(img)); }
    std::vector<real> embed_tokens(const std::vector<std::string>& toks) {
        return phi.forward(vocab.encode(toks));
    }
};

struct JointBatchSample {
    const ImageGrid* image;
    const Description* description;
    int label;
};

// Loss and gradients for one stratified batch. Exposed separately so the
// gradient check can drive it on a frozen batch.
inline real joint_surrogate_batch(JointModel& m, const std::vector<JointBatchSample>& batch,
                                  int n_classes, bool with_grad) {
    const int B = static_cast<int>(batch.size());
    const int D = m.theta.cfg.dim;
    std::vector<std::vector<real>> v(B), t(B);
    std::vector<std::vector<int>> members(static_cast<std::size_t>(n_classes));
    for (int i = 0; i < B; ++i) {
        v[static_cast<std::size_t>(i)] = m.theta.forward(m.theta.to_input(*batch[static_cast<std::size_t>(i)].image));
        t[static_cast<std::size_t>(i)] = m.phi.forward(m.vocab.encode(batch[static_cast<std::size_t>(i)].description->tokens));
        members[static_cast<std::size_t>(batch[static_cast<std::size_t>(i)].label)].push_back(i);
    }
    for (int c = 0; c < n_classes; ++c)
        if (members[static_cast<std::size_t>(c)].empty())
            throw config_error("joint batch must cover every class");

    std::vector<std::vector<real>> gv(B, std::vector<real>(static_cast<std::size_t>(D), 0.0));
    std::vector<std::vector<real>> gt(B, std::vector<real>(static_cast<std::size_t>(D), 0.0));
    real loss = 0.0;
    const real inv_b = 1.0 / static_cast<real>(B);

    // Visual direction: image i against per-class mean text embeddings.
    for (int i = 0; i < B; ++i) {
        std::vector<real> s(static_cast<std::size_t>(n_classes), 0.0);
        for (int c = 0; c < n_classes; ++c) {
            real acc = 0.0;
            for (int j : members[static_cast<std::size_t>(c)]) acc += compatibility(v[static_cast<std::size_t>(i)], t[static_cast<std::size_t>(j)]);
            s[static_cast<std::size_t>(c)] = acc / static_cast<real>(members[static_cast<std::size_t>(c)].size());
        }
        std::vector<real> gs;
        loss += inv_b * nn::softmax_xent(s, batch[static_cast<std::size_t>(i)].label, gs);
        if (!with_grad) continue;
        for (int c = 0; c < n_classes; ++c) {
            const real g = inv_b * gs[static_cast<std::size_t>(c)] / static_cast<real>(members[static_cast<std::size_t>(c)].size());
            for (int j : members[static_cast<std::size_t>(c)])
                for (int d = 0; d < D; ++d) {
                    gv[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] += g * t[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)];
                    gt[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)] += g * v[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
                }
        }
    }
    // Textual direction: text j against per-class mean image embeddings.
    for (int j = 0; j < B; ++j) {
        std::vector<real> s(static_cast<std::size_t>(n_classes), 0.0);
        for (int c = 0; c < n_classes; ++c) {
            real acc = 0.0;
            for (int i : members[static_cast<std::size_t>(c)]) acc += compatibility(v[static_cast<std::size_t>(i)], t[static_cast<std::size_t>(j)]);
            s[static_cast<std::size_t>(c)] = acc / static_cast<real>(members[static_cast<std::size_t>(c)].size());
        }
        std::vector<real> gs;
        loss += inv_b * nn::softmax_xent(s, batch[static_cast<std::size_t>(j)].label, gs);
        if (!with_grad) continue;
        for (int c = 0; c < n_classes; ++c) {
            const real g = inv_b * gs[static_cast<std::size_t>(c)] / static_cast<real>(members[static_cast<std::size_t>(c)].size());
            for (int i : members[static_cast<std::size_t>(c)])
                for (int d = 0; d < D; ++d) {
                    gt[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)] += g * v[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
                    gv[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] += g * t[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)];
                }
        }
    }

    if (with_grad) {
        // Encoder caches are per-sample; re-run forward right before each backward.
        for (int i = 0; i < B; ++i) {
            m.theta.forward(m.theta.to_input(*batch[static_cast<std::size_t>(i)].image));
            m.theta.backward(gv[static_cast<std::size_t>(i)]);
            m.phi.forward(m.vocab.encode(batch[static_cast<std::size_t>(i)].description->tokens));
            m.phi.backward(gt[static_cast<std::size_t>(i)]);
        }
    }
    return loss;
}

inline std::vector<JointBatchSample> sample_joint_batch(const Dataset& ds, const std::vector<int>& view,
                                                        int per_class, Rng& rng) {
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(ds.n_classes()));
    for (int idx : view) by_class[static_cast<std::size_t>(ds.images[static_cast<std::size_t>(idx)].class_id)].push_back(idx);
    std::vector<JointBatchSample> batch;
    for (int c = 0; c < ds.n_classes(); ++c) {
        const auto& pool = by_class[static_cast<std::size_t>(c)];
        if (pool.empty()) throw config_error("class missing from training split: " + std::to_string(c));
        for (int k = 0; k < per_class; ++k) {
            const auto& im = ds.images[static_cast<std::size_t>(pool[static_cast<std::size_t>(
                std::uniform_int_distribution<int>(0, static_cast<int>(pool.size()) - 1)(rng))])];
            const auto& d = im.descriptions[static_cast<std::size_t>(
                std::uniform_int_distribution<int>(0, static_cast<int>(im.descriptions.size()) - 1)(rng))];
            batch.push_back(JointBatchSample{&im.image, &d, im.class_id});
        }
    }
    return batch;
}

inline std::vector<real> train_joint_embedding(JointModel& m, const Dataset& ds,
                                               const std::vector<int>& train_view, const JointConfig& jc) {
    auto ps_theta = m.theta.params();
    auto ps_phi = m.phi.params();
    nn::Params ps = ps_theta;
    ps.insert(ps.end(), ps_phi.begin(), ps_phi.end());
    nn::Adam opt(nn::AdamConfig{jc.lr, 0.9, 0.999, 1e-8});
    opt.attach(ps);
    Rng rng = make_rng(jc.seed, "train:joint");
    std::vector<real> history;
    history.reserve(static_cast<std::size_t>(jc.steps));
    for (int step = 0; step < jc.steps; ++step) {
        const auto batch = sample_joint_batch(ds, train_view, jc.per_class, rng);
        nn::zero_grads(ps);
        const real loss = joint_surrogate_batch(m, batch, ds.n_classes(), true);
        if (!std::isfinite(loss)) throw train_error("joint embedding loss diverged at step " + std::to_string(step));
        opt.step(ps);
        history.push_back(loss);
    }
    return history;
}

// Build T(y) / V(y) banks from a view of the dataset.
inline ClassTextBank build_text_bank(JointModel& m, const Dataset& ds, const std::vector<int>& view) {
    ClassTextBank bank;
    bank.by_class.resize(static_cast<std::size_t>(ds.n_classes()));
    for (int idx : view) {
        const auto& im = ds.images[static_cast<std::size_t>(idx)];
        for (const auto& d : im.descriptions)
            bank.by_class[static_cast<std::size_t>(im.class_id)].push_back(m.embed_tokens(d.tokens));
    }
    bank.validate();
    return bank;
}

inline ClassImageBank build_image_bank(JointModel& m, const Dataset& ds, const std::vector<int>& view) {
    ClassImageBank bank;
    bank.by_class.resize(static_cast<std::size_t>(ds.n_classes()));
    for (int idx : view) {
        const auto& im = ds.images[static_cast<std::size_t>(idx)];
        bank.by_class[static_cast<std::size_t>(im.class_id)].push_back(m.embed_image(im.image));
    }
    bank.validate();
    return bank;
}

}  // namespace vtrl
