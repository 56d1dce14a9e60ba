#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vtrl/common.hpp"
#include "vtrl/corpus.hpp"
#include "vtrl/image.hpp"
#include "vtrl/mining.hpp"
#include "vtrl/nn.hpp"
#include "vtrl/proposals.hpp"

namespace vtrl {

// Matching-aware conditional GAN. The generator exists only to train the
// discriminator; the discriminator scores (image crop, text embedding) pairs.
// Text embeddings come from the pre-trained textual encoder and stay frozen.
struct GanConfig {
    int image_size = 32;  // r; must be a multiple of 8
    int d_z = 16;
    int d_text = 64;
    int text_proj = 16;
    int steps = 1200;
    int batch = 16;
    real lr = 2e-4;
    real beta1 = 0.5;  // GAN-CLS momentum setting
    real beta2 = 0.999;
    // Fraction of real-image terms replaced by a random window crop. Full
    // images alone give the discriminator only scene-level text correlation;
    // crop views are what make part-proposal scoring meaningful.
    real real_crop_prob = 0.5;
    std::uint64_t seed = 0;

    int base() const { return image_size / 8; }
};

struct Generator {
    GanConfig cfg;
    nn::Linear tproj;
    nn::LeakyRelu tact{0.2};
    nn::Linear fc;
    nn::LeakyRelu fact{0.0};
    nn::UpsampleNearest2x u1, u2, u3;
    nn::Conv2d g1, g2, g3;
    nn::LeakyRelu r1{0.0}, r2{0.0};
    nn::SigmoidLayer out;

    static Generator create(const GanConfig& cfg, Rng& rng) {
        Generator g;
        g.cfg = cfg;
        const int b = cfg.base();
        g.tproj.configure(cfg.d_text, cfg.text_proj, rng);
        g.fc.configure(cfg.d_z + cfg.text_proj, b * b * 64, rng);
        g.u1.configure(b, b, 64);
        g.g1.configure(2 * b, 2 * b, 64, 32, 3, 1, 1, rng);
        g.u2.configure(2 * b, 2 * b, 32);
        g.g2.configure(4 * b, 4 * b, 32, 16, 3, 1, 1, rng);
        g.u3.configure(4 * b, 4 * b, 16);
        g.g3.configure(8 * b, 8 * b, 16, 3, 3, 1, 1, rng);
        return g;
    }

    nn::Params params() {
        nn::Params ps;
        tproj.collect(ps, "g.tproj");
        fc.collect(ps, "g.fc");
        g1.collect(ps, "g.c1");
        g2.collect(ps, "g.c2");
        g3.collect(ps, "g.c3");
        return ps;
    }

    // z + projected text -> image in [0,1] per channel.
    std::vector<real> forward(const std::vector<real>& z, const std::vector<real>& temb) {
        const auto& tp = tact.forward(tproj.forward(temb));
        std::vector<real> zin = z;
        zin.insert(zin.end(), tp.begin(), tp.end());
        const auto& h0 = fact.forward(fc.forward(zin));
        const auto& h1 = r1.forward(g1.forward(u1.forward(h0)));
        const auto& h2 = r2.forward(g2.forward(u2.forward(h1)));
        return out.forward(g3.forward(u3.forward(h2)));
    }

    void backward(const std::vector<real>& gimg) {
        const auto gfc = fc.backward(fact.backward(u1.backward(g1.backward(
            r1.backward(u2.backward(g2.backward(r2.backward(u3.backward(g3.backward(out.backward(gimg)))))))))));
        std::vector<real> gtp(gfc.begin() + cfg.d_z, gfc.end());
        tproj.backward(tact.backward(gtp));
    }
};

struct Discriminator {
    GanConfig cfg;
    nn::Conv2d d1, d2, d3, d4;
    nn::LeakyRelu l1{0.2}, l2{0.2}, l3{0.2}, l4{0.2}, lt{0.2};
    nn::Linear tproj, head;
    std::vector<real> concat_cache;

    static Discriminator create(const GanConfig& cfg, Rng& rng) {
        Discriminator d;
        d.cfg = cfg;
        const int r = cfg.image_size, b = cfg.base();
        d.d1.configure(r, r, 3, 16, 3, 2, 1, rng);
        d.d2.configure(r / 2, r / 2, 16, 32, 3, 2, 1, rng);
        d.d3.configure(r / 4, r / 4, 32, 64, 3, 2, 1, rng);
        d.tproj.configure(cfg.d_text, cfg.text_proj, rng);
        d.d4.configure(b, b, 64 + cfg.text_proj, 64, 3, 1, 1, rng);
        d.head.configure(b * b * 64, 1, rng);
        return d;
    }

    nn::Params params() {
        nn::Params ps;
        d1.collect(ps, "d.c1");
        d2.collect(ps, "d.c2");
        d3.collect(ps, "d.c3");
        tproj.collect(ps, "d.tproj");
        d4.collect(ps, "d.c4");
        head.collect(ps, "d.head");
        return ps;
    }

    // Image pathway to base x base x 64, text projection replicated spatially
    // and concatenated on channels (GAN-CLS conditioning), then conv + linear.
    real forward_logit(const std::vector<real>& img, const std::vector<real>& temb) {
        if (static_cast<int>(temb.size()) != cfg.d_text) throw shape_error("discriminator: embedding dimension mismatch");
        const auto& h3 = l3.forward(d3.forward(l2.forward(d2.forward(l1.forward(d1.forward(img))))));
        const auto& tp = lt.forward(tproj.forward(temb));
        const int b = cfg.base(), ic = 64 + cfg.text_proj;
        concat_cache.assign(static_cast<std::size_t>(b) * b * ic, 0.0);
        for (int i = 0; i < b * b; ++i) {
            for (int c = 0; c < 64; ++c)
                concat_cache[static_cast<std::size_t>(i) * ic + c] = h3[static_cast<std::size_t>(i) * 64 + c];
            for (int c = 0; c < cfg.text_proj; ++c)
                concat_cache[static_cast<std::size_t>(i) * ic + 64 + c] = tp[static_cast<std::size_t>(c)];
        }
        return head.forward(l4.forward(d4.forward(concat_cache)))[0];
    }

    // Returns d loss / d image; parameter grads accumulate.
    std::vector<real> backward(real glogit) {
        const auto gcc = d4.backward(l4.backward(head.backward({glogit})));
        const int b = cfg.base(), ic = 64 + cfg.text_proj;
        std::vector<real> gh3(static_cast<std::size_t>(b) * b * 64);
        std::vector<real> gtp(static_cast<std::size_t>(cfg.text_proj), 0.0);
        for (int i = 0; i < b * b; ++i) {
            for (int c = 0; c < 64; ++c)
                gh3[static_cast<std::size_t>(i) * 64 + c] = gcc[static_cast<std::size_t>(i) * ic + c];
            for (int c = 0; c < cfg.text_proj; ++c)
                gtp[static_cast<std::size_t>(c)] += gcc[static_cast<std::size_t>(i) * ic + 64 + c];
        }
        tproj.backward(lt.backward(gtp));
        return d1.backward(l1.backward(d2.backward(l2.backward(d3.backward(l3.backward(gh3))))));
    }
};

struct GanModel {
    GanConfig cfg;
    Generator gen;
    Discriminator dis;

    static GanModel create(const GanConfig& cfg) {
        GanModel m;
        m.cfg = cfg;
        Rng rng = make_rng(cfg.seed, "gan");
        m.gen = Generator::create(cfg, rng);
        m.dis = Discriminator::create(cfg, rng);
        return m;
    }

    std::vector<real> to_input(const ImageGrid& img) const {
        if (img.h == cfg.image_size && img.w == cfg.image_size) return img.data;
        return resize_bilinear(img, cfg.image_size, cfg.image_size).data;
    }
};

inline real discriminator_score(GanModel& gan, const ImageGrid& image_crop, const std::vector<real>& embedding) {
    return nn::sigmoid(gan.dis.forward_logit(gan.to_input(image_crop), embedding));
}

struct GanTrainResult {
    std::vector<real> d_loss, g_loss;
};

// One text-embedding set per training image (all descriptions pre-encoded).
struct GanTrainingText {
    std::vector<std::vector<std::vector<real>>> by_image;  // aligned with image view
    std::vector<int> labels;
};

// Alternating GAN-CLS updates with the three-term discriminator batch:
// (real, matching text) -> 1, (real, mismatching text) -> 0 at half weight,
// (fake, matching text) -> 0 at half weight.
inline GanTrainResult train_gan(GanModel& gan, const std::vector<const ImageGrid*>& images,
                                const GanTrainingText& text, const GanConfig& cfg) {
    if (images.empty()) throw config_error("train_gan: no training images");
    if (images.size() != text.by_image.size() || images.size() != text.labels.size())
        throw shape_error("train_gan: images/text size mismatch");

    std::vector<std::vector<real>> inputs;
    inputs.reserve(images.size());
    for (const auto* im : images) inputs.push_back(gan.to_input(*im));

    // Index images by class for mismatch sampling, uniform over other classes.
    int n_classes = 0;
    for (int l : text.labels) n_classes = std::max(n_classes, l + 1);
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < text.labels.size(); ++i)
        by_class[static_cast<std::size_t>(text.labels[i])].push_back(static_cast<int>(i));

    auto ps_d = gan.dis.params();
    auto ps_g = gan.gen.params();
    nn::Adam opt_d(nn::AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, 1e-8});
    nn::Adam opt_g(nn::AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, 1e-8});
    opt_d.attach(ps_d);
    opt_g.attach(ps_g);

    Rng rng = make_rng(cfg.seed, "train:gan");
    std::uniform_int_distribution<int> pick_img(0, static_cast<int>(images.size()) - 1);
    std::normal_distribution<real> noise(0.0, 1.0);

    auto pick_text = [&](int img_idx) -> const std::vector<real>& {
        const auto& list = text.by_image[static_cast<std::size_t>(img_idx)];
        return list[static_cast<std::size_t>(std::uniform_int_distribution<int>(0, static_cast<int>(list.size()) - 1)(rng))];
    };
    auto pick_mismatch = [&](int label) -> const std::vector<real>& {
        std::uniform_int_distribution<int> pick_cls(0, n_classes - 2);
        int c = pick_cls(rng);
        if (c >= label) ++c;
        const auto& pool = by_class[static_cast<std::size_t>(c)];
        if (pool.empty()) throw config_error("train_gan: class without images for mismatch sampling");
        const int j = pool[static_cast<std::size_t>(std::uniform_int_distribution<int>(0, static_cast<int>(pool.size()) - 1)(rng))];
        return pick_text(j);
    };
    auto draw_z = [&]() {
        std::vector<real> z(static_cast<std::size_t>(cfg.d_z));
        for (auto& v : z) v = noise(rng);
        return z;
    };
    // Real-term view: the full image, or a random window crop resized to r.
    auto real_view = [&](int i) -> std::vector<real> {
        if (std::uniform_real_distribution<real>(0.0, 1.0)(rng) >= cfg.real_crop_prob)
            return inputs[static_cast<std::size_t>(i)];
        const ImageGrid& im = *images[static_cast<std::size_t>(i)];
        const int max_side = std::min(im.h, im.w);
        const int lo = std::max(8, max_side / 4);
        const int hi = std::max(lo, max_side * 3 / 4);
        const int side = std::uniform_int_distribution<int>(lo, hi)(rng);
        const int x = std::uniform_int_distribution<int>(0, im.w - side)(rng);
        const int y = std::uniform_int_distribution<int>(0, im.h - side)(rng);
        return gan.to_input(crop(im, RegionBox{x, y, x + side, y + side}));
    };

    GanTrainResult result;
    const real inv_b = 1.0 / static_cast<real>(cfg.batch);
    for (int step = 0; step < cfg.steps; ++step) {
        // Discriminator phase.
        nn::zero_grads(ps_d);
        real d_loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const int i = pick_img(rng);
            const auto& t_match = pick_text(i);
            const auto& t_mis = pick_mismatch(text.labels[static_cast<std::size_t>(i)]);
            const auto view = real_view(i);
            real gl;
            d_loss += inv_b * nn::bce_logit(gan.dis.forward_logit(view, t_match), 1.0, gl);
            gan.dis.backward(gl * inv_b);
            d_loss += 0.5 * inv_b * nn::bce_logit(gan.dis.forward_logit(view, t_mis), 0.0, gl);
            gan.dis.backward(0.5 * gl * inv_b);
            const auto fake = gan.gen.forward(draw_z(), t_match);
            d_loss += 0.5 * inv_b * nn::bce_logit(gan.dis.forward_logit(fake, t_match), 0.0, gl);
            gan.dis.backward(0.5 * gl * inv_b);
        }
        if (!std::isfinite(d_loss)) throw train_error("GAN discriminator loss diverged at step " + std::to_string(step));
        opt_d.step(ps_d);

        // Generator phase. Discriminator grads accumulate here too but are
        // zeroed before the next discriminator phase.
        nn::zero_grads(ps_g);
        nn::zero_grads(ps_d);
        real g_loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const int i = pick_img(rng);
            const auto& t_match = pick_text(i);
            const auto fake = gan.gen.forward(draw_z(), t_match);
            real gl;
            g_loss += inv_b * nn::bce_logit(gan.dis.forward_logit(fake, t_match), 1.0, gl);
            const auto gimg = gan.dis.backward(gl * inv_b);
            gan.gen.backward(gimg);
        }
        if (!std::isfinite(g_loss)) throw train_error("GAN generator loss diverged at step " + std::to_string(step));
        opt_g.step(ps_g);

        result.d_loss.push_back(d_loss);
        result.g_loss.push_back(g_loss);
    }
    return result;
}

struct PatternMatch {
    TextualPattern pattern;
    RegionBox box;
    real score = 0.0;
};

// For each textual pattern, the argmax proposal under the discriminator score,
// ties broken by canonical proposal order. One match per pattern.
template <typename EmbedFn>
std::vector<PatternMatch> match_patterns(GanModel& gan, const ImageGrid& image, const ProposalSet& proposals,
                                         const std::vector<TextualPattern>& patterns, EmbedFn&& embed_pattern) {
    if (proposals.boxes.empty()) throw config_error("match_patterns: empty proposal set");
    std::vector<PatternMatch> out;
    out.reserve(patterns.size());
    for (const auto& p : patterns) {
        const std::vector<real> temb = embed_pattern(p);
        PatternMatch best;
        best.pattern = p;
        best.score = -1.0;
        for (const auto& box : proposals.boxes) {
            const real s = discriminator_score(gan, crop(image, box), temb);
            if (s > best.score) {
                best.score = s;
                best.box = box;
            }
        }
        out.push_back(std::move(best));
    }
    return out;
}

}  // namespace vtrl
