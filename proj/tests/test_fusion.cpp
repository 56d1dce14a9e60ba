#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "vtrl/checkpoint.hpp"
#include "vtrl/classifier.hpp"
#include "vtrl/fusion.hpp"
#include "vtrl/pipeline.hpp"
#include "vtrl/visual.hpp"

using namespace vtrl;
namespace fs = std::filesystem;

TEST_CASE("fuse is f_v + beta * f_t") {
    CHECK(fuse({0.2, 0.8}, {0.6, 0.4}, 2.0) == std::vector<real>{1.4, 1.6});
    CHECK(fuse({0.2, 0.8}, {0.6, 0.4}, 0.0) == std::vector<real>{0.2, 0.8});
    CHECK_THROWS_AS(fuse({0.2}, {0.6, 0.4}, 1.0), shape_error);

    SECTION("argmax invariant under adding a constant to f_t") {
        const std::vector<real> fv{0.1, 0.5, 0.4}, ft{0.3, 0.2, 0.9};
        std::vector<real> shifted = ft;
        for (auto& v : shifted) v += 7.5;
        CHECK(argmax_score(fuse(fv, ft, 2.0)) == argmax_score(fuse(fv, shifted, 2.0)));
    }
    SECTION("fuse with the zero textual vector is identity") {
        const std::vector<real> fv{0.4, 0.6};
        CHECK(fuse(fv, {0.0, 0.0}, 3.0) == fv);
    }
}

TEST_CASE("accuracy is the exact fraction") {
    CHECK(accuracy({0, 1, 1, 0}, {0, 1, 0, 0}) == 0.75);
    CHECK(accuracy({2, 2}, {2, 2}) == 1.0);
    CHECK(accuracy({0, 1}, {1, 0}) == 1.0 - accuracy({0, 1}, {0, 1}));
    CHECK_THROWS_AS(accuracy({}, {}), config_error);
    CHECK_THROWS_AS(accuracy({0}, {0, 1}), shape_error);

    SECTION("invariant under consistent permutation") {
        const std::vector<int> p{0, 1, 2, 0, 1}, y{0, 2, 2, 0, 0};
        const std::vector<int> pp{1, 0, 2, 1, 0}, yp{2, 0, 2, 0, 0};  // same pairs reordered
        CHECK(accuracy(p, y) == accuracy(pp, yp));
    }
}

TEST_CASE("select_beta picks the validation argmax, smallest on ties") {
    SECTION("singleton grid") {
        CHECK(select_beta({{1.0, 0.0}}, {{0.0, 1.0}}, {0}, {0.0}) == 0.0);
    }
    SECTION("noisy textual stream selects beta = 0") {
        // Visual is perfect; textual always votes for the wrong class.
        std::vector<std::vector<real>> fv, ft;
        std::vector<int> y;
        for (int i = 0; i < 8; ++i) {
            const int label = i % 2;
            std::vector<real> v(2, 0.0), t(2, 0.0);
            v[static_cast<std::size_t>(label)] = 1.0;
            t[static_cast<std::size_t>(1 - label)] = 5.0;
            fv.push_back(v);
            ft.push_back(t);
            y.push_back(label);
        }
        CHECK(select_beta(fv, ft, y, {0.0, 0.5, 1.0, 2.0}) == 0.0);
    }
    SECTION("complementary case selects beta > 0") {
        // Visual wrong on odd samples, textual right everywhere with margin.
        std::vector<std::vector<real>> fv, ft;
        std::vector<int> y;
        for (int i = 0; i < 8; ++i) {
            const int label = i % 2;
            std::vector<real> v(2, 0.0), t(2, 0.0);
            if (i % 2 == 1)
                v[static_cast<std::size_t>(1 - label)] = 1.0;  // visual mistake
            else
                v[static_cast<std::size_t>(label)] = 1.0;
            t[static_cast<std::size_t>(label)] = 2.0;
            fv.push_back(v);
            ft.push_back(t);
            y.push_back(label);
        }
        const real beta = select_beta(fv, ft, y, {0.0, 0.5, 1.0, 2.0});
        CHECK(beta > 0.0);
    }
    SECTION("result always lies in the grid") {
        const std::vector<real> grid{0.25, 1.25, 2.5};
        const real b = select_beta({{1.0, 0.0}}, {{0.5, 0.5}}, {0}, grid);
        CHECK(std::find(grid.begin(), grid.end(), b) != grid.end());
    }
}

TEST_CASE("visual_prediction weighted mean") {
    const std::vector<real> so{1.0, 0.0}, sb{0.0, 1.0}, sp{1.0, 0.0};

    SECTION("projection weights") {
        CHECK(visual_prediction(so, sb, &sp, {1.0, 0.0, 0.0}) == so);
    }
    SECTION("equal weights average") {
        const auto v = visual_prediction(so, sb, &sp, {1.0, 1.0, 1.0});
        CHECK(v[0] == Catch::Approx(2.0 / 3.0));
        CHECK(v[1] == Catch::Approx(1.0 / 3.0));
    }
    SECTION("argmax invariant under rescaling the weight triple") {
        const auto a = visual_prediction(so, sb, &sp, {1.0, 2.0, 0.5});
        const auto b = visual_prediction(so, sb, &sp, {2.0, 4.0, 1.0});
        CHECK(argmax_score(a) == argmax_score(b));
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == Catch::Approx(b[i]).margin(1e-12));
    }
    SECTION("missing part term renormalizes over the first two weights") {
        const auto v = visual_prediction(so, sb, nullptr, {1.0, 1.0, 5.0});
        CHECK(v[0] == Catch::Approx(0.5));
    }
    SECTION("all-zero weights rejected") {
        CHECK_THROWS_AS(visual_prediction(so, sb, &sp, {0.0, 0.0, 0.0}), config_error);
    }
    SECTION("probability vectors stay probability vectors") {
        const auto v = visual_prediction({0.3, 0.7}, {0.6, 0.4}, &sp, {1.0, 1.0, 1.0});
        real s = 0.0;
        for (real x : v) {
            CHECK(x >= 0.0);
            s += x;
        }
        CHECK(s == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("part_prediction is the mean of crop scores") {
    ClassifierConfig cfg{16, 2, 8, "part", 2};
    ConvClassifier m = ConvClassifier::create(cfg);
    std::vector<ImageGrid> crops = {ImageGrid(16, 16, {0.9, 0.1, 0.1}), ImageGrid(16, 16, {0.1, 0.1, 0.9}),
                                    ImageGrid(16, 16, {0.5, 0.5, 0.5})};
    const auto p = part_prediction(m, crops);
    std::vector<real> manual(2, 0.0);
    for (const auto& c : crops) {
        const auto s = m.predict_scores(c);
        for (int i = 0; i < 2; ++i) manual[static_cast<std::size_t>(i)] += s[static_cast<std::size_t>(i)] / 3.0;
    }
    CHECK(p[0] == Catch::Approx(manual[0]).margin(1e-12));

    SECTION("single crop is identity") {
        const auto one = part_prediction(m, {crops[0]});
        CHECK(one == m.predict_scores(crops[0]));
    }
    SECTION("permutation-invariant") {
        std::vector<ImageGrid> rev{crops[2], crops[0], crops[1]};
        const auto q = part_prediction(m, rev);
        for (int i = 0; i < 2; ++i) CHECK(p[static_cast<std::size_t>(i)] == Catch::Approx(q[static_cast<std::size_t>(i)]).margin(1e-12));
    }
    SECTION("no crops is an error") {
        CHECK_THROWS_AS(part_prediction(m, {}), config_error);
    }
}

TEST_CASE("select_visual_weights prefers informative streams") {
    // Object scores perfect, ori noisy wrong, no parts.
    std::vector<StageScores> val;
    std::vector<int> labels;
    for (int i = 0; i < 6; ++i) {
        StageScores s;
        const int y = i % 2;
        s.ori = {0.5, 0.5};
        s.ori[static_cast<std::size_t>(1 - y)] += 0.3;  // misleading
        s.obj = {0.0, 0.0};
        s.obj[static_cast<std::size_t>(y)] = 1.0;
        val.push_back(s);
        labels.push_back(y);
    }
    const auto w = select_visual_weights(val, labels, {0.0, 0.5, 1.0});
    CHECK(w[1] > 0.0);
    // Best triples zero out the misleading ori stream.
    CHECK(w[0] == 0.0);
}

TEST_CASE("classifier checkpoints round-trip") {
    ClassifierConfig cfg{16, 3, 8, "object", 77};
    ConvClassifier m = ConvClassifier::create(cfg);
    ImageGrid img(16, 16, {0.2, 0.7, 0.4});
    const auto before = m.predict_scores(img);

    const fs::path p = fs::temp_directory_path() / "vtrl_test.ckpt";
    save_classifier(p.string(), m);
    ConvClassifier back = load_classifier(p.string());
    CHECK(back.cfg.stage == "object");
    CHECK(back.predict_scores(img) == before);

    SECTION("kind mismatch and corruption rejected") {
        CHECK_THROWS_AS(load_checkpoint(p.string(), "gan"), format_error);
        std::ofstream(p, std::ios::binary) << "garbage";
        CHECK_THROWS_AS(load_classifier(p.string()), format_error);
    }
    fs::remove(p);
}

TEST_CASE("stage chain keeps parameter shapes") {
    ClassifierConfig cfg{16, 2, 8, "ori", 1};
    ConvClassifier ori = ConvClassifier::create(cfg);
    std::vector<ImageGrid> imgs{ImageGrid(16, 16, {0.9, 0.1, 0.1}), ImageGrid(16, 16, {0.1, 0.1, 0.9})};
    std::vector<const ImageGrid*> view{&imgs[0], &imgs[1]};
    const std::vector<int> labels{0, 1};

    ConvClassifier object_net = train_stage(view, labels, ori, "object", TrainConfig{5, 2, 1e-3, 3});
    ConvClassifier part_net = train_stage(view, labels, object_net, "part", TrainConfig{5, 2, 1e-3, 4});
    CHECK(object_net.cfg.stage == "object");
    CHECK(part_net.cfg.stage == "part");
    auto shape_sig = [](ConvClassifier& m) {
        std::vector<std::size_t> s;
        for (const auto& p : m.params()) s.push_back(p.n);
        return s;
    };
    CHECK(shape_sig(ori) == shape_sig(object_net));
    CHECK(shape_sig(object_net) == shape_sig(part_net));
}
