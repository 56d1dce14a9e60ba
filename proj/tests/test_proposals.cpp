#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "vtrl/proposals.hpp"

using namespace vtrl;
namespace fs = std::filesystem;

TEST_CASE("sliding-window counts match the window arithmetic") {
    const ImageGrid img(64, 64);
    ProposalConfig cfg;
    cfg.scales = {16, 32};
    cfg.strides = {8};

    const ProposalSet ps = generate_proposals(img, cfg, "img0");
    // ((64-16)/8+1)^2 + ((64-32)/8+1)^2 = 49 + 25.
    CHECK(ps.boxes.size() == 74);
    CHECK(ps.image_id == "img0");

    SECTION("canonical order is scale-major, row-major") {
        CHECK(ps.boxes[0] == RegionBox{0, 0, 16, 16});
        CHECK(ps.boxes[1] == RegionBox{8, 0, 24, 16});
        CHECK(ps.boxes[7] == RegionBox{0, 8, 16, 24});
        CHECK(ps.boxes[49] == RegionBox{0, 0, 32, 32});
    }
    SECTION("cap truncates in canonical order") {
        ProposalConfig c2 = cfg;
        c2.cap = 10;
        const ProposalSet small = generate_proposals(img, c2);
        REQUIRE(small.boxes.size() == 10);
        for (int i = 0; i < 10; ++i) CHECK(small.boxes[static_cast<std::size_t>(i)] == ps.boxes[static_cast<std::size_t>(i)]);
    }
    SECTION("pure function of dimensions and config") {
        ImageGrid with_content(64, 64, {0.7, 0.1, 0.4});
        const ProposalSet again = generate_proposals(with_content, cfg, "img0");
        CHECK(again.boxes == ps.boxes);
    }
    SECTION("bad configs rejected") {
        CHECK_THROWS_AS(generate_proposals(img, ProposalConfig{{}, {8}, 100}), config_error);
        CHECK_THROWS_AS(generate_proposals(img, ProposalConfig{{128}, {8}, 100}), config_error);
        CHECK_THROWS_AS(generate_proposals(img, ProposalConfig{{16}, {8}, 0}), config_error);
    }
    SECTION("all boxes satisfy invariants") {
        for (const auto& b : ps.boxes) {
            CHECK(b.valid());
            CHECK(b.x1 <= 64);
            CHECK(b.y1 <= 64);
            CHECK(b.area() >= 16);
        }
    }
}

TEST_CASE("proposal import validates, clips, dedupes and caps") {
    const fs::path p = fs::temp_directory_path() / "vtrl_props.txt";
    {
        std::ofstream out(p);
        for (int i = 0; i < 1200; ++i) out << "imgA " << (i % 50) << " " << (i / 50) * 2 << " "
                                           << (i % 50) + 8 << " " << (i / 50) * 2 + 8 << "\n";
    }
    SECTION("1200 valid rows, cap 1000") {
        const ProposalSet ps = import_proposals(p.string(), "imgA", 512, 512, 1000);
        CHECK(ps.boxes.size() == 1000);
    }
    SECTION("clipping to bounds") {
        { std::ofstream out(p); out << "imgA 60 60 80 80\n"; }
        const ProposalSet ps = import_proposals(p.string(), "imgA", 64, 64);
        REQUIRE(ps.boxes.size() == 1);
        CHECK(ps.boxes[0] == RegionBox{60, 60, 64, 64});
    }
    SECTION("duplicates collapse") {
        { std::ofstream out(p); out << "imgA 0 0 8 8\nimgA 0 0 8 8\nimgA 8 8 16 16\n"; }
        const ProposalSet ps = import_proposals(p.string(), "imgA", 64, 64);
        CHECK(ps.boxes.size() == 2);
    }
    SECTION("other image ids ignored") {
        { std::ofstream out(p); out << "imgB 0 0 8 8\nimgA 8 8 16 16\n"; }
        const ProposalSet ps = import_proposals(p.string(), "imgA", 64, 64);
        CHECK(ps.boxes.size() == 1);
    }
    SECTION("malformed line reports its number") {
        { std::ofstream out(p); out << "imgA 0 0 8 8\nimgA zero 0 8\n"; }
        try {
            import_proposals(p.string(), "imgA", 64, 64);
            FAIL("expected format_error");
        } catch (const format_error& e) {
            CHECK(std::string(e.what()).find(":2") != std::string::npos);
        }
    }
    fs::remove(p);
}

TEST_CASE("filter_proposals keeps the top-k by class score") {
    ImageGrid img(32, 32, {0.0, 0.0, 0.0});
    img.fill_rect(RegionBox{16, 16, 32, 32}, {1.0, 0.0, 0.0});  // "object" = red quadrant
    ProposalSet ps;
    ps.image_id = "x";
    ps.boxes = {RegionBox{0, 0, 16, 16}, RegionBox{16, 16, 32, 32}, RegionBox{0, 16, 16, 32}};

    // Score = mean red channel of the crop: a stand-in classifier confidence.
    auto scorer = [](const ImageGrid& c, int) { return mean_channel(c, c.full_box(), 0); };

    SECTION("k = 1 returns the argmax") {
        const ProposalSet out = filter_proposals(img, ps, 0, scorer, 1);
        REQUIRE(out.boxes.size() == 1);
        CHECK(out.boxes[0] == RegionBox{16, 16, 32, 32});
    }
    SECTION("k >= n is identity on the set with scores attached") {
        const ProposalSet out = filter_proposals(img, ps, 0, scorer, 10);
        CHECK(out.boxes.size() == 3);
        CHECK(out.scores.size() == 3);
        for (std::size_t i = 1; i < out.scores.size(); ++i) CHECK(out.scores[i - 1] >= out.scores[i]);
        for (const auto& b : out.boxes)
            CHECK(std::find(ps.boxes.begin(), ps.boxes.end(), b) != ps.boxes.end());
    }
    SECTION("ties break in canonical order") {
        auto flat = [](const ImageGrid&, int) { return 0.5; };
        const ProposalSet out = filter_proposals(img, ps, 0, flat, 2);
        REQUIRE(out.boxes.size() == 2);
        CHECK(out.boxes[0] == ps.boxes[0]);
        CHECK(out.boxes[1] == ps.boxes[1]);
    }
    SECTION("k < 1 rejected") {
        CHECK_THROWS_AS(filter_proposals(img, ps, 0, scorer, 0), config_error);
    }
}
