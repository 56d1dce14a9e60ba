#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "vtrl/pipeline.hpp"

using namespace vtrl;
namespace fs = std::filesystem;

namespace {

// Small-but-complete pipeline config: exercises every stage quickly. Quality
// thresholds live in the acceptance suite, not here.
PipelineConfig tiny_config(const fs::path& run_dir, std::uint64_t seed = 7) {
    PipelineConfig cfg;
    cfg.run_dir = run_dir.string();
    GeneratorSpec gen;
    gen.n_classes = 2;
    gen.images_per_class = 8;
    gen.image_size = 64;
    gen.seed = seed;
    cfg.generate = gen;
    cfg.seed = seed;
    cfg.cls_train = TrainConfig{40, 8, 1e-3, 0};
    cfg.joint = JointConfig{30, 3, 1e-3, 32, 16, 32, 0};
    cfg.gan.steps = 20;
    cfg.gan.batch = 6;
    cfg.gan.image_size = 32;
    cfg.proposals.scales = {16, 32};
    cfg.proposals.strides = {8, 16};
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("pipeline runs end to end, caches and resumes") {
    const fs::path run = fs::temp_directory_path() / "vtrl_pipe_run";
    fs::remove_all(run);
    const PipelineConfig cfg = tiny_config(run);

    const EvalReport rep = run_pipeline(cfg, false);
    CHECK(rep.r > 0);
    CHECK(rep.r_a <= rep.r);
    CHECK(rep.fused_accuracy == Catch::Approx(static_cast<real>(rep.r_a) / rep.r));
    CHECK(rep.ablations.count("full") == 1);
    CHECK(rep.ablations.count("wo_parts") == 1);

    // Every stage artifact named in the interfaces exists.
    for (const auto& f : {"ori.ckpt", "object.ckpt", "part.ckpt", "joint.ckpt", "gan.ckpt", "boxes.json",
                          "proposals.txt", "patterns.json", "parts.json", "bank.json", "report.json",
                          "scores.json", "stages.json"})
        CHECK(fs::exists(run / f));
    CHECK(fs::exists(run / "plots" / "per_class_accuracy.png"));

    SECTION("resume with nothing deleted re-runs nothing") {
        const auto mtime = fs::last_write_time(run / "gan.ckpt");
        const auto report_before = slurp(run / "report.json");
        run_pipeline(cfg, true);
        CHECK(fs::last_write_time(run / "gan.ckpt") == mtime);
        CHECK(slurp(run / "report.json") == report_before);
    }
    SECTION("deleting only the report re-runs only evaluation") {
        const auto gan_mtime = fs::last_write_time(run / "gan.ckpt");
        const auto ori_mtime = fs::last_write_time(run / "ori.ckpt");
        const auto report_before = slurp(run / "report.json");
        fs::remove(run / "report.json");
        run_pipeline(cfg, true);
        CHECK(fs::exists(run / "report.json"));
        CHECK(slurp(run / "report.json") == report_before);  // deterministic re-evaluation
        CHECK(fs::last_write_time(run / "gan.ckpt") == gan_mtime);
        CHECK(fs::last_write_time(run / "ori.ckpt") == ori_mtime);
    }
    SECTION("config change invalidates dependent stages on resume") {
        PipelineConfig cfg2 = cfg;
        cfg2.fusion.beta_grid = {0.0, 1.0};
        const auto gan_mtime = fs::last_write_time(run / "gan.ckpt");
        run_pipeline(cfg2, true);
        CHECK(fs::last_write_time(run / "gan.ckpt") == gan_mtime);  // upstream untouched
    }
    fs::remove_all(run);
}

TEST_CASE("pipeline determinism: same seed, same report") {
    const fs::path r1 = fs::temp_directory_path() / "vtrl_pipe_a";
    const fs::path r2 = fs::temp_directory_path() / "vtrl_pipe_b";
    fs::remove_all(r1);
    fs::remove_all(r2);
    run_pipeline(tiny_config(r1, 11), false);
    run_pipeline(tiny_config(r2, 11), false);
    CHECK(slurp(r1 / "report.json") == slurp(r2 / "report.json"));
    CHECK(slurp(r1 / "scores.json") == slurp(r2 / "scores.json"));
    fs::remove_all(r1);
    fs::remove_all(r2);
}

TEST_CASE("report rendering formats") {
    EvalReport rep;
    rep.r = 4;
    rep.r_a = 3;
    rep.fused_accuracy = 0.75;
    rep.visual_accuracy = 0.5;
    rep.textual_accuracy = 0.5;
    rep.ablations = {{"full", 0.75}, {"wo_parts", 0.5}};
    rep.per_class_accuracy = {1.0, 0.5};
    rep.confusion = {{2, 0}, {1, 1}};

    const std::string js = render_report(rep, "json");
    CHECK(js.find("\"accuracy\": 0.75") != std::string::npos);
    const std::string csv = render_report(rep, "csv");
    CHECK(csv.find("fused,0.75") != std::string::npos);
    const std::string md = render_report(rep, "md");
    CHECK(md.find("| fused | 0.75 |") != std::string::npos);
    CHECK_THROWS_AS(render_report(rep, "yaml"), config_error);

    SECTION("json round trip") {
        const EvalReport back = EvalReport::from_json(rep.to_json());
        CHECK(back.r == rep.r);
        CHECK(back.ablations == rep.ablations);
        CHECK(back.confusion == rep.confusion);
    }
}
