#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtrl/checkpoint.hpp"
#include "vtrl/classifier.hpp"
#include "vtrl/common.hpp"
#include "vtrl/corpus.hpp"
#include "vtrl/embedding.hpp"
#include "vtrl/fusion.hpp"
#include "vtrl/gan.hpp"
#include "vtrl/localization.hpp"
#include "vtrl/mining.hpp"
#include "vtrl/plot.hpp"
#include "vtrl/png_io.hpp"
#include "vtrl/proposals.hpp"
#include "vtrl/visual.hpp"

namespace vtrl {

// ---------------------------------------------------------------------------
// JSON glue for the component configs.
// ---------------------------------------------------------------------------

inline json to_json(const TrainConfig& c) {
    return json{{"steps", c.steps}, {"batch", c.batch}, {"lr", c.lr}};
}
inline TrainConfig train_config_from(const json& j, const TrainConfig& d = {}) {
    TrainConfig c = d;
    if (j.contains("steps")) c.steps = j.at("steps").get<int>();
    if (j.contains("batch")) c.batch = j.at("batch").get<int>();
    if (j.contains("lr")) c.lr = j.at("lr").get<real>();
    return c;
}

inline json to_json(const JointConfig& c) {
    return json{{"steps", c.steps}, {"per_class", c.per_class}, {"lr", c.lr},
                {"dim", c.dim},     {"emb_dim", c.emb_dim},     {"input_size", c.input_size}};
}
inline JointConfig joint_config_from(const json& j, const JointConfig& d = {}) {
    JointConfig c = d;
    if (j.contains("steps")) c.steps = j.at("steps").get<int>();
    if (j.contains("per_class")) c.per_class = j.at("per_class").get<int>();
    if (j.contains("lr")) c.lr = j.at("lr").get<real>();
    if (j.contains("dim")) c.dim = j.at("dim").get<int>();
    if (j.contains("emb_dim")) c.emb_dim = j.at("emb_dim").get<int>();
    if (j.contains("input_size")) c.input_size = j.at("input_size").get<int>();
    return c;
}

inline json to_json(const GanConfig& c) {
    return json{{"image_size", c.image_size}, {"d_z", c.d_z},       {"d_text", c.d_text},
                {"text_proj", c.text_proj},   {"steps", c.steps},   {"batch", c.batch},
                {"lr", c.lr},                 {"beta1", c.beta1},   {"beta2", c.beta2},
                {"real_crop_prob", c.real_crop_prob}};
}
inline GanConfig gan_config_from(const json& j, const GanConfig& d = {}) {
    GanConfig c = d;
    if (j.contains("image_size")) c.image_size = j.at("image_size").get<int>();
    if (j.contains("d_z")) c.d_z = j.at("d_z").get<int>();
    if (j.contains("d_text")) c.d_text = j.at("d_text").get<int>();
    if (j.contains("text_proj")) c.text_proj = j.at("text_proj").get<int>();
    if (j.contains("steps")) c.steps = j.at("steps").get<int>();
    if (j.contains("batch")) c.batch = j.at("batch").get<int>();
    if (j.contains("lr")) c.lr = j.at("lr").get<real>();
    if (j.contains("beta1")) c.beta1 = j.at("beta1").get<real>();
    if (j.contains("beta2")) c.beta2 = j.at("beta2").get<real>();
    if (j.contains("real_crop_prob")) c.real_crop_prob = j.at("real_crop_prob").get<real>();
    return c;
}

inline json to_json(const MiningThresholds& t) {
    return json{{"supp_min", t.supp_min}, {"conf_min", t.conf_min},
                {"dis_min", t.dis_min},   {"max_pattern_size", t.max_pattern_size}};
}
inline MiningThresholds mining_from(const json& j, const MiningThresholds& d = {}) {
    MiningThresholds t = d;
    if (j.contains("supp_min")) t.supp_min = j.at("supp_min").get<real>();
    if (j.contains("conf_min")) t.conf_min = j.at("conf_min").get<real>();
    if (j.contains("dis_min")) t.dis_min = j.at("dis_min").get<int>();
    if (j.contains("max_pattern_size")) t.max_pattern_size = j.at("max_pattern_size").get<int>();
    return t;
}

inline json to_json(const ProposalConfig& c) {
    return json{{"scales", c.scales}, {"strides", c.strides}, {"cap", c.cap}};
}
inline ProposalConfig proposal_config_from(const json& j, const ProposalConfig& d = {}) {
    ProposalConfig c = d;
    if (j.contains("scales")) c.scales = j.at("scales").get<std::vector<int>>();
    if (j.contains("strides")) c.strides = j.at("strides").get<std::vector<int>>();
    if (j.contains("cap")) c.cap = j.at("cap").get<int>();
    return c;
}

struct PipelineConfig {
    std::string run_dir = "run";
    std::string data_dir;  // empty means generate under <run_dir>/data
    std::optional<GeneratorSpec> generate;
    std::uint64_t seed = 7;

    int cls_input_size = 64;
    TrainConfig cls_train{600, 16, 1e-3, 0};
    JointConfig joint{400, 4, 1e-3, 64, 32, 32, 0};
    GanConfig gan;
    MiningThresholds mining;
    int top_k = 10;
    int min_df = 10;
    ProposalConfig proposals;
    int filter_top_k = 0;  // 0 disables the filter net
    FusionConfig fusion;
    std::vector<real> weight_grid = {0.0, 0.5, 1.0};
    bool select_weights = true;
    bool select_beta_cv = true;

    static PipelineConfig from_json(const json& j) {
        PipelineConfig c;
        if (j.contains("run_dir")) c.run_dir = j.at("run_dir").get<std::string>();
        if (j.contains("data_dir")) c.data_dir = j.at("data_dir").get<std::string>();
        if (j.contains("generate")) c.generate = GeneratorSpec::from_json(j.at("generate"));
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("classifier")) {
            c.cls_train = train_config_from(j.at("classifier"), c.cls_train);
            if (j.at("classifier").contains("input_size"))
                c.cls_input_size = j.at("classifier").at("input_size").get<int>();
        }
        if (j.contains("joint")) c.joint = joint_config_from(j.at("joint"), c.joint);
        if (j.contains("gan")) c.gan = gan_config_from(j.at("gan"), c.gan);
        if (j.contains("mining")) {
            c.mining = mining_from(j.at("mining"), c.mining);
            if (j.at("mining").contains("top_k")) c.top_k = j.at("mining").at("top_k").get<int>();
            if (j.at("mining").contains("min_df")) c.min_df = j.at("mining").at("min_df").get<int>();
        }
        if (j.contains("proposals")) c.proposals = proposal_config_from(j.at("proposals"), c.proposals);
        if (j.contains("filter_top_k")) c.filter_top_k = j.at("filter_top_k").get<int>();
        if (j.contains("fusion")) {
            if (j.at("fusion").contains("beta")) c.fusion.beta = j.at("fusion").at("beta").get<real>();
            if (j.at("fusion").contains("beta_grid"))
                c.fusion.beta_grid = j.at("fusion").at("beta_grid").get<std::vector<real>>();
        }
        if (j.contains("weight_grid")) c.weight_grid = j.at("weight_grid").get<std::vector<real>>();
        if (j.contains("select_weights")) c.select_weights = j.at("select_weights").get<bool>();
        if (j.contains("select_beta")) c.select_beta_cv = j.at("select_beta").get<bool>();
        return c;
    }

    json to_json_full() const {
        json j;
        j["run_dir"] = run_dir;
        j["data_dir"] = data_dir;
        if (generate) j["generate"] = generate->to_json();
        j["seed"] = seed;
        j["classifier"] = to_json(cls_train);
        j["classifier"]["input_size"] = cls_input_size;
        j["joint"] = to_json(joint);
        j["gan"] = to_json(gan);
        j["mining"] = to_json(mining);
        j["mining"]["top_k"] = top_k;
        j["mining"]["min_df"] = min_df;
        j["proposals"] = to_json(proposals);
        j["filter_top_k"] = filter_top_k;
        j["fusion"] = json{{"beta", fusion.beta}, {"beta_grid", fusion.beta_grid}};
        j["weight_grid"] = weight_grid;
        j["select_weights"] = select_weights;
        j["select_beta"] = select_beta_cv;
        return j;
    }
};

// ---------------------------------------------------------------------------
// Checkpoint adapters.
// ---------------------------------------------------------------------------

inline void save_classifier(const std::string& path, ConvClassifier& m, const json& extra = {}) {
    json meta{{"input_size", m.cfg.input_size},
              {"n_classes", m.cfg.n_classes},
              {"feat_channels", m.cfg.feat_channels},
              {"stage", m.cfg.stage},
              {"seed", m.cfg.seed}};
    if (!extra.is_null()) meta["extra"] = extra;
    save_checkpoint(path, "classifier", meta, m.params());
}

inline ConvClassifier load_classifier(const std::string& path) {
    const Checkpoint ck = load_checkpoint(path, "classifier");
    ClassifierConfig cfg;
    cfg.input_size = ck.meta.at("input_size").get<int>();
    cfg.n_classes = ck.meta.at("n_classes").get<int>();
    cfg.feat_channels = ck.meta.at("feat_channels").get<int>();
    cfg.stage = ck.meta.at("stage").get<std::string>();
    cfg.seed = ck.meta.at("seed").get<std::uint64_t>();
    ConvClassifier m = ConvClassifier::create(cfg);
    ck.apply(m.params());
    return m;
}

inline void save_joint(const std::string& path, JointModel& m) {
    json meta{{"visual", json{{"input_size", m.theta.cfg.input_size}, {"dim", m.theta.cfg.dim}, {"seed", m.theta.cfg.seed}}},
              {"text", json{{"vocab", m.phi.cfg.vocab},
                            {"emb_dim", m.phi.cfg.emb_dim},
                            {"dim", m.phi.cfg.dim},
                            {"seed", m.phi.cfg.seed}}},
              {"tokens", m.vocab.tokens}};
    nn::Params ps = m.theta.params();
    const nn::Params pt = m.phi.params();
    ps.insert(ps.end(), pt.begin(), pt.end());
    save_checkpoint(path, "joint", meta, ps);
}

inline JointModel load_joint(const std::string& path) {
    const Checkpoint ck = load_checkpoint(path, "joint");
    VisualEncoderConfig vc;
    vc.input_size = ck.meta.at("visual").at("input_size").get<int>();
    vc.dim = ck.meta.at("visual").at("dim").get<int>();
    vc.seed = ck.meta.at("visual").at("seed").get<std::uint64_t>();
    TextEncoderConfig tc;
    tc.vocab = ck.meta.at("text").at("vocab").get<int>();
    tc.emb_dim = ck.meta.at("text").at("emb_dim").get<int>();
    tc.dim = ck.meta.at("text").at("dim").get<int>();
    tc.seed = ck.meta.at("text").at("seed").get<std::uint64_t>();
    JointModel m;
    m.theta = VisualEncoder::create(vc);
    m.phi = TextualEncoder::create(tc);
    m.vocab.tokens = ck.meta.at("tokens").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < m.vocab.tokens.size(); ++i)
        m.vocab.index.emplace(m.vocab.tokens[i], static_cast<int>(i));
    nn::Params ps = m.theta.params();
    const nn::Params pt = m.phi.params();
    ps.insert(ps.end(), pt.begin(), pt.end());
    ck.apply(ps);
    return m;
}

inline void save_gan(const std::string& path, GanModel& m, int steps_done) {
    json meta = to_json(m.cfg);
    meta["seed"] = m.cfg.seed;
    meta["steps_done"] = steps_done;
    nn::Params ps = m.gen.params();
    const nn::Params pd = m.dis.params();
    ps.insert(ps.end(), pd.begin(), pd.end());
    save_checkpoint(path, "gan", meta, ps);
}

inline GanModel load_gan(const std::string& path) {
    const Checkpoint ck = load_checkpoint(path, "gan");
    GanConfig cfg = gan_config_from(ck.meta);
    cfg.seed = ck.meta.at("seed").get<std::uint64_t>();
    GanModel m = GanModel::create(cfg);
    nn::Params ps = m.gen.params();
    const nn::Params pd = m.dis.params();
    ps.insert(ps.end(), pd.begin(), pd.end());
    ck.apply(ps);
    return m;
}

// ---------------------------------------------------------------------------
// Artifact files shared between stages.
// ---------------------------------------------------------------------------

inline void save_boxes(const std::string& path, const std::map<std::string, RegionBox>& boxes) {
    json j = json::object();
    for (const auto& [id, b] : boxes) j[id] = {b.x0, b.y0, b.x1, b.y1};
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

inline std::map<std::string, RegionBox> load_boxes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("missing boxes file: " + path);
    const json j = json::parse(in);
    std::map<std::string, RegionBox> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& a = it.value();
        out[it.key()] = RegionBox{a.at(0).get<int>(), a.at(1).get<int>(), a.at(2).get<int>(), a.at(3).get<int>()};
    }
    return out;
}

struct MatchedPart {
    std::vector<std::string> words;
    RegionBox box;
    real score = 0.0;
};

inline void save_parts(const std::string& path, const std::map<std::string, std::vector<MatchedPart>>& parts) {
    json j = json::object();
    for (const auto& [id, list] : parts) {
        json l = json::array();
        for (const auto& p : list)
            l.push_back(json{{"words", p.words}, {"box", {p.box.x0, p.box.y0, p.box.x1, p.box.y1}}, {"score", p.score}});
        j[id] = l;
    }
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

inline std::map<std::string, std::vector<MatchedPart>> load_parts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("missing parts file: " + path);
    const json j = json::parse(in);
    std::map<std::string, std::vector<MatchedPart>> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::vector<MatchedPart> list;
        for (const auto& p : it.value()) {
            MatchedPart mp;
            mp.words = p.at("words").get<std::vector<std::string>>();
            const auto& b = p.at("box");
            mp.box = RegionBox{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
            mp.score = p.at("score").get<real>();
            list.push_back(std::move(mp));
        }
        out[it.key()] = std::move(list);
    }
    return out;
}

inline void save_patterns(const std::string& path, const std::map<int, std::vector<TextualPattern>>& by_class,
                          const Vocabulary& vocab) {
    json j = json::object();
    for (const auto& [cls, pats] : by_class) {
        json l = json::array();
        for (const auto& p : pats)
            l.push_back(json{{"words", pattern_tokens(p, vocab)}, {"support", p.support}, {"confidence", p.confidence}});
        j[std::to_string(cls)] = l;
    }
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

// Patterns reloaded as token lists (ids are vocabulary-specific).
inline std::map<int, std::vector<MatchedPart>> load_patterns_tokens(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("missing patterns file: " + path);
    const json j = json::parse(in);
    std::map<int, std::vector<MatchedPart>> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::vector<MatchedPart> pats;
        for (const auto& p : it.value()) {
            MatchedPart mp;
            mp.words = p.at("words").get<std::vector<std::string>>();
            mp.score = p.at("confidence").get<real>();
            pats.push_back(std::move(mp));
        }
        out[std::stoi(it.key())] = std::move(pats);
    }
    return out;
}

inline void save_loss_history(const std::string& path, const json& series) {
    std::ofstream out(path);
    out << series.dump() << "\n";
}

// ---------------------------------------------------------------------------
// Stage cache.
// ---------------------------------------------------------------------------

inline std::uint64_t hash_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw io_error("cannot hash missing file: " + p.string());
    char buf[1 << 14];
    std::uint64_t h = 0xcbf29ce484222325ull;
    while (in) {
        in.read(buf, sizeof(buf));
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return h;
}

class StageCache {
  public:
    StageCache(fs::path run_dir, bool resume) : run_dir_(std::move(run_dir)), resume_(resume) {
        fs::create_directories(run_dir_);
        const fs::path logp = run_dir_ / "stages.json";
        if (resume_ && fs::exists(logp)) {
            std::ifstream in(logp);
            log_ = json::parse(in);
        } else {
            log_ = json::object();
        }
    }

    // Runs fn unless a valid cached stage record plus its artifacts exist.
    bool execute(const std::string& name, std::uint64_t input_hash,
                 const std::vector<fs::path>& artifacts, const std::function<void()>& fn) {
        if (resume_ && log_.contains(name) && log_.at(name).at("input_hash").get<std::uint64_t>() == input_hash) {
            bool all = true;
            for (const auto& a : artifacts)
                if (!fs::exists(a)) all = false;
            if (all) {
                std::cerr << "[vtrl] stage " << name << ": cached\n";
                return false;
            }
        }
        std::cerr << "[vtrl] stage " << name << ": running\n";
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const real secs = std::chrono::duration<real>(std::chrono::steady_clock::now() - t0).count();
        for (const auto& a : artifacts)
            if (!fs::exists(a)) throw io_error("stage " + name + " did not produce artifact " + a.string());
        json arts = json::array();
        for (const auto& a : artifacts) arts.push_back(a.string());
        log_[name] = json{{"input_hash", input_hash}, {"artifacts", arts}, {"seconds", secs}};
        std::ofstream out(run_dir_ / "stages.json");
        out << log_.dump(2) << "\n";
        std::cerr << "[vtrl] stage " << name << ": done in " << secs << " s\n";
        return true;
    }

  private:
    fs::path run_dir_;
    bool resume_;
    json log_;
};

// ---------------------------------------------------------------------------
// The Algorithm-1 orchestration.
// ---------------------------------------------------------------------------

struct PipelinePaths {
    fs::path run_dir, data_dir;
    fs::path ori_ckpt, object_ckpt, part_ckpt, joint_ckpt, gan_ckpt;
    fs::path boxes, proposals, patterns, parts, bank, report, scores;
    fs::path losses_dir, plots_dir;

    static PipelinePaths resolve(const PipelineConfig& cfg) {
        PipelinePaths p;
        p.run_dir = cfg.run_dir;
        p.data_dir = cfg.data_dir.empty() ? p.run_dir / "data" : fs::path(cfg.data_dir);
        p.ori_ckpt = p.run_dir / "ori.ckpt";
        p.object_ckpt = p.run_dir / "object.ckpt";
        p.part_ckpt = p.run_dir / "part.ckpt";
        p.joint_ckpt = p.run_dir / "joint.ckpt";
        p.gan_ckpt = p.run_dir / "gan.ckpt";
        p.boxes = p.run_dir / "boxes.json";
        p.proposals = p.run_dir / "proposals.txt";
        p.patterns = p.run_dir / "patterns.json";
        p.parts = p.run_dir / "parts.json";
        p.bank = p.run_dir / "bank.json";
        p.report = p.run_dir / "report.json";
        p.scores = p.run_dir / "scores.json";
        p.losses_dir = p.run_dir / "losses";
        p.plots_dir = p.run_dir / "plots";
        return p;
    }
};

namespace detail {

inline std::uint64_t hash_tokens(std::initializer_list<std::string> parts) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& s : parts) h = fnv1a64(s, h);
    return h;
}

inline std::vector<ImageGrid> part_crops_for(const Dataset& ds, int image_idx,
                                             const std::map<std::string, std::vector<MatchedPart>>& parts) {
    std::vector<ImageGrid> crops;
    const auto& im = ds.images[static_cast<std::size_t>(image_idx)];
    auto it = parts.find(im.id);
    if (it == parts.end()) return crops;
    for (const auto& mp : it->second)
        if (mp.box.valid()) crops.push_back(crop(im.image, mp.box));
    return crops;
}

}  // namespace detail

inline EvalReport run_pipeline(const PipelineConfig& cfg, bool resume) {
    const PipelinePaths paths = PipelinePaths::resolve(cfg);
    fs::create_directories(paths.run_dir);
    fs::create_directories(paths.losses_dir);
    fs::create_directories(paths.plots_dir);
    StageCache cache(paths.run_dir, resume);
    const std::string cfg_dump = cfg.to_json_full().dump();

    // -- data ----------------------------------------------------------------
    {
        if (cfg.generate) {
            const std::uint64_t h = detail::hash_tokens({"data", cfg.generate->to_json().dump()});
            cache.execute("data", h, {paths.data_dir / "manifest.json"},
                          [&] { generate_dataset(*cfg.generate, paths.data_dir.string()); });
        } else if (!fs::exists(paths.data_dir / "manifest.json")) {
            throw config_error("data_dir has no manifest.json: " + paths.data_dir.string());
        }
    }
    Dataset ds = load_dataset(paths.data_dir.string());
    const std::uint64_t data_hash = hash_file(paths.data_dir / "manifest.json");
    const std::string seed_str = std::to_string(cfg.seed);

    auto train_view_images = [&](const std::vector<int>& idx) {
        std::vector<const ImageGrid*> imgs;
        std::vector<int> labels;
        for (int i : idx) {
            imgs.push_back(&ds.images[static_cast<std::size_t>(i)].image);
            labels.push_back(ds.images[static_cast<std::size_t>(i)].class_id);
        }
        return std::make_pair(imgs, labels);
    };

    // -- train M_ori ----------------------------------------------------------
    {
        const std::uint64_t h = detail::hash_tokens(
            {"train_ori", std::to_string(data_hash), to_json(cfg.cls_train).dump(),
             std::to_string(cfg.cls_input_size), seed_str});
        cache.execute("train_ori", h, {paths.ori_ckpt}, [&] {
            ClassifierConfig cc{cfg.cls_input_size, ds.n_classes(), 64, "ori", cfg.seed};
            ConvClassifier m = ConvClassifier::create(cc);
            auto [imgs, labels] = train_view_images(ds.train_idx);
            TrainConfig tc = cfg.cls_train;
            tc.seed = cfg.seed;
            const auto hist = train_classifier(m, imgs, labels, tc);
            save_classifier(paths.ori_ckpt.string(), m);
            save_loss_history((paths.losses_dir / "ori.json").string(), json(hist));
        });
    }

    // -- localize objects (CAM on M_ori) ---------------------------------------
    {
        const std::uint64_t h =
            detail::hash_tokens({"localize", std::to_string(hash_file(paths.ori_ckpt)), std::to_string(data_hash)});
        cache.execute("localize", h, {paths.boxes}, [&] {
            ConvClassifier backbone = load_classifier(paths.ori_ckpt.string());
            std::map<std::string, RegionBox> boxes;
            for (const auto& im : ds.images) boxes[im.id] = localize_object(backbone, im.image, false);
            save_boxes(paths.boxes.string(), boxes);
        });
    }

    // -- fine-tune M_object -----------------------------------------------------
    {
        const std::uint64_t h = detail::hash_tokens(
            {"train_object", std::to_string(hash_file(paths.ori_ckpt)), std::to_string(hash_file(paths.boxes)),
             to_json(cfg.cls_train).dump(), seed_str});
        cache.execute("train_object", h, {paths.object_ckpt}, [&] {
            ConvClassifier ori = load_classifier(paths.ori_ckpt.string());
            const auto boxes = load_boxes(paths.boxes.string());
            std::vector<ImageGrid> crops;
            std::vector<int> labels;
            crops.reserve(ds.train_idx.size());
            for (int i : ds.train_idx) {
                const auto& im = ds.images[static_cast<std::size_t>(i)];
                crops.push_back(crop(im.image, boxes.at(im.id)));
                labels.push_back(im.class_id);
            }
            std::vector<const ImageGrid*> view;
            for (const auto& c : crops) view.push_back(&c);
            TrainConfig tc = cfg.cls_train;
            tc.seed = derive_seed(cfg.seed, "stage:object");
            ConvClassifier obj = train_stage(view, labels, ori, "object", tc);
            save_classifier(paths.object_ckpt.string(), obj);
        });
    }

    // -- train joint text/visual encoders ---------------------------------------
    {
        const std::uint64_t h =
            detail::hash_tokens({"train_joint", std::to_string(data_hash), to_json(cfg.joint).dump(), seed_str});
        cache.execute("train_joint", h, {paths.joint_ckpt}, [&] {
            std::vector<Description> train_descs;
            std::vector<int> dlabels;
            collect_descriptions(ds, ds.train_idx, train_descs, dlabels);
            JointModel m;
            m.vocab = TokenVocab::build(train_descs);
            VisualEncoderConfig vc{cfg.joint.input_size, cfg.joint.dim, cfg.seed};
            TextEncoderConfig tc{m.vocab.size(), cfg.joint.emb_dim, cfg.joint.dim, cfg.seed};
            m.theta = VisualEncoder::create(vc);
            m.phi = TextualEncoder::create(tc);
            JointConfig jc = cfg.joint;
            jc.seed = cfg.seed;
            const auto hist = train_joint_embedding(m, ds, ds.train_idx, jc);
            save_joint(paths.joint_ckpt.string(), m);
            save_loss_history((paths.losses_dir / "joint.json").string(), json(hist));
        });
    }

    // -- train GAN-CLS -----------------------------------------------------------
    {
        const std::uint64_t h = detail::hash_tokens(
            {"train_gan", std::to_string(hash_file(paths.joint_ckpt)), to_json(cfg.gan).dump(), seed_str});
        cache.execute("train_gan", h, {paths.gan_ckpt}, [&] {
            JointModel joint = load_joint(paths.joint_ckpt.string());
            GanConfig gc = cfg.gan;
            gc.d_text = joint.phi.cfg.dim;
            gc.seed = cfg.seed;
            GanModel gan = GanModel::create(gc);
            std::vector<const ImageGrid*> imgs;
            GanTrainingText text;
            for (int i : ds.train_idx) {
                const auto& im = ds.images[static_cast<std::size_t>(i)];
                imgs.push_back(&im.image);
                text.labels.push_back(im.class_id);
                std::vector<std::vector<real>> embs;
                for (const auto& d : im.descriptions) embs.push_back(joint.embed_tokens(d.tokens));
                text.by_image.push_back(std::move(embs));
            }
            const GanTrainResult res = train_gan(gan, imgs, text, gc);
            save_gan(paths.gan_ckpt.string(), gan, gc.steps);
            save_loss_history((paths.losses_dir / "gan.json").string(),
                              json{{"d", res.d_loss}, {"g", res.g_loss}});
        });
    }

    // -- generate part proposals --------------------------------------------------
    {
        const std::uint64_t h = detail::hash_tokens(
            {"proposals", std::to_string(data_hash), to_json(cfg.proposals).dump(),
             std::to_string(cfg.filter_top_k),
             cfg.filter_top_k > 0 ? std::to_string(hash_file(paths.ori_ckpt)) : std::string("nofilter")});
        cache.execute("proposals", h, {paths.proposals}, [&] {
            std::optional<ConvClassifier> filter_net;
            if (cfg.filter_top_k > 0) filter_net = load_classifier(paths.ori_ckpt.string());
            std::ofstream out(paths.proposals);
            for (const auto& im : ds.images) {
                ProposalSet ps = generate_proposals(im.image, cfg.proposals, im.id);
                if (filter_net) {
                    const int pred = filter_net->predict_class(im.image);
                    ps = filter_proposals(im.image, ps, pred,
                                          [&](const ImageGrid& c, int cls) {
                                              return filter_net->predict_scores(c)[static_cast<std::size_t>(cls)];
                                          },
                                          cfg.filter_top_k);
                }
                write_proposals(out, ps);
            }
        });
    }

    // -- mine textual patterns ----------------------------------------------------
    {
        const std::uint64_t h = detail::hash_tokens(
            {"mine", std::to_string(data_hash), to_json(cfg.mining).dump(), std::to_string(cfg.top_k),
             std::to_string(cfg.min_df)});
        cache.execute("mine", h, {paths.patterns}, [&] {
            std::vector<Description> descs;
            std::vector<int> labels;
            collect_descriptions(ds, ds.train_idx, descs, labels);
            const Vocabulary vocab = build_vocabulary(descs, cfg.min_df, default_stopwords());
            const auto transactions = to_transactions(descs, vocab, labels);
            std::map<int, std::vector<TextualPattern>> by_class;
            for (int c = 0; c < ds.n_classes(); ++c) {
                std::vector<Description> class_corpus;
                for (std::size_t i = 0; i < descs.size(); ++i)
                    if (labels[i] == c) class_corpus.push_back(descs[i]);
                const auto keywords = top_keyword_ids(class_corpus, vocab, cfg.top_k);
                by_class[c] = mine_patterns(transactions, c, keywords, cfg.mining);
            }
            save_patterns(paths.patterns.string(), by_class, vocab);
        });
    }

    // -- match parts (discriminator scoring) ---------------------------------------
    {
        const std::uint64_t h = detail::hash_tokens(
            {"match", std::to_string(hash_file(paths.gan_ckpt)), std::to_string(hash_file(paths.patterns)),
             std::to_string(hash_file(paths.proposals)), std::to_string(hash_file(paths.object_ckpt)),
             std::to_string(hash_file(paths.boxes))});
        cache.execute("match", h, {paths.parts}, [&] {
            GanModel gan = load_gan(paths.gan_ckpt.string());
            JointModel joint = load_joint(paths.joint_ckpt.string());
            ConvClassifier object_net = load_classifier(paths.object_ckpt.string());
            const auto boxes = load_boxes(paths.boxes.string());
            const auto patterns = load_patterns_tokens(paths.patterns.string());

            // Reload proposals grouped by image id.
            std::map<std::string, ProposalSet> props;
            {
                std::ifstream in(paths.proposals);
                std::string line;
                while (std::getline(in, line)) {
                    if (line.empty()) continue;
                    std::istringstream is(line);
                    std::string id;
                    RegionBox b;
                    is >> id >> b.x0 >> b.y0 >> b.x1 >> b.y1;
                    props[id].image_id = id;
                    props[id].boxes.push_back(b);
                }
            }

            std::set<int> train_set(ds.train_idx.begin(), ds.train_idx.end());
            std::map<std::string, std::vector<MatchedPart>> parts;
            for (std::size_t idx = 0; idx < ds.images.size(); ++idx) {
                const auto& im = ds.images[idx];
                // True class at train time, predicted class (object model on the
                // localized crop) at val/test time.
                int cls = im.class_id;
                if (!train_set.count(static_cast<int>(idx)))
                    cls = object_net.predict_class(crop(im.image, boxes.at(im.id)));
                std::vector<MatchedPart> matched;
                auto pit = patterns.find(cls);
                if (pit != patterns.end() && !pit->second.empty() && props.count(im.id)) {
                    for (const auto& pat : pit->second) {
                        const auto temb = joint.embed_tokens(pat.words);
                        MatchedPart best;
                        best.words = pat.words;
                        best.score = -1.0;
                        for (const auto& box : props.at(im.id).boxes) {
                            const real s = discriminator_score(gan, crop(im.image, box), temb);
                            if (s > best.score) {
                                best.score = s;
                                best.box = box;
                            }
                        }
                        matched.push_back(std::move(best));
                    }
                }
                parts[im.id] = std::move(matched);
            }
            save_parts(paths.parts.string(), parts);
        });
    }

    // -- fine-tune M_part -----------------------------------------------------------
    {
        const std::uint64_t h = detail::hash_tokens(
            {"train_part", std::to_string(hash_file(paths.object_ckpt)), std::to_string(hash_file(paths.parts)),
             to_json(cfg.cls_train).dump(), seed_str});
        cache.execute("train_part", h, {paths.part_ckpt}, [&] {
            ConvClassifier object_net = load_classifier(paths.object_ckpt.string());
            const auto parts = load_parts(paths.parts.string());
            std::vector<ImageGrid> crops;
            std::vector<int> labels;
            for (int i : ds.train_idx) {
                auto cs = detail::part_crops_for(ds, i, parts);
                for (auto& c : cs) {
                    crops.push_back(std::move(c));
                    labels.push_back(ds.images[static_cast<std::size_t>(i)].class_id);
                }
            }
            if (crops.empty()) {
                std::cerr << "[vtrl] warn: no matched part crops in train split; part model = object model\n";
                object_net.cfg.stage = "part";
                save_classifier(paths.part_ckpt.string(), object_net);
                return;
            }
            std::vector<const ImageGrid*> view;
            for (const auto& c : crops) view.push_back(&c);
            TrainConfig tc = cfg.cls_train;
            tc.seed = derive_seed(cfg.seed, "stage:part");
            ConvClassifier part_net = train_stage(view, labels, object_net, "part", tc);
            save_classifier(paths.part_ckpt.string(), part_net);
        });
    }

    // -- joint embedding bank ----------------------------------------------------------
    {
        const std::uint64_t h = detail::hash_tokens(
            {"bank", std::to_string(hash_file(paths.joint_ckpt)), std::to_string(data_hash)});
        cache.execute("bank", h, {paths.bank}, [&] {
            JointModel joint = load_joint(paths.joint_ckpt.string());
            const ClassTextBank tbank = build_text_bank(joint, ds, ds.train_idx);
            const ClassImageBank ibank = build_image_bank(joint, ds, ds.train_idx);
            json j{{"text", json::array()}, {"image", json::array()}};
            for (const auto& c : tbank.by_class) j["text"].push_back(c);
            for (const auto& c : ibank.by_class) j["image"].push_back(c);
            std::ofstream out(paths.bank);
            out << j.dump() << "\n";
        });
    }

    // -- evaluate ------------------------------------------------------------------------
    {
        const std::uint64_t h = detail::hash_tokens(
            {"evaluate", std::to_string(hash_file(paths.ori_ckpt)), std::to_string(hash_file(paths.object_ckpt)),
             std::to_string(hash_file(paths.part_ckpt)), std::to_string(hash_file(paths.joint_ckpt)),
             std::to_string(hash_file(paths.bank)), std::to_string(hash_file(paths.boxes)),
             std::to_string(hash_file(paths.parts)),
             json{{"fusion", json{{"beta", cfg.fusion.beta}, {"beta_grid", cfg.fusion.beta_grid}}},
                  {"weight_grid", cfg.weight_grid},
                  {"select_weights", cfg.select_weights},
                  {"select_beta", cfg.select_beta_cv}}
                 .dump()});
        cache.execute("evaluate", h, {paths.report, paths.scores}, [&] {
            ConvClassifier ori = load_classifier(paths.ori_ckpt.string());
            ConvClassifier object_net = load_classifier(paths.object_ckpt.string());
            ConvClassifier part_net = load_classifier(paths.part_ckpt.string());
            JointModel joint = load_joint(paths.joint_ckpt.string());
            const auto boxes = load_boxes(paths.boxes.string());
            const auto parts = load_parts(paths.parts.string());

            ClassTextBank tbank;
            {
                std::ifstream in(paths.bank);
                const json j = json::parse(in);
                for (const auto& c : j.at("text"))
                    tbank.by_class.push_back(c.get<std::vector<std::vector<real>>>());
                tbank.validate();
            }

            auto stage_scores = [&](const std::vector<int>& idx_list, std::vector<StageScores>& vis,
                                    std::vector<std::vector<real>>& txt, std::vector<int>& labels) {
                for (int i : idx_list) {
                    const auto& im = ds.images[static_cast<std::size_t>(i)];
                    StageScores s;
                    s.ori = ori.predict_scores(im.image);
                    s.obj = object_net.predict_scores(crop(im.image, boxes.at(im.id)));
                    const auto crops = detail::part_crops_for(ds, i, parts);
                    if (!crops.empty()) s.part = part_prediction(part_net, crops);
                    vis.push_back(std::move(s));
                    txt.push_back(classify_embedding(joint.embed_image(im.image), tbank).second);
                    labels.push_back(im.class_id);
                }
            };

            std::vector<StageScores> val_vis, test_vis;
            std::vector<std::vector<real>> val_txt, test_txt;
            std::vector<int> val_labels, test_labels;
            stage_scores(ds.val_idx, val_vis, val_txt, val_labels);
            stage_scores(ds.test_idx, test_vis, test_txt, test_labels);

            std::array<real, 3> weights{1.0, 1.0, 1.0};
            if (cfg.select_weights && !val_labels.empty())
                weights = select_visual_weights(val_vis, val_labels, cfg.weight_grid);

            real beta = cfg.fusion.beta;
            if (cfg.select_beta_cv && !val_labels.empty()) {
                std::vector<std::vector<real>> val_fv;
                for (const auto& s : val_vis)
                    val_fv.push_back(visual_prediction_safe(s, weights));
                beta = select_beta(val_fv, val_txt, val_labels, cfg.fusion.beta_grid);
            }

            auto fused_preds = [&](const std::array<real, 3>& w, bool drop_part, bool drop_obj) {
                std::vector<int> preds;
                for (std::size_t i = 0; i < test_vis.size(); ++i) {
                    const auto& s = test_vis[i];
                    std::array<real, 3> wa = w;
                    if (drop_obj) wa[1] = 0.0;
                    if (drop_part) wa[2] = 0.0;
                    if (wa[0] + wa[1] + wa[2] <= 0.0) wa[0] = 1.0;
                    const auto fv = visual_prediction_safe(s, wa);
                    preds.push_back(argmax_score(fuse(fv, test_txt[i], beta)));
                }
                return preds;
            };

            EvalReport rep;
            rep.beta = beta;
            rep.visual_weights = weights;
            std::vector<int> vis_preds, txt_preds, fused;
            for (std::size_t i = 0; i < test_vis.size(); ++i) {
                const auto& s = test_vis[i];
                const auto fv = visual_prediction_safe(s, weights);
                vis_preds.push_back(argmax_score(fv));
                txt_preds.push_back(argmax_score(test_txt[i]));
                fused.push_back(argmax_score(fuse(fv, test_txt[i], beta)));
            }
            rep.r = static_cast<long long>(test_labels.size());
            rep.r_a = 0;
            for (std::size_t i = 0; i < test_labels.size(); ++i)
                if (fused[i] == test_labels[i]) ++rep.r_a;
            rep.fused_accuracy = accuracy(fused, test_labels);
            rep.visual_accuracy = accuracy(vis_preds, test_labels);
            rep.textual_accuracy = accuracy(txt_preds, test_labels);
            rep.ablations["full"] = rep.fused_accuracy;
            rep.ablations["wo_parts"] = accuracy(fused_preds(weights, true, false), test_labels);
            rep.ablations["wo_object"] = accuracy(fused_preds(weights, false, true), test_labels);
            rep.ablations["wo_object_and_parts"] = accuracy(fused_preds(weights, true, true), test_labels);
            rep.ablations["visual_only"] = rep.visual_accuracy;
            rep.ablations["textual_only"] = rep.textual_accuracy;

            const int C = ds.n_classes();
            rep.confusion.assign(static_cast<std::size_t>(C), std::vector<long long>(static_cast<std::size_t>(C), 0));
            std::vector<long long> per_total(static_cast<std::size_t>(C), 0), per_hit(static_cast<std::size_t>(C), 0);
            for (std::size_t i = 0; i < test_labels.size(); ++i) {
                ++rep.confusion[static_cast<std::size_t>(test_labels[i])][static_cast<std::size_t>(fused[i])];
                ++per_total[static_cast<std::size_t>(test_labels[i])];
                if (fused[i] == test_labels[i]) ++per_hit[static_cast<std::size_t>(test_labels[i])];
            }
            for (int c = 0; c < C; ++c)
                rep.per_class_accuracy.push_back(per_total[static_cast<std::size_t>(c)]
                                                     ? static_cast<real>(per_hit[static_cast<std::size_t>(c)]) /
                                                           per_total[static_cast<std::size_t>(c)]
                                                     : 0.0);

            {
                std::ofstream out(paths.report);
                out << rep.to_json().dump(2) << "\n";
            }
            {
                json js = json::array();
                for (std::size_t i = 0; i < test_labels.size(); ++i) {
                    const auto& s = test_vis[i];
                    const auto fv = visual_prediction_safe(s, weights);
                    js.push_back(json{{"id", ds.images[static_cast<std::size_t>(ds.test_idx[i])].id},
                                      {"label", test_labels[i]},
                                      {"visual", fv},
                                      {"textual", test_txt[i]},
                                      {"fused", fuse(fv, test_txt[i], beta)},
                                      {"prediction", fused[i]}});
                }
                std::ofstream out(paths.scores);
                out << js.dump(2) << "\n";
            }
            // Plots: training losses and per-class accuracy.
            for (const auto& name : {"ori", "joint"}) {
                const fs::path lp = paths.losses_dir / (std::string(name) + ".json");
                if (!fs::exists(lp)) continue;
                std::ifstream in(lp);
                const json j = json::parse(in);
                write_png((paths.plots_dir / ("loss_" + std::string(name) + ".png")).string(),
                          plot::line_chart({j.get<std::vector<real>>()}));
            }
            {
                const fs::path lp = paths.losses_dir / "gan.json";
                if (fs::exists(lp)) {
                    std::ifstream in(lp);
                    const json j = json::parse(in);
                    write_png((paths.plots_dir / "loss_gan.png").string(),
                              plot::line_chart({j.at("d").get<std::vector<real>>(), j.at("g").get<std::vector<real>>()}));
                }
            }
            write_png((paths.plots_dir / "per_class_accuracy.png").string(), plot::bar_chart(rep.per_class_accuracy));
        });
    }

    std::ifstream in(paths.report);
    return EvalReport::from_json(json::parse(in));
}

// ---------------------------------------------------------------------------
// Report rendering for the CLI.
// ---------------------------------------------------------------------------

inline std::string render_report(const EvalReport& r, const std::string& format) {
    std::ostringstream os;
    if (format == "json") {
        os << r.to_json().dump(2) << "\n";
    } else if (format == "csv") {
        os << "row,accuracy\n";
        os << "fused," << r.fused_accuracy << "\n";
        for (const auto& [k, v] : r.ablations) os << k << "," << v << "\n";
        for (std::size_t c = 0; c < r.per_class_accuracy.size(); ++c)
            os << "class_" << c << "," << r.per_class_accuracy[c] << "\n";
    } else if (format == "md") {
        os << "| row | accuracy |\n|---|---|\n";
        os << "| fused | " << r.fused_accuracy << " |\n";
        for (const auto& [k, v] : r.ablations) os << "| " << k << " | " << v << " |\n";
        os << "\nR = " << r.r << ", R_a = " << r.r_a << ", beta = " << r.beta << "\n";
    } else {
        throw config_error("unknown report format: " + format);
    }
    return os.str();
}

}  // namespace vtrl
