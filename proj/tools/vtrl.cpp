// vtrl: fine-grained visual-textual representation learning pipeline CLI.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vtrl/pipeline.hpp"

namespace fs = std::filesystem;
using vtrl::json;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw vtrl::io_error("cannot open " + path);
    return json::parse(in);
}

std::array<vtrl::real, 3> parse_weights(const std::string& s) {
    std::array<vtrl::real, 3> w{1.0, 1.0, 1.0};
    std::istringstream is(s);
    std::string tok;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(is, tok, ',')) throw vtrl::config_error("--weights expects w1,w2,w3");
        w[static_cast<std::size_t>(i)] = std::stod(tok);
    }
    return w;
}

int cmd_generate_data(const std::string& config, const std::string& out, std::uint64_t seed, bool has_seed) {
    vtrl::GeneratorSpec spec =
        config.empty() ? vtrl::GeneratorSpec{} : vtrl::GeneratorSpec::from_json(read_json_file(config));
    if (has_seed) spec.seed = seed;
    const auto manifest = vtrl::generate_dataset(spec, out);
    std::cout << "generated " << manifest.images.size() << " images, "
              << manifest.images.size() * static_cast<std::size_t>(manifest.descriptions_per_image)
              << " descriptions under " << out << "\n";
    return 0;
}

int cmd_mine_text(const std::string& data, const std::string& out, double supp_min, double conf_min,
                  int dis_min, int top_k, int min_df, const std::string& stopword_path) {
    const vtrl::Dataset ds = vtrl::load_dataset(data);
    std::vector<vtrl::Description> descs;
    std::vector<int> labels;
    vtrl::collect_descriptions(ds, ds.train_idx, descs, labels);
    const auto stopwords =
        stopword_path.empty() ? vtrl::default_stopwords() : vtrl::load_stopwords(stopword_path);
    const vtrl::Vocabulary vocab = vtrl::build_vocabulary(descs, min_df, stopwords);
    vtrl::MiningThresholds th;
    th.supp_min = supp_min;
    th.conf_min = conf_min;
    th.dis_min = dis_min;
    const auto transactions = vtrl::to_transactions(descs, vocab, labels);
    std::map<int, std::vector<vtrl::TextualPattern>> by_class;
    for (int c = 0; c < ds.n_classes(); ++c) {
        std::vector<vtrl::Description> class_corpus;
        for (std::size_t i = 0; i < descs.size(); ++i)
            if (labels[i] == c) class_corpus.push_back(descs[i]);
        by_class[c] = vtrl::mine_patterns(transactions, c, vtrl::top_keyword_ids(class_corpus, vocab, top_k), th);
    }
    vtrl::save_patterns(out, by_class, vocab);
    std::size_t total = 0;
    for (const auto& [c, v] : by_class) total += v.size();
    std::cout << "mined " << total << " patterns over " << ds.n_classes() << " classes -> " << out << "\n";
    return 0;
}

int cmd_propose(const std::string& data, const std::string& out, std::vector<int> scales,
                std::vector<int> strides, int cap) {
    const vtrl::Dataset ds = vtrl::load_dataset(data);
    vtrl::ProposalConfig cfg;
    if (!scales.empty()) cfg.scales = scales;
    if (!strides.empty()) cfg.strides = strides;
    cfg.cap = cap;
    fs::create_directories(out);
    const fs::path file = fs::path(out) / "proposals.txt";
    std::ofstream os(file);
    std::size_t total = 0;
    for (const auto& im : ds.images) {
        const auto ps = vtrl::generate_proposals(im.image, cfg, im.id);
        vtrl::write_proposals(os, ps);
        total += ps.boxes.size();
    }
    std::cout << "wrote " << total << " proposals -> " << file.string() << "\n";
    return 0;
}

int cmd_train_gan(const std::string& data, const std::string& text_encoder, const std::string& out,
                  int steps, std::uint64_t seed) {
    const vtrl::Dataset ds = vtrl::load_dataset(data);
    vtrl::JointModel joint = vtrl::load_joint(text_encoder);
    vtrl::GanConfig gc;
    gc.d_text = joint.phi.cfg.dim;
    gc.steps = steps;
    gc.seed = seed;
    vtrl::GanModel gan = vtrl::GanModel::create(gc);
    std::vector<const vtrl::ImageGrid*> imgs;
    vtrl::GanTrainingText text;
    for (int i : ds.train_idx) {
        const auto& im = ds.images[static_cast<std::size_t>(i)];
        imgs.push_back(&im.image);
        text.labels.push_back(im.class_id);
        std::vector<std::vector<vtrl::real>> embs;
        for (const auto& d : im.descriptions) embs.push_back(joint.embed_tokens(d.tokens));
        text.by_image.push_back(std::move(embs));
    }
    const auto res = vtrl::train_gan(gan, imgs, text, gc);
    vtrl::save_gan(out, gan, gc.steps);
    std::cout << "trained GAN for " << gc.steps << " steps (final d-loss "
              << (res.d_loss.empty() ? 0.0 : res.d_loss.back()) << ") -> " << out << "\n";
    return 0;
}

int cmd_match_parts(const std::string& gan_path, const std::string& patterns_path,
                    const std::string& proposals_dir, const std::string& data, const std::string& out,
                    const std::string& joint_path) {
    const vtrl::Dataset ds = vtrl::load_dataset(data);
    vtrl::GanModel gan = vtrl::load_gan(gan_path);
    vtrl::JointModel joint = vtrl::load_joint(joint_path);
    const auto patterns = vtrl::load_patterns_tokens(patterns_path);

    const fs::path pf = fs::path(proposals_dir) / "proposals.txt";
    std::map<std::string, vtrl::ProposalSet> props;
    {
        std::ifstream in(pf);
        if (!in) throw vtrl::io_error("missing proposals file: " + pf.string());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream is(line);
            std::string id;
            vtrl::RegionBox b;
            is >> id >> b.x0 >> b.y0 >> b.x1 >> b.y1;
            props[id].image_id = id;
            props[id].boxes.push_back(b);
        }
    }
    std::map<std::string, std::vector<vtrl::MatchedPart>> parts;
    for (const auto& im : ds.images) {
        std::vector<vtrl::MatchedPart> matched;
        auto pit = patterns.find(im.class_id);
        if (pit != patterns.end() && props.count(im.id)) {
            for (const auto& pat : pit->second) {
                const auto temb = joint.embed_tokens(pat.words);
                vtrl::MatchedPart best;
                best.words = pat.words;
                best.score = -1.0;
                for (const auto& box : props.at(im.id).boxes) {
                    const vtrl::real s = vtrl::discriminator_score(gan, vtrl::crop(im.image, box), temb);
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
    vtrl::save_parts(out, parts);
    std::cout << "matched parts for " << parts.size() << " images -> " << out << "\n";
    return 0;
}

int cmd_localize(const std::string& data, const std::string& backbone, const std::string& out,
                 const std::string& dump_maps) {
    const vtrl::Dataset ds = vtrl::load_dataset(data);
    vtrl::ConvClassifier net = vtrl::load_classifier(backbone);
    std::map<std::string, vtrl::RegionBox> boxes;
    for (const auto& im : ds.images) {
        boxes[im.id] = vtrl::localize_object(net, im.image);
        if (!dump_maps.empty()) {
            fs::create_directories(dump_maps);
            const int cls = net.predict_class(im.image);
            const auto cam = vtrl::class_activation_map(net, im.image, cls);
            const auto bins = vtrl::quantize_map(cam.grid);
            std::vector<vtrl::real> gray(cam.grid.size(), 0.0);
            if (bins)
                for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = (*bins)[i] / 255.0;
            vtrl::write_png_gray((fs::path(dump_maps) / (im.id + ".png")).string(), gray, cam.h, cam.w);
        }
    }
    vtrl::save_boxes(out, boxes);
    std::cout << "localized " << boxes.size() << " images -> " << out << "\n";
    return 0;
}

int cmd_train_visual(const std::string& data, const std::string& stage, const std::string& init,
                     const std::string& out, int steps, std::uint64_t seed, const std::string& boxes_path,
                     const std::string& parts_path) {
    const vtrl::Dataset ds = vtrl::load_dataset(data);
    vtrl::TrainConfig tc;
    tc.steps = steps;
    tc.seed = seed;

    std::vector<vtrl::ImageGrid> crops;
    std::vector<const vtrl::ImageGrid*> view;
    std::vector<int> labels;
    if (stage == "ori") {
        for (int i : ds.train_idx) {
            view.push_back(&ds.images[static_cast<std::size_t>(i)].image);
            labels.push_back(ds.images[static_cast<std::size_t>(i)].class_id);
        }
    } else if (stage == "object") {
        if (boxes_path.empty()) throw vtrl::config_error("--boxes required for stage object");
        const auto boxes = vtrl::load_boxes(boxes_path);
        for (int i : ds.train_idx) {
            const auto& im = ds.images[static_cast<std::size_t>(i)];
            crops.push_back(vtrl::crop(im.image, boxes.at(im.id)));
            labels.push_back(im.class_id);
        }
        for (const auto& c : crops) view.push_back(&c);
    } else if (stage == "part") {
        if (parts_path.empty()) throw vtrl::config_error("--parts required for stage part");
        const auto parts = vtrl::load_parts(parts_path);
        for (int i : ds.train_idx) {
            const auto& im = ds.images[static_cast<std::size_t>(i)];
            auto it = parts.find(im.id);
            if (it == parts.end()) continue;
            for (const auto& mp : it->second) {
                crops.push_back(vtrl::crop(im.image, mp.box));
                labels.push_back(im.class_id);
            }
        }
        for (const auto& c : crops) view.push_back(&c);
    } else {
        throw vtrl::config_error("stage must be one of ori|object|part");
    }

    vtrl::ConvClassifier model = [&] {
        if (!init.empty()) return vtrl::load_classifier(init);
        vtrl::ClassifierConfig cc{ds.image_size, ds.n_classes(), 64, stage, seed};
        return vtrl::ConvClassifier::create(cc);
    }();
    model = vtrl::train_stage(view, labels, model, stage, tc);
    vtrl::save_classifier(out, model);
    std::cout << "trained " << stage << " model on " << view.size() << " samples -> " << out << "\n";
    return 0;
}

int cmd_predict_visual(const std::string& data, const std::vector<std::string>& ckpts,
                       const std::string& weights_str, const std::string& out,
                       const std::string& boxes_path, const std::string& parts_path) {
    if (ckpts.size() != 3) throw vtrl::config_error("--ckpts expects exactly 3 checkpoints (ori object part)");
    const vtrl::Dataset ds = vtrl::load_dataset(data);
    vtrl::ConvClassifier ori = vtrl::load_classifier(ckpts[0]);
    vtrl::ConvClassifier object_net = vtrl::load_classifier(ckpts[1]);
    vtrl::ConvClassifier part_net = vtrl::load_classifier(ckpts[2]);
    const auto weights = parse_weights(weights_str);
    const auto boxes = boxes_path.empty() ? std::map<std::string, vtrl::RegionBox>{} : vtrl::load_boxes(boxes_path);
    const auto parts = parts_path.empty() ? std::map<std::string, std::vector<vtrl::MatchedPart>>{}
                                          : vtrl::load_parts(parts_path);
    json js = json::array();
    for (const auto& im : ds.images) {
        const auto s_ori = ori.predict_scores(im.image);
        const auto box = boxes.count(im.id) ? boxes.at(im.id) : im.image.full_box();
        const auto s_obj = object_net.predict_scores(vtrl::crop(im.image, box));
        std::optional<std::vector<vtrl::real>> s_part;
        if (parts.count(im.id) && !parts.at(im.id).empty()) {
            std::vector<vtrl::ImageGrid> crops;
            for (const auto& mp : parts.at(im.id)) crops.push_back(vtrl::crop(im.image, mp.box));
            s_part = vtrl::part_prediction(part_net, crops);
        }
        const auto fv = vtrl::visual_prediction(s_ori, s_obj, s_part ? &*s_part : nullptr, weights);
        js.push_back(json{{"id", im.id}, {"scores", fv}, {"prediction", vtrl::argmax_score(fv)}});
    }
    std::ofstream os(out);
    os << js.dump(2) << "\n";
    std::cout << "wrote visual scores for " << ds.images.size() << " images -> " << out << "\n";
    return 0;
}

int cmd_train_textual(const std::string& data, const std::string& out, int steps, std::uint64_t seed) {
    const vtrl::Dataset ds = vtrl::load_dataset(data);
    std::vector<vtrl::Description> descs;
    std::vector<int> labels;
    vtrl::collect_descriptions(ds, ds.train_idx, descs, labels);
    vtrl::JointModel m;
    m.vocab = vtrl::TokenVocab::build(descs);
    vtrl::JointConfig jc;
    jc.steps = steps;
    jc.seed = seed;
    jc.input_size = std::min(32, ds.image_size);
    m.theta = vtrl::VisualEncoder::create({jc.input_size, jc.dim, seed});
    m.phi = vtrl::TextualEncoder::create({m.vocab.size(), jc.emb_dim, jc.dim, seed});
    vtrl::train_joint_embedding(m, ds, ds.train_idx, jc);
    vtrl::save_joint(out, m);
    std::cout << "trained joint embedding for " << jc.steps << " steps -> " << out << "\n";
    return 0;
}

int cmd_predict_textual(const std::string& ckpt, const std::string& data, const std::string& out) {
    const vtrl::Dataset ds = vtrl::load_dataset(data);
    vtrl::JointModel m = vtrl::load_joint(ckpt);
    const auto bank = vtrl::build_text_bank(m, ds, ds.train_idx);
    json js = json::array();
    for (const auto& im : ds.images) {
        const auto [cls, scores] = vtrl::classify_embedding(m.embed_image(im.image), bank);
        js.push_back(json{{"id", im.id}, {"scores", scores}, {"prediction", cls}});
    }
    std::ofstream os(out);
    os << js.dump(2) << "\n";
    std::cout << "wrote textual scores for " << ds.images.size() << " images -> " << out << "\n";
    return 0;
}

int cmd_run(const std::string& config, bool resume, std::uint64_t seed, bool has_seed) {
    vtrl::PipelineConfig cfg = vtrl::PipelineConfig::from_json(read_json_file(config));
    if (has_seed) cfg.seed = seed;
    const vtrl::EvalReport rep = vtrl::run_pipeline(cfg, resume);
    std::cout << vtrl::render_report(rep, "md");
    return 0;
}

int cmd_report(const std::string& run_dir, const std::string& format) {
    const fs::path p = fs::path(run_dir) / "report.json";
    std::ifstream in(p);
    if (!in) throw vtrl::io_error("no report.json under " + run_dir + " (run the pipeline first)");
    const vtrl::EvalReport rep = vtrl::EvalReport::from_json(json::parse(in));
    std::cout << vtrl::render_report(rep, format);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fine-grained visual-textual representation learning pipeline"};
    app.require_subcommand(1);

    std::string config, out, data, stage, init, gan_path, patterns_path, proposals_dir, backbone;
    std::string dump_maps, joint_path, boxes_path, parts_path, weights_str = "1,1,1", run_dir, format = "json";
    std::string text_encoder, ckpt;
    std::vector<std::string> ckpts;
    std::vector<int> scales, strides;
    std::uint64_t seed = 7;
    int cap = vtrl::kProposalCap, dis_min = 4, top_k = 10, min_df = 10, steps = 600;
    double supp_min = 0.3, conf_min = 0.6;
    bool resume = false;

    auto* gen = app.add_subcommand("generate-data", "generate a synthetic glyph dataset");
    gen->add_option("--config", config, "generator spec JSON");
    gen->add_option("--out", out, "output dataset directory")->required();
    auto* gen_seed = gen->add_option("--seed", seed, "master seed");

    auto* mine = app.add_subcommand("mine-text", "mine per-class textual patterns");
    mine->add_option("--data", data)->required();
    mine->add_option("--out", out)->required();
    mine->add_option("--supp-min", supp_min);
    mine->add_option("--conf-min", conf_min);
    mine->add_option("--dis-min", dis_min);
    mine->add_option("--top-k", top_k);
    mine->add_option("--min-df", min_df);
    mine->add_option("--stopwords", config, "stop-word list path");

    auto* prop = app.add_subcommand("propose", "generate part proposals");
    prop->add_option("--data", data)->required();
    prop->add_option("--out", out)->required();
    prop->add_option("--scales", scales)->delimiter(',');
    prop->add_option("--strides", strides)->delimiter(',');
    prop->add_option("--cap", cap);

    auto* tg = app.add_subcommand("train-gan", "train the GAN-CLS matcher");
    tg->add_option("--data", data)->required();
    tg->add_option("--text-encoder", text_encoder)->required();
    tg->add_option("--out", out)->required();
    tg->add_option("--steps", steps);
    tg->add_option("--seed", seed);

    auto* mp = app.add_subcommand("match-parts", "select one proposal per textual pattern");
    mp->add_option("--gan", gan_path)->required();
    mp->add_option("--patterns", patterns_path)->required();
    mp->add_option("--proposals", proposals_dir)->required();
    mp->add_option("--data", data)->required();
    mp->add_option("--text-encoder", joint_path)->required();
    mp->add_option("--out", out)->required();

    auto* loc = app.add_subcommand("localize", "weakly-supervised object localization");
    loc->add_option("--data", data)->required();
    loc->add_option("--backbone", backbone)->required();
    loc->add_option("--out", out)->required();
    loc->add_option("--dump-maps", dump_maps);

    auto* tv = app.add_subcommand("train-visual", "train a visual-stream stage");
    tv->add_option("--data", data)->required();
    tv->add_option("--stage", stage)->required()->check(CLI::IsMember({"ori", "object", "part"}));
    tv->add_option("--init", init);
    tv->add_option("--out", out)->required();
    tv->add_option("--steps", steps);
    tv->add_option("--seed", seed);
    tv->add_option("--boxes", boxes_path);
    tv->add_option("--parts", parts_path);

    auto* pv = app.add_subcommand("predict-visual", "weighted three-model visual prediction");
    pv->add_option("--data", data)->required();
    pv->add_option("--ckpts", ckpts, "ori object part checkpoints")->expected(3)->required();
    pv->add_option("--weights", weights_str, "w1,w2,w3");
    pv->add_option("--out", out)->required();
    pv->add_option("--boxes", boxes_path);
    pv->add_option("--parts", parts_path);

    auto* tt = app.add_subcommand("train-textual", "train the joint visual-textual embedding");
    tt->add_option("--data", data)->required();
    tt->add_option("--out", out)->required();
    tt->add_option("--steps", steps);
    tt->add_option("--seed", seed);

    auto* pt = app.add_subcommand("predict-textual", "per-image per-class compatibility scores");
    pt->add_option("--ckpt", ckpt)->required();
    pt->add_option("--data", data)->required();
    pt->add_option("--out", out)->required();

    auto* run = app.add_subcommand("run", "run the full training pipeline");
    run->add_option("--config", config)->required();
    run->add_flag("--resume", resume);
    auto* run_seed = run->add_option("--seed", seed);

    auto* rep = app.add_subcommand("report", "render an EvalReport");
    rep->add_option("--run", run_dir)->required();
    rep->add_option("--format", format)->check(CLI::IsMember({"json", "csv", "md"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate_data(config, out, seed, gen_seed->count() > 0);
        if (mine->parsed()) return cmd_mine_text(data, out, supp_min, conf_min, dis_min, top_k, min_df, config);
        if (prop->parsed()) return cmd_propose(data, out, scales, strides, cap);
        if (tg->parsed()) return cmd_train_gan(data, text_encoder, out, steps, seed);
        if (mp->parsed()) return cmd_match_parts(gan_path, patterns_path, proposals_dir, data, out, joint_path);
        if (loc->parsed()) return cmd_localize(data, backbone, out, dump_maps);
        if (tv->parsed()) return cmd_train_visual(data, stage, init, out, steps, seed, boxes_path, parts_path);
        if (pv->parsed()) return cmd_predict_visual(data, ckpts, weights_str, out, boxes_path, parts_path);
        if (tt->parsed()) return cmd_train_textual(data, out, steps, seed);
        if (pt->parsed()) return cmd_predict_textual(ckpt, data, out);
        if (run->parsed()) return cmd_run(config, resume, seed, run_seed->count() > 0);
        if (rep->parsed()) return cmd_report(run_dir, format);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
