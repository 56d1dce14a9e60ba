#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vtrl/box.hpp"
#include "vtrl/common.hpp"
#include "vtrl/image.hpp"
#include "vtrl/png_io.hpp"
#include "vtrl/text.hpp"

namespace vtrl {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Palette. Signature colors are reserved for class signatures only, neutral
// colors rotate freely; keeping the pools disjoint is what plants a clean
// discriminative (attribute, part) pair per class.
// ---------------------------------------------------------------------------

struct NamedColor {
    std::string token;
    Color rgb;
};

inline const std::vector<NamedColor>& signature_colors() {
    static const std::vector<NamedColor> v = {
        {"red", {0.88, 0.10, 0.10}},   {"blue", {0.12, 0.22, 0.88}},  {"green", {0.10, 0.70, 0.15}},
        {"yellow", {0.95, 0.85, 0.10}}, {"purple", {0.55, 0.10, 0.75}}, {"orange", {0.95, 0.50, 0.05}},
        {"pink", {0.95, 0.45, 0.70}},  {"teal", {0.05, 0.65, 0.65}}};
    return v;
}

inline const std::vector<NamedColor>& neutral_colors() {
    static const std::vector<NamedColor> v = {
        {"gray", {0.52, 0.52, 0.52}}, {"tan", {0.72, 0.62, 0.46}}, {"silver", {0.68, 0.70, 0.74}}};
    return v;
}

inline const std::vector<NamedColor>& background_colors() {
    static const std::vector<NamedColor> v = {
        {"dusk", {0.14, 0.16, 0.22}}, {"slate", {0.24, 0.27, 0.32}}, {"mist", {0.33, 0.36, 0.42}}};
    return v;
}

inline Color color_of_token(const std::string& token) {
    for (const auto& c : signature_colors())
        if (c.token == token) return c.rgb;
    for (const auto& c : neutral_colors())
        if (c.token == token) return c.rgb;
    for (const auto& c : background_colors())
        if (c.token == token) return c.rgb;
    throw config_error("unknown color token: " + token);
}

inline const std::vector<std::string>& default_part_library() {
    static const std::vector<std::string> v = {"beak", "wing", "tail",  "crest", "belly",
                                               "foot", "eye",  "throat", "back",  "chest"};
    return v;
}

// ---------------------------------------------------------------------------
// Blueprint: full ground truth for one rendered glyph.
// ---------------------------------------------------------------------------

struct BlueprintPart {
    std::string name;
    std::vector<std::string> attributes;  // >= 1 token, attributes[0] is the color
    RegionBox box;
};

struct Blueprint {
    int class_id = 0;
    int image_size = 64;
    RegionBox object_box;
    std::vector<BlueprintPart> parts;  // rendered in declared order
    int background_style = 0;          // index into background_colors()

    void validate() const {
        const RegionBox bounds{0, 0, image_size, image_size};
        if (!bounds.contains(object_box) || !object_box.valid())
            throw config_error("object box outside image bounds");
        for (const auto& p : parts) {
            if (!object_box.contains(p.box) || !p.box.valid())
                throw config_error("part box outside object box: " + p.name);
            if (p.attributes.empty()) throw config_error("part without attributes: " + p.name);
        }
    }
};

inline ImageGrid render_image(const Blueprint& bp) {
    bp.validate();
    ImageGrid img(bp.image_size, bp.image_size, background_colors()[bp.background_style % 3].rgb);
    for (const auto& p : bp.parts) img.fill_rect(p.box, color_of_token(p.attributes.front()));
    return img;
}

// ---------------------------------------------------------------------------
// Generator spec and manifest.
// ---------------------------------------------------------------------------

struct GeneratorSpec {
    int n_classes = 5;
    int images_per_class = 30;
    int image_size = 64;
    std::vector<std::string> part_library = default_part_library();
    int descriptions_per_image = 10;
    std::uint64_t seed = 7;
    real signature_mention_rate = 0.9;
    real val_frac = 0.1;
    real test_frac = 0.25;
    // Degradation hooks: texture noise on images of some classes, filler-only
    // descriptions on others. Used to build complementary-split fixtures.
    std::vector<int> visual_noise_classes;
    std::vector<int> filler_text_classes;
    real noise_background = 0.85;
    real noise_body = 0.55;
    real noise_part = 0.35;

    static GeneratorSpec from_json(const json& j) {
        GeneratorSpec s;
        if (j.contains("n_classes")) s.n_classes = j.at("n_classes").get<int>();
        if (j.contains("images_per_class")) s.images_per_class = j.at("images_per_class").get<int>();
        if (j.contains("image_size")) s.image_size = j.at("image_size").get<int>();
        if (j.contains("part_library")) s.part_library = j.at("part_library").get<std::vector<std::string>>();
        if (j.contains("descriptions_per_image")) s.descriptions_per_image = j.at("descriptions_per_image").get<int>();
        if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("signature_mention_rate")) s.signature_mention_rate = j.at("signature_mention_rate").get<real>();
        if (j.contains("val_frac")) s.val_frac = j.at("val_frac").get<real>();
        if (j.contains("test_frac")) s.test_frac = j.at("test_frac").get<real>();
        if (j.contains("visual_noise_classes")) s.visual_noise_classes = j.at("visual_noise_classes").get<std::vector<int>>();
        if (j.contains("filler_text_classes")) s.filler_text_classes = j.at("filler_text_classes").get<std::vector<int>>();
        if (j.contains("noise_background")) s.noise_background = j.at("noise_background").get<real>();
        if (j.contains("noise_body")) s.noise_body = j.at("noise_body").get<real>();
        if (j.contains("noise_part")) s.noise_part = j.at("noise_part").get<real>();
        return s;
    }
    json to_json() const {
        return json{{"n_classes", n_classes},
                    {"images_per_class", images_per_class},
                    {"image_size", image_size},
                    {"part_library", part_library},
                    {"descriptions_per_image", descriptions_per_image},
                    {"seed", seed},
                    {"signature_mention_rate", signature_mention_rate},
                    {"val_frac", val_frac},
                    {"test_frac", test_frac},
                    {"visual_noise_classes", visual_noise_classes},
                    {"filler_text_classes", filler_text_classes},
                    {"noise_background", noise_background},
                    {"noise_body", noise_body},
                    {"noise_part", noise_part}};
    }
};

struct ClassInfo {
    int id = 0;
    std::string name;
    std::vector<std::string> planted_bigram;  // {color token, part token}
    std::string signature_part;
};

struct ManifestImage {
    std::string id;
    int class_id = 0;
    std::string image_path;
    std::string text_path;
};

struct DatasetManifest {
    std::vector<ClassInfo> classes;
    std::vector<ManifestImage> images;
    std::vector<std::string> train_ids, val_ids, test_ids;
    int image_size = 64;
    int descriptions_per_image = 10;
    json generator;  // echo of the spec

    json to_json() const {
        json jc = json::array();
        for (const auto& c : classes)
            jc.push_back(json{{"id", c.id},
                              {"name", c.name},
                              {"planted_bigram", c.planted_bigram},
                              {"signature_part", c.signature_part}});
        json ji = json::array();
        for (const auto& im : images)
            ji.push_back(json{{"id", im.id},
                              {"class_id", im.class_id},
                              {"image", im.image_path},
                              {"text", im.text_path}});
        return json{{"classes", jc},
                    {"images", ji},
                    {"splits", json{{"train", train_ids}, {"val", val_ids}, {"test", test_ids}}},
                    {"image_size", image_size},
                    {"descriptions_per_image", descriptions_per_image},
                    {"generator", generator}};
    }
    static DatasetManifest from_json(const json& j) {
        DatasetManifest m;
        for (const auto& c : j.at("classes")) {
            ClassInfo ci;
            ci.id = c.at("id").get<int>();
            ci.name = c.at("name").get<std::string>();
            ci.planted_bigram = c.at("planted_bigram").get<std::vector<std::string>>();
            ci.signature_part = c.at("signature_part").get<std::string>();
            m.classes.push_back(std::move(ci));
        }
        for (const auto& im : j.at("images")) {
            ManifestImage mi;
            mi.id = im.at("id").get<std::string>();
            mi.class_id = im.at("class_id").get<int>();
            mi.image_path = im.at("image").get<std::string>();
            mi.text_path = im.at("text").get<std::string>();
            m.images.push_back(std::move(mi));
        }
        m.train_ids = j.at("splits").at("train").get<std::vector<std::string>>();
        m.val_ids = j.at("splits").at("val").get<std::vector<std::string>>();
        m.test_ids = j.at("splits").at("test").get<std::vector<std::string>>();
        m.image_size = j.at("image_size").get<int>();
        m.descriptions_per_image = j.at("descriptions_per_image").get<int>();
        m.generator = j.at("generator");
        return m;
    }
};

// ---------------------------------------------------------------------------
// Class signatures: diagonal (part, color) assignment keeps both the part and
// the color distinct across classes while pairs stay unique.
// ---------------------------------------------------------------------------

struct ClassSignature {
    std::string part;
    std::string color;
};

inline std::vector<ClassSignature> assign_signatures(const GeneratorSpec& spec) {
    const auto& sig = signature_colors();
    const int n_parts = static_cast<int>(spec.part_library.size());
    const int n_colors = static_cast<int>(sig.size());
    if (n_parts == 0) throw config_error("part_library is empty");
    std::set<std::pair<std::string, std::string>> used;
    std::vector<ClassSignature> out;
    for (int c = 0; c < spec.n_classes; ++c) {
        ClassSignature s{spec.part_library[c % n_parts], sig[c % n_colors].token};
        if (!used.insert({s.part, s.color}).second)
            throw config_error("part_library too small for a unique attribute combination per class");
        out.push_back(std::move(s));
    }
    return out;
}

// Common-part pool: parts never used as a signature, so their mentions carry
// no class information.
inline std::vector<std::string> common_part_pool(const GeneratorSpec& spec,
                                                 const std::vector<ClassSignature>& sigs) {
    std::set<std::string> reserved;
    for (const auto& s : sigs) reserved.insert(s.part);
    std::vector<std::string> pool;
    for (const auto& p : spec.part_library)
        if (!reserved.count(p) && p != "body") pool.push_back(p);
    return pool;
}

namespace detail {

inline int rng_int(Rng& rng, int lo, int hi) {  // inclusive
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}
inline real rng_real(Rng& rng) { return std::uniform_real_distribution<real>(0.0, 1.0)(rng); }

template <typename T>
const T& rng_pick(Rng& rng, const std::vector<T>& v) {
    return v[static_cast<std::size_t>(rng_int(rng, 0, static_cast<int>(v.size()) - 1))];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Blueprint construction. Geometry: a snug object box holding a neutral body,
// one large signature part (the class evidence) and two small common parts.
// ---------------------------------------------------------------------------

inline Blueprint make_blueprint(const GeneratorSpec& spec, const std::vector<ClassSignature>& sigs,
                                const std::vector<std::string>& common_pool, int class_id,
                                Rng& rng) {
    const int is = spec.image_size;
    // The signature part is the class evidence; keeping it at ~3/4 of the
    // object side keeps part-tight windows and the object box within an
    // IoU >= 0.5 of each other from both directions.
    const int obj = std::max(22, is * 26 / 64);   // object side
    const int sig = std::max(14, is * 20 / 64);   // signature part side
    const int small = std::max(4, is * 7 / 64);   // common part side

    Blueprint bp;
    bp.class_id = class_id;
    bp.image_size = is;
    bp.background_style = detail::rng_int(rng, 0, 2);

    const int ox = detail::rng_int(rng, 2, is - obj - 2);
    const int oy = detail::rng_int(rng, 2, is - obj - 2);
    bp.object_box = RegionBox{ox, oy, ox + obj, oy + obj};

    const std::string body_color = detail::rng_pick(rng, neutral_colors()).token;
    bp.parts.push_back(BlueprintPart{"body", {body_color}, bp.object_box});

    // Two small common parts in opposite corners of the object.
    std::vector<std::string> pool = common_pool;
    for (int i = 0; i < 2 && !pool.empty(); ++i) {
        const int pi = detail::rng_int(rng, 0, static_cast<int>(pool.size()) - 1);
        const std::string pname = pool[static_cast<std::size_t>(pi)];
        pool.erase(pool.begin() + pi);
        const std::string pcolor = detail::rng_pick(rng, neutral_colors()).token;
        const int px = (i == 0) ? ox + 1 : ox + obj - small - 1;
        const int py = (i == 0) ? oy + 1 : oy + obj - small - 1;
        bp.parts.push_back(BlueprintPart{pname, {pcolor}, RegionBox{px, py, px + small, py + small}});
    }

    // Signature part drawn last so it is never occluded.
    const ClassSignature& s = sigs[static_cast<std::size_t>(class_id)];
    const int margin = 2;
    const int sx = ox + detail::rng_int(rng, margin, obj - sig - margin);
    const int sy = oy + detail::rng_int(rng, margin, obj - sig - margin);
    bp.parts.push_back(BlueprintPart{s.part, {s.color}, RegionBox{sx, sy, sx + sig, sy + sig}});
    return bp;
}

// Texture noise: pixels flip to random colors, heaviest on background, lighter
// on the body, lightest on parts so crops stay informative.
inline void apply_texture_noise(ImageGrid& img, const Blueprint& bp, const GeneratorSpec& spec,
                                Rng& rng) {
    auto region_prob = [&](int x, int y) {
        for (std::size_t i = bp.parts.size(); i-- > 1;) {  // parts above body
            const auto& b = bp.parts[i].box;
            if (x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1) return spec.noise_part;
        }
        const auto& o = bp.object_box;
        if (x >= o.x0 && x < o.x1 && y >= o.y0 && y < o.y1) return spec.noise_body;
        return spec.noise_background;
    };
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const real p = region_prob(x, y);
            const real u = detail::rng_real(rng);
            const real r = detail::rng_real(rng), g = detail::rng_real(rng), b = detail::rng_real(rng);
            if (u < p) {
                img.at(y, x, 0) = r;
                img.at(y, x, 1) = g;
                img.at(y, x, 2) = b;
            }
        }
}

// ---------------------------------------------------------------------------
// Description templates. Attribute-part pairs always appear as adjacent
// tokens; other template words sit at least dis_min tokens away from them so
// filler does not leak into mined patterns.
// ---------------------------------------------------------------------------

// Every non-stopword filler slot draws from a pool of >= 4 alternatives, so no
// filler word can reach supp_min alongside a planted pair within the distance
// window; mined patterns stay the planted (attribute, part) pairs.
namespace detail {

inline const std::vector<std::string>& size_words() {
    static const std::vector<std::string> v = {"small", "large", "plump", "slender"};
    return v;
}
inline const std::vector<std::string>& scene_words() {
    static const std::vector<std::string> v = {"frame", "photo", "view", "picture"};
    return v;
}
inline const std::vector<std::string>& place_words() {
    static const std::vector<std::string> v = {"upper", "lower", "left", "right", "middle"};
    return v;
}
inline const std::vector<std::string>& verb_words() {
    static const std::vector<std::string> v = {"shows", "bears", "keeps", "carries"};
    return v;
}
inline const std::vector<std::string>& prep_words() {
    static const std::vector<std::string> v = {"near", "toward", "beside", "above"};
    return v;
}
inline const std::vector<std::string>& verb2_words() {
    static const std::vector<std::string> v = {"presents", "offers", "frames", "holds"};
    return v;
}
inline const std::vector<std::string>& sep_words() {
    static const std::vector<std::string> v = {"set", "kept", "placed", "laid"};
    return v;
}
inline const std::vector<std::string>& away_words() {
    static const std::vector<std::string> v = {"away", "apart", "aside", "clear"};
    return v;
}
inline const std::vector<std::string>& rest_words() {
    static const std::vector<std::string> v = {"rests", "stays", "waits", "lingers"};
    return v;
}

inline std::vector<std::string> pair_line(Rng& rng, const std::string& color,
                                          const std::string& part) {
    return {"the", rng_pick(rng, size_words()), "glyph", "in", "this", rng_pick(rng, scene_words()),
            rng_pick(rng, verb_words()), "one", color, part,
            rng_pick(rng, prep_words()), "the", rng_pick(rng, place_words()), "side"};
}

inline std::vector<std::string> double_pair_line(Rng& rng, const std::string& c1,
                                                 const std::string& p1, const std::string& c2,
                                                 const std::string& p2) {
    return {"this", rng_pick(rng, scene_words()), rng_pick(rng, verb2_words()), "one", c1, p1,
            rng_pick(rng, sep_words()), rng_pick(rng, away_words()), "from", "one", c2, p2,
            "at", "the", rng_pick(rng, place_words()), "edge"};
}

inline std::vector<std::string> filler_line(Rng& rng) {
    return {"the", rng_pick(rng, size_words()), "figure", rng_pick(rng, rest_words()), "in",
            "this", rng_pick(rng, scene_words()), rng_pick(rng, prep_words()), "the",
            rng_pick(rng, place_words()), "region", "of", "the", "scene"};
}

}  // namespace detail

inline std::vector<Description> generate_descriptions(const Blueprint& bp, int n, Rng& rng,
                                                      real signature_rate = 0.9,
                                                      bool filler_only = false) {
    if (n < 1) throw config_error("need at least one description");
    std::vector<Description> out;
    const BlueprintPart& sig = bp.parts.back();
    const BlueprintPart& body = bp.parts.front();
    // First ceil(rate*n) lines mention the signature pair, so its per-image
    // document frequency is deterministic, not merely expected.
    const int n_sig = std::min(n, static_cast<int>(std::ceil(signature_rate * n)));
    for (int i = 0; i < n; ++i) {
        Description d;
        if (filler_only) {
            d.tokens = detail::filler_line(rng);
        } else if (i < n_sig) {
            if (bp.parts.size() > 2 && detail::rng_real(rng) < 0.4) {
                const auto& common = bp.parts[1 + static_cast<std::size_t>(detail::rng_int(
                                                     rng, 0, static_cast<int>(bp.parts.size()) - 3))];
                d.tokens = detail::double_pair_line(rng, sig.attributes[0], sig.name,
                                                    common.attributes[0], common.name);
            } else {
                d.tokens = detail::pair_line(rng, sig.attributes[0], sig.name);
            }
        } else {
            d.tokens = detail::pair_line(rng, body.attributes[0], body.name);
        }
        out.push_back(std::move(d));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset on disk and in memory.
// ---------------------------------------------------------------------------

struct DatasetImage {
    std::string id;
    int class_id = 0;
    ImageGrid image;
    std::vector<Description> descriptions;
    std::string image_path, text_path;
};

struct Dataset {
    std::vector<ClassInfo> classes;
    std::vector<DatasetImage> images;
    std::vector<int> train_idx, val_idx, test_idx;  // indices into images
    int image_size = 64;
    int descriptions_per_image = 10;
    std::unordered_map<std::string, int> index_by_id;

    int n_classes() const { return static_cast<int>(classes.size()); }
    const DatasetImage& by_id(const std::string& id) const {
        auto it = index_by_id.find(id);
        if (it == index_by_id.end()) throw io_error("unknown image id: " + id);
        return images[static_cast<std::size_t>(it->second)];
    }
};

struct GroundTruth {
    RegionBox object_box;
    std::vector<BlueprintPart> parts;

    std::optional<RegionBox> part_box(const std::string& name) const {
        for (const auto& p : parts)
            if (p.name == name) return p.box;
        return std::nullopt;
    }
};

namespace detail {

inline std::string class_name(int c) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "species_%02d", c);
    return buf;
}
inline std::string image_name(int c, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "c%d_i%03d", c, i);
    return buf;
}

inline void write_text_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw io_error("cannot write " + p.string());
    out << content;
}

}  // namespace detail

// Ground truth lives in a sidecar; the pipeline never reads it, tests do.
inline GroundTruth load_ground_truth(const std::string& dataset_dir, const std::string& image_id) {
    const fs::path p = fs::path(dataset_dir) / "gt" / (image_id + ".json");
    std::ifstream in(p);
    if (!in) throw io_error("missing ground truth: " + p.string());
    json j = json::parse(in);
    GroundTruth gt;
    const auto& ob = j.at("object");
    gt.object_box = RegionBox{ob.at(0).get<int>(), ob.at(1).get<int>(), ob.at(2).get<int>(), ob.at(3).get<int>()};
    for (const auto& jp : j.at("parts")) {
        BlueprintPart p2;
        p2.name = jp.at("name").get<std::string>();
        p2.attributes = jp.at("attributes").get<std::vector<std::string>>();
        const auto& b = jp.at("box");
        p2.box = RegionBox{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
        gt.parts.push_back(std::move(p2));
    }
    return gt;
}

inline DatasetManifest generate_dataset(const GeneratorSpec& spec, const std::string& out_dir) {
    if (spec.n_classes < 2) throw config_error("need at least 2 classes");
    if (spec.image_size < 32) throw config_error("image_size must be >= 32");
    if (spec.images_per_class < 4) throw config_error("need at least 4 images per class");
    const auto sigs = assign_signatures(spec);
    const auto common_pool = common_part_pool(spec, sigs);
    if (common_pool.empty())
        throw config_error("part_library too small: no common parts left after signatures");

    const fs::path root(out_dir);
    fs::create_directories(root / "images");
    fs::create_directories(root / "text");
    fs::create_directories(root / "gt");

    DatasetManifest m;
    m.image_size = spec.image_size;
    m.descriptions_per_image = spec.descriptions_per_image;
    m.generator = spec.to_json();
    for (int c = 0; c < spec.n_classes; ++c)
        m.classes.push_back(ClassInfo{c, detail::class_name(c),
                                      {sigs[static_cast<std::size_t>(c)].color, sigs[static_cast<std::size_t>(c)].part},
                                      sigs[static_cast<std::size_t>(c)].part});

    auto in_list = [](const std::vector<int>& v, int c) {
        return std::find(v.begin(), v.end(), c) != v.end();
    };

    const int ipc = spec.images_per_class;
    const int n_test = std::max(1, static_cast<int>(std::lround(spec.test_frac * ipc)));
    const int n_val = std::max(1, static_cast<int>(std::lround(spec.val_frac * ipc)));
    if (n_test + n_val >= ipc) throw config_error("val/test fractions leave no training images");

    for (int c = 0; c < spec.n_classes; ++c) {
        const std::string cname = detail::class_name(c);
        fs::create_directories(root / "images" / cname);
        fs::create_directories(root / "text" / cname);
        for (int i = 0; i < ipc; ++i) {
            const std::string id = detail::image_name(c, i);
            // One independent stream per image: generation order never matters.
            Rng rng = make_rng(spec.seed, "img:" + id);
            const Blueprint bp = make_blueprint(spec, sigs, common_pool, c, rng);
            ImageGrid img = render_image(bp);
            if (in_list(spec.visual_noise_classes, c)) apply_texture_noise(img, bp, spec, rng);
            auto descs = generate_descriptions(bp, spec.descriptions_per_image, rng,
                                               spec.signature_mention_rate,
                                               in_list(spec.filler_text_classes, c));

            const std::string img_rel = "images/" + cname + "/" + id + ".png";
            const std::string txt_rel = "text/" + cname + "/" + id + ".txt";
            write_png((root / img_rel).string(), img);
            std::string text;
            for (const auto& d : descs) text += join_tokens(d.tokens) + "\n";
            detail::write_text_file(root / txt_rel, text);

            json jparts = json::array();
            for (const auto& p : bp.parts)
                jparts.push_back(json{{"name", p.name},
                                      {"attributes", p.attributes},
                                      {"box", {p.box.x0, p.box.y0, p.box.x1, p.box.y1}}});
            json jgt{{"object", {bp.object_box.x0, bp.object_box.y0, bp.object_box.x1, bp.object_box.y1}},
                     {"parts", jparts},
                     {"class_id", c}};
            detail::write_text_file(root / "gt" / (id + ".json"), jgt.dump(2) + "\n");

            m.images.push_back(ManifestImage{id, c, img_rel, txt_rel});
            if (i < ipc - n_test - n_val)
                m.train_ids.push_back(id);
            else if (i < ipc - n_test)
                m.val_ids.push_back(id);
            else
                m.test_ids.push_back(id);
        }
    }
    detail::write_text_file(root / "manifest.json", m.to_json().dump(2) + "\n");
    return m;
}

inline Dataset load_dataset(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream in(root / "manifest.json");
    if (!in) throw io_error("missing manifest.json under " + dir);
    const DatasetManifest m = DatasetManifest::from_json(json::parse(in));

    Dataset ds;
    ds.classes = m.classes;
    ds.image_size = m.image_size;
    ds.descriptions_per_image = m.descriptions_per_image;
    for (const auto& mi : m.images) {
        DatasetImage di;
        di.id = mi.id;
        di.class_id = mi.class_id;
        di.image_path = mi.image_path;
        di.text_path = mi.text_path;
        const fs::path ip = root / mi.image_path;
        if (!fs::exists(ip)) throw io_error("missing image file for id " + mi.id + ": " + ip.string());
        di.image = read_png(ip.string());
        std::ifstream tin(root / mi.text_path);
        if (!tin) throw io_error("missing text file for id " + mi.id);
        std::string line;
        while (std::getline(tin, line)) {
            if (line.empty()) continue;
            Description d;
            d.tokens = tokenize(line);
            d.image_id = mi.id;
            di.descriptions.push_back(std::move(d));
        }
        if (static_cast<int>(di.descriptions.size()) != m.descriptions_per_image)
            throw format_error((root / mi.text_path).string() + ": expected " +
                               std::to_string(m.descriptions_per_image) + " descriptions, found " +
                               std::to_string(di.descriptions.size()));
        ds.index_by_id[di.id] = static_cast<int>(ds.images.size());
        ds.images.push_back(std::move(di));
    }
    auto resolve = [&](const std::vector<std::string>& ids) {
        std::vector<int> out;
        for (const auto& id : ids) {
            auto it = ds.index_by_id.find(id);
            if (it == ds.index_by_id.end()) throw format_error("split references unknown id: " + id);
            out.push_back(it->second);
        }
        return out;
    };
    ds.train_idx = resolve(m.train_ids);
    ds.val_idx = resolve(m.val_ids);
    ds.test_idx = resolve(m.test_ids);
    if (ds.train_idx.size() + ds.val_idx.size() + ds.test_idx.size() != ds.images.size())
        throw format_error("splits do not cover all images");
    return ds;
}

// All descriptions of a set of images, flattened, with per-description labels.
inline void collect_descriptions(const Dataset& ds, const std::vector<int>& image_idx,
                                 std::vector<Description>& descs, std::vector<int>& labels) {
    for (int i : image_idx) {
        const auto& im = ds.images[static_cast<std::size_t>(i)];
        for (const auto& d : im.descriptions) {
            descs.push_back(d);
            labels.push_back(im.class_id);
        }
    }
}

}  // namespace vtrl
