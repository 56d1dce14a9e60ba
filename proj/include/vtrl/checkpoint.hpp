#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtrl/common.hpp"
#include "vtrl/nn.hpp"

namespace vtrl {

// Versioned binary checkpoint: magic, version, JSON header (kind, metadata,
// tensor manifest), then raw double buffers in manifest order.
constexpr char kCkptMagic[8] = {'V', 'T', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

inline void save_checkpoint(const std::string& path, const std::string& kind,
                            const nlohmann::json& meta, const nn::Params& params) {
    nlohmann::json header;
    header["kind"] = kind;
    header["meta"] = meta;
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& p : params) tensors.push_back({{"name", p.name}, {"size", p.n}});
    header["tensors"] = tensors;
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write checkpoint: " + path);
    out.write(kCkptMagic, sizeof(kCkptMagic));
    const std::uint32_t version = kCkptVersion;
    const std::uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& p : params)
        out.write(reinterpret_cast<const char*>(p.w), static_cast<std::streamsize>(p.n * sizeof(real)));
    if (!out) throw io_error("short write on checkpoint: " + path);
}

struct Checkpoint {
    std::string kind;
    nlohmann::json meta;
    std::map<std::string, std::vector<real>> tensors;

    // Copies stored tensors into live parameters, matched by name and size.
    void apply(const nn::Params& params) const {
        for (const auto& p : params) {
            auto it = tensors.find(p.name);
            if (it == tensors.end()) throw format_error("checkpoint missing tensor: " + p.name);
            if (it->second.size() != p.n)
                throw format_error("checkpoint tensor size mismatch for " + p.name);
            std::memcpy(p.w, it->second.data(), p.n * sizeof(real));
        }
    }
};

inline Checkpoint load_checkpoint(const std::string& path, const std::string& expected_kind = "") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw format_error("not a vtrl checkpoint: " + path);
    std::uint32_t version = 0;
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!in || version != kCkptVersion) throw format_error("unsupported checkpoint version in " + path);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    nlohmann::json header = nlohmann::json::parse(hs);

    Checkpoint ck;
    ck.kind = header.at("kind").get<std::string>();
    ck.meta = header.at("meta");
    if (!expected_kind.empty() && ck.kind != expected_kind)
        throw format_error("checkpoint kind mismatch: expected " + expected_kind + ", got " + ck.kind);
    for (const auto& t : header.at("tensors")) {
        const std::string name = t.at("name").get<std::string>();
        const std::uint64_t n = t.at("size").get<std::uint64_t>();
        std::vector<real> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(real)));
        if (!in) throw format_error("truncated checkpoint: " + path);
        ck.tensors.emplace(name, std::move(buf));
    }
    return ck;
}

}  // namespace vtrl
