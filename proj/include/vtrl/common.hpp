#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace vtrl {

using real = double;

// Error hierarchy. Every failure mode named by the module contracts maps to
// one of these; callers catch vtrl::error when they only care that it failed.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};
struct config_error : error {
    explicit config_error(const std::string& msg) : error("config: " + msg) {}
};
struct format_error : error {
    explicit format_error(const std::string& msg) : error("format: " + msg) {}
};
struct io_error : error {
    explicit io_error(const std::string& msg) : error("io: " + msg) {}
};
struct shape_error : error {
    explicit shape_error(const std::string& msg) : error("shape: " + msg) {}
};
struct train_error : error {
    explicit train_error(const std::string& msg) : error("training: " + msg) {}
};

inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// All randomness funnels through one master seed; each consumer derives its
// own stream from (master, tag) so stages stay independently reproducible.
inline std::uint64_t derive_seed(std::uint64_t master, const std::string& tag) {
    return splitmix64(master ^ fnv1a64(tag));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, const std::string& tag) {
    return Rng(derive_seed(master, tag));
}

}  // namespace vtrl
