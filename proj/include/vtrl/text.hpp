#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "vtrl/common.hpp"

namespace vtrl {

// One single-sentence description: lowercase space-separated tokens.
struct Description {
    std::vector<std::string> tokens;
    std::string image_id;
};

inline std::string normalize_token(const std::string& raw) {
    std::string t;
    t.reserve(raw.size());
    for (char c : raw) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '-' || c == '_') t.push_back(static_cast<char>(std::tolower(u)));
    }
    return t;
}

inline std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string raw;
    while (is >> raw) {
        std::string t = normalize_token(raw);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string s;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) s.push_back(' ');
        s += tokens[i];
    }
    return s;
}

// Shipped as resources/stopwords.txt; this embedded copy is the fallback so
// the library works without a resource path.
inline const std::vector<std::string>& default_stopword_list() {
    static const std::vector<std::string> words = {
        "a",    "an",   "and",  "are", "as",   "at",   "be",   "by",   "for", "from",
        "has",  "have", "in",   "is",  "it",   "its",  "of",   "on",   "one", "or",
        "that", "the",  "this", "to",  "was",  "were", "with", "which", "there", "very"};
    return words;
}

inline std::unordered_set<std::string> default_stopwords() {
    const auto& w = default_stopword_list();
    return {w.begin(), w.end()};
}

inline std::unordered_set<std::string> load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open stop-word list: " + path);
    std::unordered_set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = normalize_token(line);
        if (!t.empty()) out.insert(t);
    }
    return out;
}

}  // namespace vtrl
