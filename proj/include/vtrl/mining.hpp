#pragma once

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vtrl/common.hpp"
#include "vtrl/text.hpp"

namespace vtrl {

struct undefined_confidence : error {
    undefined_confidence() : error("confidence undefined: itemset has zero support") {}
};

// Vocabulary over the description corpus: stop words and punctuation removed,
// every retained word appears in at least min_df descriptions. No duplicates;
// word order is first appearance in the corpus scan.
struct Vocabulary {
    std::vector<std::string> words;
    std::unordered_map<std::string, int> index;
    int min_df = 10;

    int id_of(const std::string& w) const {
        auto it = index.find(w);
        return it == index.end() ? -1 : it->second;
    }
    int size() const { return static_cast<int>(words.size()); }
};

// Class labels ride along as virtual items so Eq. 2 runs in the same
// containment machinery as Eq. 1. Virtual items carry no positions.
constexpr int kClassItemBase = 1 << 24;

inline int class_item_id(int class_id) { return kClassItemBase + class_id; }
inline bool is_class_item(int item) { return item >= kClassItemBase; }

// One transaction per description: the set of in-vocabulary word ids plus all
// token positions of each word (positions feed the distance constraint).
struct Transaction {
    std::vector<int> items;  // sorted unique word ids
    std::unordered_map<int, std::vector<int>> positions;
    int class_item = -1;  // class id

    bool contains(int item) const {
        if (is_class_item(item)) return item == class_item_id(class_item);
        return std::binary_search(items.begin(), items.end(), item);
    }
};

struct MiningThresholds {
    real supp_min = 0.3;
    real conf_min = 0.6;
    int dis_min = 4;
    int max_pattern_size = 4;

    void validate() const {
        if (!(supp_min > 0.0 && supp_min <= 1.0)) throw config_error("supp_min must be in (0,1]");
        if (!(conf_min > 0.0 && conf_min <= 1.0)) throw config_error("conf_min must be in (0,1]");
        if (dis_min < 2) throw config_error("dis_min must be >= 2");
        if (max_pattern_size < 2) throw config_error("max_pattern_size must be >= 2");
    }
};

// Mined itemset with its per-class support and global confidence.
struct TextualPattern {
    std::vector<int> words;  // sorted word ids
    int class_id = -1;
    real support = 0.0;
    real confidence = 0.0;
};

inline Vocabulary build_vocabulary(const std::vector<Description>& corpus, int min_df,
                                   const std::unordered_set<std::string>& stopwords) {
    if (corpus.empty()) throw config_error("empty corpus");
    std::unordered_map<std::string, int> df;
    std::vector<std::string> order;  // first-appearance order
    for (const auto& d : corpus) {
        std::unordered_set<std::string> seen;
        for (const auto& t : d.tokens) {
            if (stopwords.count(t)) continue;
            if (seen.insert(t).second) {
                auto [it, fresh] = df.emplace(t, 0);
                if (fresh) order.push_back(t);
                ++it->second;
            }
        }
    }
    Vocabulary v;
    v.min_df = min_df;
    for (const auto& w : order) {
        if (df[w] >= min_df) {
            v.index.emplace(w, static_cast<int>(v.words.size()));
            v.words.push_back(w);
        }
    }
    if (v.words.empty()) throw config_error("vocabulary empty after filtering (min_df too high?)");
    return v;
}

inline Transaction to_transaction(const Description& d, const Vocabulary& vocab, int class_id) {
    Transaction t;
    t.class_item = class_id;
    for (std::size_t i = 0; i < d.tokens.size(); ++i) {
        const int id = vocab.id_of(d.tokens[i]);
        if (id < 0) continue;  // out-of-vocabulary tokens dropped
        auto [it, fresh] = t.positions.emplace(id, std::vector<int>{});
        it->second.push_back(static_cast<int>(i));
        if (fresh) t.items.push_back(id);
    }
    std::sort(t.items.begin(), t.items.end());
    return t;
}

inline std::vector<Transaction> to_transactions(const std::vector<Description>& descriptions,
                                                const Vocabulary& vocab,
                                                const std::vector<int>& class_labels) {
    if (descriptions.size() != class_labels.size()) throw shape_error("descriptions/labels length mismatch");
    std::vector<Transaction> out;
    out.reserve(descriptions.size());
    for (std::size_t i = 0; i < descriptions.size(); ++i)
        out.push_back(to_transaction(descriptions[i], vocab, class_labels[i]));
    return out;
}

// A transaction supports an itemset under the distance constraint when some
// choice of one position per word keeps every pairwise gap below dis_min.
// Max pairwise gap of a choice equals max-min, so a sliding window over the
// merged position list decides it exactly.
inline bool supports_windowed(const Transaction& t, const std::vector<int>& itemset, int dis_min) {
    std::vector<std::pair<int, int>> pos;  // (token position, itemset slot)
    int positional = 0;
    for (std::size_t s = 0; s < itemset.size(); ++s) {
        const int item = itemset[s];
        if (!t.contains(item)) return false;
        auto it = t.positions.find(item);
        if (it == t.positions.end()) continue;  // virtual item: no position to constrain
        ++positional;
        for (int p : it->second) pos.emplace_back(p, static_cast<int>(s));
    }
    if (positional <= 1) return true;
    std::sort(pos.begin(), pos.end());
    std::unordered_map<int, int> in_window;
    std::size_t lo = 0;
    int covered = 0;
    for (std::size_t hi = 0; hi < pos.size(); ++hi) {
        if (++in_window[pos[hi].second] == 1) ++covered;
        while (pos[hi].first - pos[lo].first >= dis_min) {
            if (--in_window[pos[lo].second] == 0) --covered;
            ++lo;
        }
        if (covered == positional) return true;
    }
    return false;
}

inline bool supports_plain(const Transaction& t, const std::vector<int>& itemset) {
    for (int item : itemset)
        if (!t.contains(item)) return false;
    return true;
}

// Eq. 1: fraction of transactions containing the itemset; windowed counting
// additionally requires the positional window (dis constraint).
inline real support(const std::vector<int>& itemset, const std::vector<Transaction>& transactions,
                    bool windowed = false, int dis_min = 4) {
    if (itemset.empty()) throw config_error("support of empty itemset");
    if (transactions.empty()) throw config_error("support over empty transaction set");
    std::size_t n = 0;
    for (const auto& t : transactions) {
        const bool hit = windowed ? supports_windowed(t, itemset, dis_min) : supports_plain(t, itemset);
        if (hit) ++n;
    }
    return static_cast<real>(n) / static_cast<real>(transactions.size());
}

// Eq. 2: supp(itemset + class item) / supp(itemset).
inline real confidence(const std::vector<int>& itemset, int class_id,
                       const std::vector<Transaction>& transactions, bool windowed = false,
                       int dis_min = 4) {
    const real denom = support(itemset, transactions, windowed, dis_min);
    if (denom == 0.0) throw undefined_confidence();
    std::vector<int> with_class = itemset;
    with_class.push_back(class_item_id(class_id));
    return support(with_class, transactions, windowed, dis_min) / denom;
}

inline std::vector<int> top_keyword_ids(const std::vector<Description>& class_corpus,
                                        const Vocabulary& vocab, int k) {
    if (k < 1) throw config_error("top_keywords: k must be >= 1");
    std::vector<long long> counts(vocab.size(), 0);
    for (const auto& d : class_corpus)
        for (const auto& t : d.tokens) {
            const int id = vocab.id_of(t);
            if (id >= 0) ++counts[id];
        }
    std::vector<int> ids;
    for (int i = 0; i < vocab.size(); ++i)
        if (counts[i] > 0) ids.push_back(i);
    // Most frequent first; ties broken by vocabulary order.
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return counts[a] > counts[b]; });
    if (static_cast<int>(ids.size()) < k)
        std::cerr << "[vtrl] warn: only " << ids.size() << " distinct words for top-" << k << " keywords\n";
    if (static_cast<int>(ids.size()) > k) ids.resize(k);
    return ids;
}

inline std::vector<std::string> top_keywords(const std::vector<Description>& class_corpus,
                                             const Vocabulary& vocab, int k) {
    std::vector<std::string> out;
    for (int id : top_keyword_ids(class_corpus, vocab, k)) out.push_back(vocab.words[id]);
    return out;
}

namespace detail {

inline std::vector<std::size_t> class_view(const std::vector<Transaction>& all, int class_id) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < all.size(); ++i)
        if (all[i].class_item == class_id) idx.push_back(i);
    return idx;
}

inline real windowed_support_over(const std::vector<Transaction>& all,
                                  const std::vector<std::size_t>& view,
                                  const std::vector<int>& itemset, int dis_min) {
    std::size_t n = 0;
    for (std::size_t i : view)
        if (supports_windowed(all[i], itemset, dis_min)) ++n;
    return static_cast<real>(n) / static_cast<real>(view.size());
}

}  // namespace detail

// Level-wise Apriori over one class's transactions, restricted to that class's
// top-k keywords. Support (Eq. 1, windowed) is counted within the class, which
// is what makes per-class mining recover class-specific phrases; confidence
// (Eq. 2) is evaluated over the full database, else it would be identically 1.
// Anti-monotonicity of windowed support justifies the level-wise pruning.
inline std::vector<TextualPattern> mine_patterns(const std::vector<Transaction>& all_transactions,
                                                 int class_id, const std::vector<int>& keyword_ids,
                                                 const MiningThresholds& th) {
    th.validate();
    const auto view = detail::class_view(all_transactions, class_id);
    std::vector<TextualPattern> result;
    if (view.empty() || keyword_ids.empty()) return result;

    std::vector<int> keys = keyword_ids;
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

    // L1 seeds. Singletons are never emitted but anchor the join.
    std::vector<std::vector<int>> level;
    std::map<std::vector<int>, real> supp_of;
    for (int id : keys) {
        const std::vector<int> single{id};
        const real s = detail::windowed_support_over(all_transactions, view, single, th.dis_min);
        if (s > th.supp_min) {
            level.push_back(single);
            supp_of[single] = s;
        }
    }

    for (int size = 2; size <= th.max_pattern_size && level.size() >= 2; ++size) {
        // Join step: merge itemsets sharing a (size-2)-prefix.
        std::vector<std::vector<int>> candidates;
        for (std::size_t i = 0; i < level.size(); ++i) {
            for (std::size_t j = i + 1; j < level.size(); ++j) {
                if (!std::equal(level[i].begin(), level[i].end() - 1, level[j].begin(), level[j].end() - 1))
                    continue;
                std::vector<int> cand = level[i];
                cand.push_back(level[j].back());
                // Prune step: every (size-1)-subset must be frequent.
                bool ok = true;
                for (std::size_t drop = 0; ok && drop + 2 < cand.size(); ++drop) {
                    std::vector<int> sub;
                    for (std::size_t m = 0; m < cand.size(); ++m)
                        if (m != drop) sub.push_back(cand[m]);
                    ok = supp_of.count(sub) > 0;
                }
                if (ok) candidates.push_back(std::move(cand));
            }
        }
        std::vector<std::vector<int>> next;
        for (auto& cand : candidates) {
            const real s = detail::windowed_support_over(all_transactions, view, cand, th.dis_min);
            if (s > th.supp_min) {
                supp_of[cand] = s;
                next.push_back(cand);
            }
        }
        for (const auto& itemset : next) {
            const real conf = confidence(itemset, class_id, all_transactions, true, th.dis_min);
            if (conf > th.conf_min)
                result.push_back(TextualPattern{itemset, class_id, supp_of[itemset], conf});
        }
        level = std::move(next);
    }

    std::sort(result.begin(), result.end(), [](const TextualPattern& a, const TextualPattern& b) {
        if (a.support != b.support) return a.support > b.support;
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.words < b.words;
    });
    return result;
}

inline std::vector<std::string> pattern_tokens(const TextualPattern& p, const Vocabulary& vocab) {
    // Words joined in vocabulary order.
    std::vector<int> ids = p.words;
    std::sort(ids.begin(), ids.end());
    std::vector<std::string> out;
    for (int id : ids) out.push_back(vocab.words.at(static_cast<std::size_t>(id)));
    return out;
}

}  // namespace vtrl
