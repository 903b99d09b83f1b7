#pragma once
// Candidate generation: exact maximum-inner-product top-K retrieval over an
// entity vector pool, pool restriction, hard-negative mining, recall.
//
// Retrieval is an exhaustive exact scan — no approximation — so results
// are reproducible bit-for-bit. Ties break by ascending entity id.

#include "medlink/common.hpp"
#include "medlink/corpus.hpp"
#include "medlink/embed.hpp"
#include "medlink/text.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace medlink {

constexpr std::size_t kDefaultTopK = 10;

// Immutable after build; pool held in ascending-id order.
struct CandidateIndex {
    std::vector<std::pair<std::string, EmbeddingVector>> pool;
    std::size_t dim = 0;
};

struct CandidateSet {
    MentionRef mention_ref;
    std::vector<std::pair<std::string, double>> candidates; // scores non-increasing

    bool operator==(const CandidateSet&) const = default;
};

// Index over (vectors ∩ pool_filter) when a filter is given, else all
// vectors. Filter ids with no vector are reported via `missing`, not fatal;
// an empty resulting pool is.
inline CandidateIndex build_index(const std::map<std::string, EmbeddingVector>& vectors,
                                  const std::optional<std::set<std::string>>& pool_filter = std::nullopt,
                                  std::vector<std::string>* missing = nullptr) {
    CandidateIndex index;
    if (pool_filter) {
        for (const auto& id : *pool_filter) {
            auto it = vectors.find(id);
            if (it == vectors.end()) {
                if (missing) missing->push_back(id);
            } else {
                index.pool.emplace_back(id, it->second);
            }
        }
    } else {
        for (const auto& [id, v] : vectors) index.pool.emplace_back(id, v);
    }
    if (index.pool.empty()) throw DataError("build_index: empty candidate pool");
    index.dim = index.pool.front().second.size();
    for (const auto& [id, v] : index.pool) {
        if (v.size() != index.dim)
            throw DataError("build_index: vector for \"" + id + "\" has dim " +
                            std::to_string(v.size()) + ", expected " + std::to_string(index.dim));
    }
    return index;
}

namespace detail {

// Accumulate strictly in index order so independent implementations agree
// bit-for-bit.
inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

} // namespace detail

// The min(k, pool) candidates with the largest inner products, sorted by
// (-score, entity_id). Exhaustive exact scan.
inline CandidateSet top_k(const CandidateIndex& index, const EmbeddingVector& query,
                          std::size_t k = kDefaultTopK, const MentionRef& ref = {}) {
    if (k == 0) throw ConfigError("top_k: k must be >= 1");
    if (query.size() != index.dim)
        throw DataError("top_k: query dim " + std::to_string(query.size()) +
                        " does not match index dim " + std::to_string(index.dim));

    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(index.pool.size());
    for (const auto& [id, v] : index.pool) scored.emplace_back(id, detail::dot(query, v));

    std::size_t take = std::min(k, scored.size());
    auto better = [](const std::pair<std::string, double>& a, const std::pair<std::string, double>& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                      scored.end(), better);
    scored.resize(take);

    CandidateSet set;
    set.mention_ref = ref;
    set.candidates = std::move(scored);
    return set;
}

struct HardNegativeQuery {
    MentionRef mention_ref;
    EmbeddingVector vector;
    std::string gold_id;
};

// Top-(n+1) retrieval minus the gold id, truncated to n. The gold id is
// never returned.
inline std::map<MentionRef, std::vector<std::string>> mine_hard_negatives(
    const CandidateIndex& index, const std::vector<HardNegativeQuery>& queries,
    std::size_t n = kDefaultTopK) {
    std::map<MentionRef, std::vector<std::string>> out;
    for (const auto& q : queries) {
        CandidateSet set = top_k(index, q.vector, n + 1, q.mention_ref);
        std::vector<std::string> negatives;
        for (const auto& [id, score] : set.candidates) {
            if (id == q.gold_id) continue;
            if (negatives.size() == n) break;
            negatives.push_back(id);
        }
        out[q.mention_ref] = std::move(negatives);
    }
    return out;
}

// Fraction of mentions whose gold id appears in the first min(k, |cands|)
// entries of their candidate list.
inline double recall_at_k(const std::vector<CandidateSet>& candidate_sets,
                          const std::map<MentionRef, std::string>& gold, std::size_t k) {
    if (candidate_sets.empty()) throw DataError("recall_at_k: no candidate sets");
    std::size_t hits = 0;
    for (const auto& set : candidate_sets) {
        auto it = gold.find(set.mention_ref);
        if (it == gold.end())
            throw DataError("recall_at_k: no gold label for mention " + set.mention_ref.to_string());
        std::size_t limit = std::min(k, set.candidates.size());
        for (std::size_t i = 0; i < limit; ++i) {
            if (set.candidates[i].first == it->second) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(candidate_sets.size());
}

// ---------------------------------------------------------------------------
// Candidate dump: one line per mention,
//   doc_id \t group_index \t mention_index \t id1 \t score1 \t id2 \t score2 ...
// Scores carry nine significant digits.

inline void save_candidates(const std::vector<CandidateSet>& sets, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open output file: " + path);
    for (const auto& set : sets) {
        out << set.mention_ref.doc_id << '\t' << set.mention_ref.group_index << '\t'
            << set.mention_ref.mention_index;
        for (const auto& [id, score] : set.candidates) out << '\t' << id << '\t' << format_score(score);
        out << "\n";
    }
}

inline std::vector<CandidateSet> load_candidates(const std::string& path) {
    std::ifstream in = detail::open_input(path);
    std::vector<CandidateSet> sets;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        std::vector<std::string> cols;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t tab = line.find('\t', pos);
            if (tab == std::string::npos) {
                cols.push_back(line.substr(pos));
                break;
            }
            cols.push_back(line.substr(pos, tab - pos));
            pos = tab + 1;
        }
        if (cols.size() < 3 || cols.size() % 2 == 0)
            throw DataError(where + ": expected ref columns plus (id, score) pairs");
        CandidateSet set;
        set.mention_ref.doc_id = cols[0];
        try {
            set.mention_ref.group_index = std::stoll(cols[1]);
            set.mention_ref.mention_index = static_cast<std::size_t>(std::stoull(cols[2]));
            for (std::size_t i = 3; i + 1 < cols.size(); i += 2)
                set.candidates.emplace_back(cols[i], std::stod(cols[i + 1]));
        } catch (const std::exception&) {
            throw DataError(where + ": malformed numeric column");
        }
        sets.push_back(std::move(set));
    }
    return sets;
}

} // namespace medlink
