#pragma once
// The embedder seam between the pipeline and any encoder: a behavioral
// contract, a deterministic hashing reference embedder, and vector-file
// ingestion for precomputed embeddings.

#include "medlink/common.hpp"
#include "medlink/sequence.hpp"
#include "medlink/special_tokens.hpp"
#include "medlink/text.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace medlink {

using EmbeddingVector = std::vector<double>;

constexpr std::size_t kDefaultEmbedDim = 256;
constexpr std::uint64_t kDefaultEmbedSeed = 42;

// Signed feature hashing over case-folded non-marker tokens and their
// character trigrams; L2-normalized unless all-zero. String-similar token
// lists land on correlated vectors, which is the point of the reference
// embedder.
inline EmbeddingVector hash_embed(const TokenSequence& seq, std::size_t dim,
                                  std::uint64_t seed = kDefaultEmbedSeed) {
    if (dim == 0) throw ConfigError("hash_embed: dim must be >= 1");
    EmbeddingVector v(dim, 0.0);
    auto add_feature = [&](std::string_view feature) {
        std::uint64_t h = fnv1a64(feature, seed);
        double sign = (h % 2 == 0) ? 1.0 : -1.0;
        v[h % dim] += sign;
    };
    for (const auto& token : seq.tokens) {
        if (is_reserved_token(token)) continue;
        std::string folded = fold(token);
        add_feature(folded);
        for (std::size_t i = 0; i + 3 <= folded.size(); ++i)
            add_feature(std::string_view(folded).substr(i, 3));
    }
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    if (norm_sq > 0.0) {
        double inv = 1.0 / std::sqrt(norm_sq);
        for (double& x : v) x *= inv;
    }
    return v;
}

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const = 0;
    virtual EmbeddingVector embed_context(const TokenSequence& seq) const = 0;
    virtual EmbeddingVector embed_entity(const TokenSequence& seq) const = 0;
};

class HashEmbedder final : public Embedder {
public:
    explicit HashEmbedder(std::size_t dim = kDefaultEmbedDim,
                          std::uint64_t seed = kDefaultEmbedSeed)
        : dim_(dim), seed_(seed) {
        if (dim_ == 0) throw ConfigError("HashEmbedder: dim must be >= 1");
    }

    std::size_t dim() const override { return dim_; }
    EmbeddingVector embed_context(const TokenSequence& seq) const override {
        return hash_embed(seq, dim_, seed_);
    }
    EmbeddingVector embed_entity(const TokenSequence& seq) const override {
        return hash_embed(seq, dim_, seed_);
    }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

// Vector file: header "dim=<n>", then one row per id: "id\tf1\t...\tfn".
inline std::map<std::string, EmbeddingVector> load_vectors(const std::string& path) {
    std::ifstream in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("dim=", 0) != 0)
        throw DataError(path + ":1: expected header \"dim=<n>\"");
    char* end = nullptr;
    long dim_value = std::strtol(line.c_str() + 4, &end, 10);
    if (end == line.c_str() + 4 || *end != '\0' || dim_value < 1)
        throw DataError(path + ":1: malformed dimension \"" + line + "\"");
    std::size_t dim = static_cast<std::size_t>(dim_value);

    std::map<std::string, EmbeddingVector> vectors;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) throw DataError(where + ": expected id<TAB>floats");
        std::string id = line.substr(0, tab);
        EmbeddingVector v;
        v.reserve(dim);
        const char* p = line.c_str() + tab;
        while (*p == '\t') {
            ++p;
            char* num_end = nullptr;
            double x = std::strtod(p, &num_end);
            if (num_end == p) throw DataError(where + ": malformed float");
            if (!std::isfinite(x)) throw DataError(where + ": non-finite value");
            v.push_back(x);
            p = num_end;
        }
        if (*p != '\0') throw DataError(where + ": trailing garbage after floats");
        if (v.size() != dim)
            throw DataError(where + ": row has " + std::to_string(v.size()) +
                            " values, expected " + std::to_string(dim));
        if (!vectors.emplace(std::move(id), std::move(v)).second)
            throw DataError(where + ": duplicate id \"" + line.substr(0, tab) + "\"");
    }
    return vectors;
}

inline void save_vectors(const std::map<std::string, EmbeddingVector>& vectors, std::size_t dim,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open output file: " + path);
    out << "dim=" << dim << "\n";
    char buf[64];
    for (const auto& [id, v] : vectors) {
        if (v.size() != dim)
            throw DataError("save_vectors: vector for \"" + id + "\" has dim " +
                            std::to_string(v.size()) + ", expected " + std::to_string(dim));
        out << id;
        for (double x : v) {
            std::snprintf(buf, sizeof(buf), "%.17g", x);
            out << '\t' << buf;
        }
        out << "\n";
    }
}

} // namespace medlink
