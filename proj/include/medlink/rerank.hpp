#pragma once
// Candidate reranking: score (mention, candidate) pairs behind a pluggable
// scorer contract, softmax the scores, select the argmax.
//
// Scorers must be deterministic with finite outputs. Two backends ship: a
// hashing reference scorer and a precomputed score file.

#include "medlink/candidates.hpp"
#include "medlink/common.hpp"
#include "medlink/corpus.hpp"
#include "medlink/embed.hpp"
#include "medlink/kb.hpp"
#include "medlink/sequence.hpp"
#include "medlink/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace medlink {

enum class Provenance { model, backoff, synthesis };

inline std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::model: return "model";
        case Provenance::backoff: return "backoff";
        case Provenance::synthesis: return "synthesis";
    }
    throw Error("invalid provenance value");
}

inline Provenance provenance_from_string(const std::string& s) {
    if (s == "model") return Provenance::model;
    if (s == "backoff") return Provenance::backoff;
    if (s == "synthesis") return Provenance::synthesis;
    throw DataError("unknown provenance \"" + s + "\"");
}

struct Prediction {
    MentionRef mention_ref;
    std::string entity_id;
    double probability = 0.0; // softmax mass at the moment of model prediction
    Provenance provenance = Provenance::model;

    bool operator==(const Prediction&) const = default;
};

class Scorer {
public:
    virtual ~Scorer() = default;
    virtual double score_pair(const TokenSequence& pair_seq) const = 0;
    // Keyed variant used by the pipeline; file-backed scorers need the ids.
    virtual double score(const MentionRef&, const std::string&,
                         const TokenSequence& pair_seq) const {
        return score_pair(pair_seq);
    }
};

// Numerically stable softmax (max subtraction); output sums to 1 ± 1e-9.
inline std::vector<double> softmax(const std::vector<double>& scores) {
    if (scores.empty()) throw DataError("softmax: empty score list");
    double max_score = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - max_score);
        sum += out[i];
    }
    for (double& p : out) p /= sum;
    return out;
}

// Reference scorer: inner product of hash embeddings of the two sides of
// [ENT_DESC]. Symmetric; 1.0 when both sides hash identically.
class ReferenceScorer final : public Scorer {
public:
    explicit ReferenceScorer(std::size_t dim = kDefaultEmbedDim,
                             std::uint64_t seed = kDefaultEmbedSeed)
        : dim_(dim), seed_(seed) {}

    double score_pair(const TokenSequence& pair_seq) const override {
        auto split = std::find(pair_seq.tokens.begin(), pair_seq.tokens.end(), kEntDescToken);
        if (split == pair_seq.tokens.end())
            throw DataError("ReferenceScorer: pair sequence lacks " + std::string(kEntDescToken));
        TokenSequence left{std::vector<std::string>(pair_seq.tokens.begin(), split),
                           SequenceKind::context, pair_seq.max_len};
        TokenSequence right{std::vector<std::string>(split + 1, pair_seq.tokens.end()),
                            SequenceKind::entity, pair_seq.max_len};
        return detail::dot(hash_embed(left, dim_, seed_), hash_embed(right, dim_, seed_));
    }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

// Precomputed scores keyed by (mention_ref, entity_id). File rows:
//   doc_id \t group_index \t mention_index \t entity_id \t score
class ScoreFileScorer final : public Scorer {
public:
    explicit ScoreFileScorer(const std::string& path) {
        std::ifstream in = detail::open_input(path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const std::string where = path + ":" + std::to_string(line_no);
            std::istringstream row(line);
            MentionRef ref;
            std::string entity_id;
            double score = 0.0;
            if (!(row >> ref.doc_id >> ref.group_index >> ref.mention_index >> entity_id >> score))
                throw DataError(where + ": expected doc group mention entity score");
            if (!std::isfinite(score)) throw DataError(where + ": non-finite score");
            if (!scores_.emplace(std::make_pair(ref, entity_id), score).second)
                throw DataError(where + ": duplicate (mention, entity) key");
        }
    }

    double score_pair(const TokenSequence&) const override {
        throw Error("ScoreFileScorer requires mention identity; use score()");
    }

    double score(const MentionRef& ref, const std::string& entity_id,
                 const TokenSequence&) const override {
        auto it = scores_.find({ref, entity_id});
        if (it == scores_.end())
            throw DataError("score file has no entry for mention " + ref.to_string() +
                            " entity " + entity_id);
        return it->second;
    }

private:
    std::map<std::pair<MentionRef, std::string>, double> scores_;
};

struct RerankParams {
    std::size_t pair_context_max_len = kDefaultPairContextMaxLen;
    std::size_t types_word_limit = kDefaultTypesWordLimit;
    std::size_t entity_max_len = kDefaultEntityMaxLen;
};

struct RerankResult {
    Prediction prediction;                // provenance = model
    std::vector<double> probabilities;    // aligned with candidate order
};

// Build one alias-inclusive pair sequence per candidate, score, softmax,
// pick the argmax; probability ties break by ascending entity id.
inline RerankResult rerank(const CandidateSet& candidate_set, const ContextWindow& window,
                           const KnowledgeBase& kb, const Scorer& scorer,
                           const RerankParams& params = {}) {
    if (candidate_set.candidates.empty())
        throw DataError("rerank: empty candidate set for mention " +
                        candidate_set.mention_ref.to_string());

    TokenSequence ctx = build_context_sequence(window, params.pair_context_max_len);
    std::vector<double> scores;
    scores.reserve(candidate_set.candidates.size());
    for (const auto& [id, retrieval_score] : candidate_set.candidates) {
        const EntityRecord& entity = kb.require(id);
        TokenSequence ent = build_entity_sequence(entity, /*include_aliases_in_title=*/true,
                                                  params.types_word_limit, params.entity_max_len);
        TokenSequence pair = build_pair_sequence(ctx, ent);
        double s = scorer.score(candidate_set.mention_ref, id, pair);
        if (!std::isfinite(s))
            throw DataError("scorer produced a non-finite score for entity " + id);
        scores.push_back(s);
    }

    RerankResult result;
    result.probabilities = softmax(scores);
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.probabilities.size(); ++i) {
        double p = result.probabilities[i];
        const std::string& id = candidate_set.candidates[i].first;
        if (p > result.probabilities[best] ||
            (p == result.probabilities[best] && id < candidate_set.candidates[best].first)) {
            best = i;
        }
    }
    result.prediction.mention_ref = candidate_set.mention_ref;
    result.prediction.entity_id = candidate_set.candidates[best].first;
    result.prediction.probability = result.probabilities[best];
    result.prediction.provenance = Provenance::model;
    return result;
}

// ---------------------------------------------------------------------------
// Prediction file:
//   doc_id \t group_index \t mention_index \t entity_id \t probability \t provenance

inline void save_predictions(const std::vector<Prediction>& predictions, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open output file: " + path);
    for (const auto& p : predictions) {
        out << p.mention_ref.doc_id << '\t' << p.mention_ref.group_index << '\t'
            << p.mention_ref.mention_index << '\t' << p.entity_id << '\t'
            << format_score(p.probability) << '\t' << to_string(p.provenance) << "\n";
    }
}

inline std::vector<Prediction> load_predictions(const std::string& path) {
    std::ifstream in = detail::open_input(path);
    std::vector<Prediction> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        std::istringstream row(line);
        Prediction p;
        std::string provenance;
        if (!(row >> p.mention_ref.doc_id >> p.mention_ref.group_index >>
              p.mention_ref.mention_index >> p.entity_id >> p.probability >> provenance))
            throw DataError(where + ": expected doc group mention entity probability provenance");
        if (!std::isfinite(p.probability) || p.probability < 0.0 || p.probability > 1.0)
            throw DataError(where + ": probability outside [0, 1]");
        p.provenance = provenance_from_string(provenance);
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace medlink
