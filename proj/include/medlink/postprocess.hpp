#pragma once
// Post-processing: back off low-confidence predictions to the textually
// closest candidate, then synthesize repeated mentions per document to the
// modal prediction. Backoff runs first; synthesis sees its results.
// Neither stage alters mention refs or drops predictions.

#include "medlink/candidates.hpp"
#include "medlink/common.hpp"
#include "medlink/corpus.hpp"
#include "medlink/kb.hpp"
#include "medlink/rerank.hpp"
#include "medlink/text.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <vector>

namespace medlink {

constexpr double kThresholdMm = 0.55;
constexpr double kThresholdBc5cdr = 0.45;

inline void validate_threshold(double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ConfigError("threshold must lie in [0, 1], got " + std::to_string(threshold));
}

// 1 - levenshtein(fold(a), fold(b)) / max length; two empty strings are
// identical (1.0).
inline double string_similarity(const std::string& a, const std::string& b) {
    std::string fa = fold(a);
    std::string fb = fold(b);
    std::size_t max_len = std::max(fa.size(), fb.size());
    if (max_len == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(fa, fb)) / static_cast<double>(max_len);
}

// When the model probability falls below the threshold, replace the entity
// with the candidate whose best name (canonical or alias) is textually
// closest to the mention surface. Ties go to the higher model probability,
// then the ascending id. The probability field keeps the model probability
// of the newly chosen entity.
inline Prediction backoff(const Prediction& pred, const std::vector<double>& probabilities,
                          const CandidateSet& candidate_set, const KnowledgeBase& kb,
                          const std::string& surface, double threshold) {
    validate_threshold(threshold);
    if (pred.provenance != Provenance::model)
        throw Error("backoff: prediction for " + pred.mention_ref.to_string() +
                    " has already been post-processed");
    if (probabilities.size() != candidate_set.candidates.size())
        throw DataError("backoff: probability list does not align with candidate set");
    if (pred.probability >= threshold) return pred;
    if (candidate_set.candidates.empty()) return pred;

    std::size_t best = 0;
    double best_sim = -1.0;
    for (std::size_t i = 0; i < candidate_set.candidates.size(); ++i) {
        const std::string& id = candidate_set.candidates[i].first;
        const EntityRecord& entity = kb.require(id);
        double sim = string_similarity(surface, entity.canonical_name);
        for (const auto& alias : entity.aliases)
            sim = std::max(sim, string_similarity(surface, alias));
        bool wins = sim > best_sim;
        if (!wins && sim == best_sim) {
            if (probabilities[i] != probabilities[best])
                wins = probabilities[i] > probabilities[best];
            else
                wins = id < candidate_set.candidates[best].first;
        }
        if (wins) {
            best = i;
            best_sim = sim;
        }
    }

    Prediction out = pred;
    out.entity_id = candidate_set.candidates[best].first;
    out.probability = probabilities[best];
    out.provenance = Provenance::backoff;
    return out;
}

// Within one document, map every repeated mention (by case-folded surface)
// to its modal predicted entity. Majority ties break by highest summed
// probability, then ascending id. Only changed predictions get synthesis
// provenance; probabilities are untouched. Idempotent.
inline std::vector<Prediction> synthesize_document(
    const std::vector<Prediction>& predictions,
    const std::map<MentionRef, std::string>& surfaces) {
    if (predictions.empty()) return predictions;
    const std::string& doc_id = predictions.front().mention_ref.doc_id;
    for (const auto& p : predictions) {
        if (p.mention_ref.doc_id != doc_id)
            throw DataError("synthesize_document: predictions span documents " + doc_id +
                            " and " + p.mention_ref.doc_id);
    }

    std::map<std::string, std::vector<std::size_t>> groups; // folded surface -> indices
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        auto it = surfaces.find(predictions[i].mention_ref);
        if (it == surfaces.end())
            throw DataError("synthesize_document: no surface for mention " +
                            predictions[i].mention_ref.to_string());
        groups[fold(it->second)].push_back(i);
    }

    std::vector<Prediction> out = predictions;
    for (const auto& [surface, indices] : groups) {
        if (indices.size() < 2) continue;
        struct Tally {
            std::size_t count = 0;
            double prob_sum = 0.0;
        };
        std::map<std::string, Tally> tallies;
        for (std::size_t i : indices) {
            Tally& t = tallies[out[i].entity_id];
            ++t.count;
            t.prob_sum += out[i].probability;
        }
        std::string modal;
        const Tally* modal_tally = nullptr;
        for (const auto& [id, tally] : tallies) {
            bool wins = modal_tally == nullptr || tally.count > modal_tally->count;
            if (!wins && tally.count == modal_tally->count) {
                if (tally.prob_sum != modal_tally->prob_sum)
                    wins = tally.prob_sum > modal_tally->prob_sum;
                // equal count and sum: ids iterate ascending, keep the first
            }
            if (wins) {
                modal = id;
                modal_tally = &tally;
            }
        }
        for (std::size_t i : indices) {
            if (out[i].entity_id != modal) {
                out[i].entity_id = modal;
                out[i].provenance = Provenance::synthesis;
            }
        }
    }
    return out;
}

} // namespace medlink
