#pragma once
// Accuracy metrics and the subpopulation slice analysis: canonical slices
// over mention shape, train-set exposure, surface popularity, and KB
// metadata richness, plus user-defined slices.
//
// Slice predicates are pure; membership uses the PRE-augmentation KB so
// that metadata-poverty slices reflect the original resource.

#include "medlink/candidates.hpp"
#include "medlink/common.hpp"
#include "medlink/corpus.hpp"
#include "medlink/kb.hpp"
#include "medlink/rerank.hpp"
#include "medlink/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace medlink {

struct TrainStats {
    std::map<std::string, std::size_t> entity_count;       // gold id -> train mentions
    std::set<std::string> mention_surfaces;                // folded surfaces seen in train
    std::map<std::string, std::map<std::string, std::size_t>> mention_to_entity_counts;
    std::set<std::string> top100;                          // most frequent train entities
    std::set<std::string> pretrain_entities;
};

inline TrainStats build_train_stats(const AnnotatedCorpus& train,
                                    const AnnotatedCorpus* pretrain = nullptr) {
    TrainStats stats;
    for (const auto& g : train.groups) {
        for (const auto& m : g.mentions) {
            ++stats.entity_count[m.gold_id];
            std::string key = fold(m.surface);
            stats.mention_surfaces.insert(key);
            ++stats.mention_to_entity_counts[key][m.gold_id];
        }
    }
    // rank by (count desc, id asc); ties at rank 100 resolve by ascending id
    std::vector<std::pair<std::string, std::size_t>> ranked(stats.entity_count.begin(),
                                                            stats.entity_count.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (std::size_t i = 0; i < std::min<std::size_t>(100, ranked.size()); ++i)
        stats.top100.insert(ranked[i].first);
    if (pretrain) {
        for (const auto& g : pretrain->groups)
            for (const auto& m : g.mentions) stats.pretrain_entities.insert(m.gold_id);
    }
    return stats;
}

// Canonical slice names, fixed order. multi_word/single_word partition all
// mentions; the rest overlap freely.
inline const std::vector<std::string>& canonical_slices() {
    static const std::vector<std::string> names = {
        "multi_word",
        "single_word",
        "unseen_mention",
        "unseen_entity",
        "not_direct_match",
        "top_100",
        "unpopular",
        "limited_metadata",
        "rare_limited_metadata",
        "never_seen_limited_metadata",
    };
    return names;
}

// Membership of one (surface, gold entity) mention in the canonical slices.
inline std::set<std::string> slice_membership(const std::string& surface,
                                              const std::string& gold_id, const TrainStats& stats,
                                              const KnowledgeBase& pre_aug_kb) {
    const EntityRecord& gold = pre_aug_kb.require(gold_id);
    std::string folded = fold(surface);

    std::set<std::string> slices;
    if (count_words(surface) > 1)
        slices.insert("multi_word");
    else
        slices.insert("single_word");

    if (!stats.mention_surfaces.contains(folded)) slices.insert("unseen_mention");

    bool entity_seen_in_train = stats.entity_count.contains(gold_id);
    if (!entity_seen_in_train) slices.insert("unseen_entity");

    bool direct = folded == fold(gold.canonical_name);
    for (const auto& alias : gold.aliases) {
        if (direct) break;
        direct = folded == fold(alias);
    }
    if (!direct) slices.insert("not_direct_match");

    if (stats.top100.contains(gold_id)) slices.insert("top_100");

    if (auto it = stats.mention_to_entity_counts.find(folded);
        it != stats.mention_to_entity_counts.end()) {
        std::size_t gold_count = 0;
        if (auto git = it->second.find(gold_id); git != it->second.end()) gold_count = git->second;
        for (const auto& [id, count] : it->second) {
            if (id != gold_id && count > gold_count) {
                slices.insert("unpopular");
                break;
            }
        }
    }

    bool limited = !gold.description.has_value() && gold.types.size() == 1;
    if (limited) {
        slices.insert("limited_metadata");
        std::size_t train_count = entity_seen_in_train ? stats.entity_count.at(gold_id) : 0;
        if (train_count < 5) slices.insert("rare_limited_metadata");
        if (!entity_seen_in_train && !stats.pretrain_entities.contains(gold_id))
            slices.insert("never_seen_limited_metadata");
    }
    return slices;
}

// Fraction of predictions whose entity matches gold. The two inputs must
// describe exactly the same mention set.
inline double accuracy(const std::vector<Prediction>& predictions,
                       const std::map<MentionRef, std::string>& gold) {
    if (predictions.empty()) throw DataError("accuracy: no predictions");
    if (predictions.size() != gold.size())
        throw DataError("accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(gold.size()) + " gold labels");
    std::set<MentionRef> seen;
    std::size_t correct = 0;
    for (const auto& p : predictions) {
        auto it = gold.find(p.mention_ref);
        if (it == gold.end())
            throw DataError("accuracy: no gold label for mention " + p.mention_ref.to_string());
        if (!seen.insert(p.mention_ref).second)
            throw DataError("accuracy: duplicate prediction for mention " +
                            p.mention_ref.to_string());
        if (p.entity_id == it->second) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

struct SliceSpec {
    std::string name;
    std::function<bool(const std::string& surface, const std::string& gold_id,
                       const TrainStats&, const KnowledgeBase&)>
        predicate;
};

struct SliceRow {
    std::string name;
    std::size_t support = 0;
    std::optional<double> accuracy; // absent when support = 0
};

struct EvalReport {
    double overall_accuracy = 0.0;
    std::optional<double> recall_at_1;
    std::optional<double> recall_at_10;
    std::vector<SliceRow> rows;
};

inline EvalReport slice_report(const std::vector<Prediction>& predictions,
                               const std::map<MentionRef, std::string>& gold,
                               const std::map<MentionRef, std::string>& surfaces,
                               const TrainStats& stats, const KnowledgeBase& pre_aug_kb,
                               const std::vector<CandidateSet>* candidate_sets = nullptr,
                               const std::vector<SliceSpec>& user_slices = {}) {
    EvalReport report;
    report.overall_accuracy = accuracy(predictions, gold);
    if (candidate_sets) {
        report.recall_at_1 = recall_at_k(*candidate_sets, gold, 1);
        report.recall_at_10 = recall_at_k(*candidate_sets, gold, 10);
    }

    std::vector<SliceSpec> ordered_user = user_slices;
    std::sort(ordered_user.begin(), ordered_user.end(),
              [](const SliceSpec& a, const SliceSpec& b) { return a.name < b.name; });
    for (const auto& s : ordered_user) {
        if (std::find(canonical_slices().begin(), canonical_slices().end(), s.name) !=
            canonical_slices().end())
            throw ConfigError("user slice \"" + s.name + "\" shadows a canonical slice");
    }

    std::map<std::string, std::pair<std::size_t, std::size_t>> tallies; // name -> (support, correct)
    for (const auto& name : canonical_slices()) tallies[name] = {0, 0};
    for (const auto& s : ordered_user) tallies[s.name] = {0, 0};

    for (const auto& p : predictions) {
        auto git = gold.find(p.mention_ref);
        auto sit = surfaces.find(p.mention_ref);
        if (sit == surfaces.end())
            throw DataError("slice_report: no surface for mention " + p.mention_ref.to_string());
        const std::string& surface = sit->second;
        const std::string& gold_id = git->second;
        bool correct = p.entity_id == gold_id;

        std::set<std::string> member = slice_membership(surface, gold_id, stats, pre_aug_kb);
        for (const auto& s : ordered_user) {
            if (s.predicate(surface, gold_id, stats, pre_aug_kb)) member.insert(s.name);
        }
        for (const auto& name : member) {
            auto& [support, hits] = tallies.at(name);
            ++support;
            if (correct) ++hits;
        }
    }

    auto emit = [&](const std::string& name) {
        const auto& [support, hits] = tallies.at(name);
        SliceRow row;
        row.name = name;
        row.support = support;
        if (support > 0)
            row.accuracy = static_cast<double>(hits) / static_cast<double>(support);
        report.rows.push_back(std::move(row));
    };
    for (const auto& name : canonical_slices()) emit(name);
    for (const auto& s : ordered_user) emit(s.name);
    return report;
}

// ---------------------------------------------------------------------------
// Report serialization: JSON for machines, aligned columns for humans,
// CSV of per-mention membership for plotting.

inline nlohmann::ordered_json report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["overall_accuracy"] = report.overall_accuracy;
    j["recall_at_1"] = report.recall_at_1 ? nlohmann::ordered_json(*report.recall_at_1)
                                          : nlohmann::ordered_json(nullptr);
    j["recall_at_10"] = report.recall_at_10 ? nlohmann::ordered_json(*report.recall_at_10)
                                            : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : report.rows) {
        nlohmann::ordered_json jr;
        jr["name"] = row.name;
        jr["support"] = row.support;
        jr["accuracy"] =
            row.accuracy ? nlohmann::ordered_json(*row.accuracy) : nlohmann::ordered_json(nullptr);
        rows.push_back(std::move(jr));
    }
    j["slices"] = std::move(rows);
    return j;
}

inline std::string report_to_text(const EvalReport& report) {
    std::string out;
    out += "overall_accuracy\t" + format_score(report.overall_accuracy) + "\n";
    if (report.recall_at_1) out += "recall_at_1\t" + format_score(*report.recall_at_1) + "\n";
    if (report.recall_at_10) out += "recall_at_10\t" + format_score(*report.recall_at_10) + "\n";

    std::size_t name_width = 5; // "slice"
    for (const auto& row : report.rows) name_width = std::max(name_width, row.name.size());
    out += "\n";
    out += "slice";
    out += std::string(name_width - 5, ' ');
    out += "  support  accuracy\n";
    for (const auto& row : report.rows) {
        out += row.name;
        out += std::string(name_width - row.name.size(), ' ');
        std::string support = std::to_string(row.support);
        out += "  ";
        if (support.size() < 7) out += std::string(7 - support.size(), ' ');
        out += support;
        out += "  ";
        out += row.accuracy ? format_score(*row.accuracy) : std::string("-");
        out += "\n";
    }
    return out;
}

inline void save_slice_membership_csv(const std::vector<Prediction>& predictions,
                                      const std::map<MentionRef, std::string>& gold,
                                      const std::map<MentionRef, std::string>& surfaces,
                                      const TrainStats& stats, const KnowledgeBase& pre_aug_kb,
                                      const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open output file: " + path);
    out << "doc_id,group_index,mention_index";
    for (const auto& name : canonical_slices()) out << ',' << name;
    out << "\n";
    for (const auto& p : predictions) {
        auto git = gold.find(p.mention_ref);
        auto sit = surfaces.find(p.mention_ref);
        if (git == gold.end() || sit == surfaces.end())
            throw DataError("slice membership: unaligned mention " + p.mention_ref.to_string());
        std::set<std::string> member =
            slice_membership(sit->second, git->second, stats, pre_aug_kb);
        out << p.mention_ref.doc_id << ',' << p.mention_ref.group_index << ','
            << p.mention_ref.mention_index;
        for (const auto& name : canonical_slices()) out << ',' << (member.contains(name) ? 1 : 0);
        out << "\n";
    }
}

} // namespace medlink
