#pragma once
// Knowledge-base storage and cross-KB structural augmentation.
//
// A KnowledgeBase is immutable once loaded or augmented; concurrent reads
// are safe. Entities are keyed by an opaque id (e.g. a CUI) and carry the
// structural resources used downstream: aliases, type labels, description.

#include "medlink/common.hpp"
#include "medlink/jsonl.hpp"
#include "medlink/text.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace medlink {

struct EntityRecord {
    std::string id;
    std::string canonical_name;
    std::vector<std::string> aliases;
    std::vector<std::string> types;
    std::optional<std::string> description;
    std::optional<std::string> source_vocab;

    bool operator==(const EntityRecord&) const = default;
};

struct KnowledgeBase {
    std::string name;
    std::map<std::string, EntityRecord> entities;

    const EntityRecord* find(const std::string& id) const {
        auto it = entities.find(id);
        return it == entities.end() ? nullptr : &it->second;
    }

    const EntityRecord& require(const std::string& id) const {
        const EntityRecord* e = find(id);
        if (!e) throw DataError("entity id not found in KB '" + name + "': " + id);
        return *e;
    }

    std::size_t size() const { return entities.size(); }
};

struct MappingEntry {
    std::string target_id;
    std::vector<std::string> target_types;
    std::optional<std::string> target_description;
};

struct CrossKbMapping {
    std::map<std::string, MappingEntry> entries;
};

struct KbStats {
    std::size_t entity_count = 0;
    std::size_t distinct_type_count = 0;
    std::size_t described_entity_count = 0;

    bool operator==(const KbStats&) const = default;
};

namespace detail {

inline void check_no_duplicates(const std::vector<std::string>& items,
                                const std::string& what, const std::string& where) {
    std::set<std::string> seen;
    for (const auto& s : items) {
        if (!seen.insert(s).second)
            throw DataError(where + ": duplicate " + what + " \"" + s + "\"");
    }
}

inline void validate_entity(const EntityRecord& e, const std::string& where) {
    if (e.id.empty()) throw DataError(where + ": empty entity id");
    if (e.canonical_name.empty())
        throw DataError(where + ": entity " + e.id + " has empty canonical name");
    if (e.description && e.description->empty())
        throw DataError(where + ": entity " + e.id + " has empty description field");
    check_no_duplicates(e.aliases, "alias", where + ": entity " + e.id);
    check_no_duplicates(e.types, "type", where + ": entity " + e.id);
    for (const auto& a : e.aliases)
        if (a == e.canonical_name)
            throw DataError(where + ": entity " + e.id + " lists its canonical name as an alias");
}

} // namespace detail

// KB file: one JSON object per line with fields
//   id, name, aliases[], types[], description?, source_vocab?
inline KnowledgeBase load_kb(const std::string& path, const std::string& name = "kb") {
    std::ifstream in = detail::open_input(path);
    KnowledgeBase kb;
    kb.name = name;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        nlohmann::json j = detail::parse_jsonl_line(line, path, line_no);
        EntityRecord e;
        e.id = detail::string_field(j, "id", where);
        e.canonical_name = detail::string_field(j, "name", where);
        e.aliases = detail::string_array(j, "aliases", where);
        e.types = detail::string_array(j, "types", where);
        if (j.contains("description") && !j.at("description").is_null())
            e.description = detail::string_field(j, "description", where);
        if (j.contains("source_vocab") && !j.at("source_vocab").is_null())
            e.source_vocab = detail::string_field(j, "source_vocab", where);
        detail::validate_entity(e, where);
        if (kb.entities.count(e.id))
            throw DataError(where + ": duplicate entity id \"" + e.id + "\"");
        kb.entities.emplace(e.id, std::move(e));
    }
    return kb;
}

// Serialized in id order with a fixed key order, so augmented KBs written
// twice from the same inputs are byte-identical.
inline void save_kb(const KnowledgeBase& kb, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open output file: " + path);
    for (const auto& [id, e] : kb.entities) {
        nlohmann::ordered_json j;
        j["id"] = e.id;
        j["name"] = e.canonical_name;
        j["aliases"] = e.aliases;
        j["types"] = e.types;
        if (e.description) j["description"] = *e.description;
        if (e.source_vocab) j["source_vocab"] = *e.source_vocab;
        out << j.dump() << "\n";
    }
}

// Mapping file: one JSON object per line with fields
//   source_id, target_id, target_types[], target_description?
inline CrossKbMapping load_mapping(const std::string& path) {
    std::ifstream in = detail::open_input(path);
    CrossKbMapping mapping;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        nlohmann::json j = detail::parse_jsonl_line(line, path, line_no);
        std::string source_id = detail::string_field(j, "source_id", where);
        MappingEntry entry;
        entry.target_id = detail::string_field(j, "target_id", where);
        // target_types are normalized to first-occurrence order, no duplicates
        for (auto& t : detail::string_array(j, "target_types", where)) {
            if (std::find(entry.target_types.begin(), entry.target_types.end(), t) ==
                entry.target_types.end())
                entry.target_types.push_back(std::move(t));
        }
        if (j.contains("target_description") && !j.at("target_description").is_null())
            entry.target_description = detail::string_field(j, "target_description", where);
        if (mapping.entries.count(source_id))
            throw DataError(where + ": duplicate source_id \"" + source_id + "\"");
        mapping.entries.emplace(std::move(source_id), std::move(entry));
    }
    return mapping;
}

// Gold mapping file: tab-separated source_id, target_id.
inline std::map<std::string, std::string> load_gold_mapping(const std::string& path) {
    std::ifstream in = detail::open_input(path);
    std::map<std::string, std::string> gold;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size() ||
            line.find('\t', tab + 1) != std::string::npos)
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": expected two tab-separated columns");
        gold[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return gold;
}

// Take the first `limit` whitespace words, rejoined with single spaces.
inline std::string truncate_words(const std::string& s, std::size_t limit) {
    std::vector<std::string> words = split_words(s);
    if (words.size() > limit) words.resize(limit);
    return join(words, " ");
}

constexpr std::size_t kDefaultDescWordLimit = 150;

// Augment a KB with types and descriptions from a cross-KB mapping.
// For each mapped entity: the type list becomes the union (original order
// first, new types appended, duplicates dropped) and a missing description
// is filled with the first `desc_word_limit` words of the mapped one.
// Unmapped entities pass through unchanged. Idempotent.
inline KnowledgeBase apply_mapping(const KnowledgeBase& kb, const CrossKbMapping& mapping,
                                   std::size_t desc_word_limit = kDefaultDescWordLimit) {
    KnowledgeBase out;
    out.name = kb.name;
    for (const auto& [id, entity] : kb.entities) {
        EntityRecord e = entity;
        auto it = mapping.entries.find(id);
        if (it != mapping.entries.end()) {
            const MappingEntry& m = it->second;
            for (const auto& t : m.target_types) {
                if (std::find(e.types.begin(), e.types.end(), t) == e.types.end())
                    e.types.push_back(t);
            }
            if (!e.description && m.target_description) {
                std::string desc = truncate_words(*m.target_description, desc_word_limit);
                if (!desc.empty()) e.description = std::move(desc);
            }
        }
        out.entities.emplace(id, std::move(e));
    }
    return out;
}

// Fraction of gold pairs the mapping reproduces exactly. Gold keys absent
// from the mapping count as misses.
inline double mapping_accuracy(const CrossKbMapping& mapping,
                               const std::map<std::string, std::string>& gold) {
    if (gold.empty()) throw DataError("mapping_accuracy: empty gold mapping");
    std::size_t hits = 0;
    for (const auto& [source_id, target_id] : gold) {
        auto it = mapping.entries.find(source_id);
        if (it != mapping.entries.end() && it->second.target_id == target_id) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

// Fraction of gold pairs where the predicted target entity shares at least
// one type string with the gold target entity. Unmapped or unresolvable
// predictions count as misses; unresolvable gold targets are an error.
inline double integration_performance(const CrossKbMapping& mapping,
                                      const std::map<std::string, std::string>& gold,
                                      const KnowledgeBase& target_kb) {
    if (gold.empty()) throw DataError("integration_performance: empty gold mapping");
    std::size_t hits = 0;
    for (const auto& [source_id, gold_target] : gold) {
        const EntityRecord* gold_entity = target_kb.find(gold_target);
        if (!gold_entity)
            throw DataError("integration_performance: gold target id \"" + gold_target +
                            "\" not in target KB");
        auto it = mapping.entries.find(source_id);
        if (it == mapping.entries.end()) continue;
        const EntityRecord* predicted = target_kb.find(it->second.target_id);
        if (!predicted) continue;
        const std::set<std::string> gold_types(gold_entity->types.begin(),
                                               gold_entity->types.end());
        for (const auto& t : predicted->types) {
            if (gold_types.count(t)) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

inline KbStats kb_stats(const KnowledgeBase& kb) {
    KbStats stats;
    stats.entity_count = kb.entities.size();
    std::set<std::string> types;
    for (const auto& [id, e] : kb.entities) {
        types.insert(e.types.begin(), e.types.end());
        if (e.description) ++stats.described_entity_count;
    }
    stats.distinct_type_count = types.size();
    return stats;
}

} // namespace medlink
