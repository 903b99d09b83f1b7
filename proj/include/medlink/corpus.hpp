#pragma once
// Annotated-corpus construction and preprocessing.
//
// Raw documents carry character-offset mentions; preprocessing expands
// abbreviations, splits composite mentions, segments sentences, converts
// character spans to word spans, groups sentences, and filters mentions.
// Every filter reports its drop count. Corpus objects are immutable once
// built and the whole pass is deterministic.

#include "medlink/abbrev.hpp"
#include "medlink/common.hpp"
#include "medlink/jsonl.hpp"
#include "medlink/special_tokens.hpp"
#include "medlink/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace medlink {

// Identifies one mention: (document, sentence group, index within group).
struct MentionRef {
    std::string doc_id;
    std::int64_t group_index = 0;
    std::size_t mention_index = 0;

    auto operator<=>(const MentionRef&) const = default;

    std::string to_string() const {
        return doc_id + ":" + std::to_string(group_index) + ":" + std::to_string(mention_index);
    }
};

struct MentionSpan {
    std::size_t start_word = 0;
    std::size_t end_word = 0; // exclusive
    std::string surface;      // space-join of the covered words
    std::string gold_id;

    bool operator==(const MentionSpan&) const = default;
};

struct SentenceGroup {
    std::string doc_id;
    std::int64_t group_index = 0;
    std::vector<std::string> words;
    std::vector<MentionSpan> mentions;

    bool operator==(const SentenceGroup&) const = default;
};

struct AnnotatedCorpus {
    std::vector<SentenceGroup> groups;
    std::string split_label = "test"; // train | dev | test | pretrain
};

struct RawMention {
    std::size_t start_char = 0;
    std::size_t end_char = 0; // exclusive
    std::vector<std::string> gold_ids; // >1 marks a composite mention
    std::vector<std::pair<std::size_t, std::size_t>> sub_spans; // optional, for composites
};

struct RawDocument {
    std::string doc_id;
    std::string text;
    std::vector<RawMention> char_mentions;
    std::vector<std::size_t> sentence_breaks; // optional pre-segmentation
};

// Intermediate form: sentences as word arrays, mentions in document-level
// word coordinates (spanning sentences is allowed until grouping).
struct WordDocument {
    struct DocMention {
        std::size_t start_word = 0;
        std::size_t end_word = 0;
        std::string surface;
        std::string gold_id;
    };
    std::string doc_id;
    std::vector<std::vector<std::string>> sentences;
    std::vector<DocMention> mentions;
};

struct DropCounts {
    std::size_t invalid_span = 0;
    std::size_t composite_unsplit = 0;
    std::size_t boundary = 0;
    std::size_t overlapping = 0;

    std::size_t total() const { return invalid_span + composite_unsplit + boundary + overlapping; }
};

struct PreprocessOptions {
    bool expand_abbreviations = true;
    bool split_composites = true;
    bool drop_overlapping = true;
    std::size_t group_size = 3;
};

// ---------------------------------------------------------------------------
// Sentence segmentation

// Built-in splitter: break after sentence-final punctuation followed by
// whitespace and an uppercase letter or digit. Returns char ranges.
inline std::vector<std::pair<std::size_t, std::size_t>> default_sentence_ranges(
    std::string_view text) {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    std::size_t n = text.size();
    std::size_t start = 0;
    while (start < n && is_space_byte(text[start])) ++start;
    std::size_t i = start;
    while (i < n) {
        char c = text[i];
        if (c == '.' || c == '!' || c == '?') {
            std::size_t j = i + 1;
            while (j < n && is_space_byte(text[j])) ++j;
            if (j > i + 1 && j < n &&
                ((text[j] >= 'A' && text[j] <= 'Z') || (text[j] >= '0' && text[j] <= '9'))) {
                ranges.emplace_back(start, i + 1);
                start = j;
                i = j;
                continue;
            }
        }
        ++i;
    }
    if (start < n) ranges.emplace_back(start, n);
    return ranges;
}

inline std::vector<std::pair<std::size_t, std::size_t>> sentence_ranges(const RawDocument& doc) {
    if (doc.sentence_breaks.empty()) return default_sentence_ranges(doc.text);
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    std::size_t prev = 0;
    for (std::size_t b : doc.sentence_breaks) {
        if (b <= prev || b >= doc.text.size())
            throw DataError("document " + doc.doc_id + ": sentence breaks must be ascending " +
                            "positions inside the text");
        ranges.emplace_back(prev, b);
        prev = b;
    }
    ranges.emplace_back(prev, doc.text.size());
    return ranges;
}

// ---------------------------------------------------------------------------
// Composite mentions

// Split a composite mention into one mention per gold id using the given
// sub-spans; nullopt means the mention cannot be separated and is dropped.
inline std::optional<std::vector<RawMention>> split_composite(const RawMention& mention) {
    if (mention.gold_ids.size() <= 1) return std::vector<RawMention>{mention};
    if (mention.sub_spans.size() != mention.gold_ids.size()) return std::nullopt;
    std::vector<RawMention> out;
    for (std::size_t i = 0; i < mention.gold_ids.size(); ++i) {
        auto [s, e] = mention.sub_spans[i];
        if (s >= e) return std::nullopt;
        RawMention m;
        m.start_char = s;
        m.end_char = e;
        m.gold_ids = {mention.gold_ids[i]};
        out.push_back(std::move(m));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Character-span to word-span conversion

// Convert character-offset mentions to word spans. Mentions whose
// boundaries do not align with word boundaries are dropped and counted, as
// are composite mentions that reach this point unsplit.
inline WordDocument char_to_word_spans(const RawDocument& doc,
                                       std::size_t* dropped_invalid = nullptr) {
    WordDocument out;
    out.doc_id = doc.doc_id;

    std::vector<std::string> flat_words;
    std::map<std::size_t, std::size_t> word_by_start; // char offset -> word index
    std::map<std::size_t, std::size_t> word_by_end;
    for (auto [s_begin, s_end] : sentence_ranges(doc)) {
        std::vector<std::string> sentence_words;
        std::size_t i = s_begin;
        while (i < s_end) {
            while (i < s_end && is_space_byte(doc.text[i])) ++i;
            std::size_t j = i;
            while (j < s_end && !is_space_byte(doc.text[j])) ++j;
            if (j > i) {
                word_by_start[i] = flat_words.size();
                word_by_end[j] = flat_words.size();
                std::string w = doc.text.substr(i, j - i);
                if (is_reserved_token(w))
                    throw DataError("document " + doc.doc_id + ": reserved token \"" + w +
                                    "\" occurs in source text");
                flat_words.push_back(w);
                sentence_words.push_back(std::move(w));
            }
            i = j;
        }
        if (!sentence_words.empty()) out.sentences.push_back(std::move(sentence_words));
    }

    std::size_t dropped = 0;
    for (const RawMention& m : doc.char_mentions) {
        if (m.gold_ids.size() != 1 || m.start_char >= m.end_char ||
            m.end_char > doc.text.size()) {
            ++dropped;
            continue;
        }
        auto sit = word_by_start.find(m.start_char);
        auto eit = word_by_end.find(m.end_char);
        if (sit == word_by_start.end() || eit == word_by_end.end() ||
            sit->second > eit->second) {
            ++dropped;
            continue;
        }
        WordDocument::DocMention dm;
        dm.start_word = sit->second;
        dm.end_word = eit->second + 1;
        std::vector<std::string> covered(flat_words.begin() + static_cast<std::ptrdiff_t>(dm.start_word),
                                         flat_words.begin() + static_cast<std::ptrdiff_t>(dm.end_word));
        dm.surface = join(covered, " ");
        dm.gold_id = m.gold_ids[0];
        out.mentions.push_back(std::move(dm));
    }
    if (dropped_invalid) *dropped_invalid += dropped;
    return out;
}

// ---------------------------------------------------------------------------
// Grouping and mention filters

// Group sentences into consecutive runs of `group_size`; the final partial
// group is kept. Mentions crossing a group boundary are dropped and counted.
inline std::vector<SentenceGroup> group_sentences(const WordDocument& doc,
                                                  std::size_t group_size = 3,
                                                  std::size_t* boundary_drops = nullptr) {
    if (group_size == 0) throw DataError("group_sentences: group_size must be >= 1");

    std::vector<SentenceGroup> groups;
    std::vector<std::size_t> group_word_start; // doc-level word offset of each group
    std::size_t word_offset = 0;
    for (std::size_t s = 0; s < doc.sentences.size(); s += group_size) {
        SentenceGroup g;
        g.doc_id = doc.doc_id;
        g.group_index = static_cast<std::int64_t>(groups.size());
        for (std::size_t k = s; k < std::min(s + group_size, doc.sentences.size()); ++k)
            g.words.insert(g.words.end(), doc.sentences[k].begin(), doc.sentences[k].end());
        group_word_start.push_back(word_offset);
        word_offset += g.words.size();
        groups.push_back(std::move(g));
    }

    std::size_t dropped = 0;
    for (const auto& m : doc.mentions) {
        bool placed = false;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            std::size_t lo = group_word_start[gi];
            std::size_t hi = lo + groups[gi].words.size();
            if (m.start_word >= lo && m.end_word <= hi) {
                MentionSpan span;
                span.start_word = m.start_word - lo;
                span.end_word = m.end_word - lo;
                span.surface = m.surface;
                span.gold_id = m.gold_id;
                groups[gi].mentions.push_back(std::move(span));
                placed = true;
                break;
            }
        }
        if (!placed) ++dropped;
    }
    if (boundary_drops) *boundary_drops += dropped;

    for (auto& g : groups) {
        std::sort(g.mentions.begin(), g.mentions.end(), [](const MentionSpan& a, const MentionSpan& b) {
            if (a.start_word != b.start_word) return a.start_word < b.start_word;
            if (a.end_word != b.end_word) return a.end_word > b.end_word; // longer first
            return a.gold_id < b.gold_id;
        });
    }
    return groups;
}

// Greedy overlap filter over mentions sorted by (start_word, -length):
// keep a mention iff it intersects no already-kept mention. Ties at equal
// start keep the longer span.
inline std::vector<MentionSpan> drop_overlapping(const std::vector<MentionSpan>& sorted_mentions,
                                                 std::size_t* overlap_drops = nullptr) {
    std::vector<MentionSpan> kept;
    for (const auto& m : sorted_mentions) {
        bool overlaps = false;
        for (const auto& k : kept) {
            if (m.start_word < k.end_word && k.start_word < m.end_word) {
                overlaps = true;
                break;
            }
        }
        if (overlaps) {
            if (overlap_drops) ++*overlap_drops;
        } else {
            kept.push_back(m);
        }
    }
    return kept;
}

// ---------------------------------------------------------------------------
// Per-document preprocessing

inline std::vector<SentenceGroup> preprocess_document(const RawDocument& input,
                                                      const PreprocessOptions& options,
                                                      DropCounts& drops) {
    RawDocument doc = input;

    if (options.expand_abbreviations) {
        ExpansionResult expansion = expand_abbreviations(doc.text);
        if (!expansion.replacements.empty()) {
            for (auto& m : doc.char_mentions) {
                auto [s, e] = remap_span(expansion.replacements, m.start_char, m.end_char);
                m.start_char = s;
                m.end_char = e;
                for (auto& sub : m.sub_spans) {
                    auto [ss, se] = remap_span(expansion.replacements, sub.first, sub.second);
                    sub = {ss, se};
                }
            }
            // sentence breaks refer to the original text; remap them too
            for (auto& b : doc.sentence_breaks)
                b = remap_span(expansion.replacements, b, b).first;
            doc.text = std::move(expansion.expanded_text);
        }
    }

    std::vector<RawMention> singles;
    for (const auto& m : doc.char_mentions) {
        if (m.gold_ids.empty()) throw DataError("document " + doc.doc_id + ": mention without gold ids");
        if (m.gold_ids.size() > 1 && !options.split_composites) {
            ++drops.composite_unsplit;
            continue;
        }
        if (auto parts = split_composite(m)) {
            singles.insert(singles.end(), parts->begin(), parts->end());
        } else {
            ++drops.composite_unsplit;
        }
    }
    doc.char_mentions = std::move(singles);

    WordDocument words = char_to_word_spans(doc, &drops.invalid_span);
    std::vector<SentenceGroup> groups = group_sentences(words, options.group_size, &drops.boundary);
    if (options.drop_overlapping) {
        for (auto& g : groups) g.mentions = drop_overlapping(g.mentions, &drops.overlapping);
    }
    return groups;
}

// Preprocess a batch of documents into a corpus ordered by (doc_id, group_index).
inline AnnotatedCorpus preprocess_documents(const std::vector<RawDocument>& docs,
                                            const PreprocessOptions& options, DropCounts& drops,
                                            const std::string& split_label = "test") {
    AnnotatedCorpus corpus;
    corpus.split_label = split_label;
    for (const auto& doc : docs) {
        std::vector<SentenceGroup> groups = preprocess_document(doc, options, drops);
        corpus.groups.insert(corpus.groups.end(), std::make_move_iterator(groups.begin()),
                             std::make_move_iterator(groups.end()));
    }
    std::sort(corpus.groups.begin(), corpus.groups.end(),
              [](const SentenceGroup& a, const SentenceGroup& b) {
                  if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
                  return a.group_index < b.group_index;
              });
    return corpus;
}

// ---------------------------------------------------------------------------
// Downsampling

constexpr std::size_t kDefaultDownsampleThreshold = 40;

// Remove a group iff it has at least one mention and every distinct gold
// entity in it occurs in at least `freq_threshold` *other* groups. Counts
// are computed once on the input; a single pass, no recomputation.
inline AnnotatedCorpus downsample(const AnnotatedCorpus& corpus,
                                  std::size_t freq_threshold = kDefaultDownsampleThreshold,
                                  std::size_t* removed = nullptr) {
    std::map<std::string, std::size_t> group_counts; // entity -> number of groups containing it
    for (const auto& g : corpus.groups) {
        std::set<std::string> distinct;
        for (const auto& m : g.mentions) distinct.insert(m.gold_id);
        for (const auto& id : distinct) ++group_counts[id];
    }

    AnnotatedCorpus out;
    out.split_label = corpus.split_label;
    std::size_t removed_count = 0;
    for (const auto& g : corpus.groups) {
        if (g.mentions.empty()) {
            out.groups.push_back(g);
            continue;
        }
        bool all_frequent = true;
        for (const auto& m : g.mentions) {
            if (group_counts[m.gold_id] - 1 < freq_threshold) {
                all_frequent = false;
                break;
            }
        }
        if (all_frequent) {
            ++removed_count;
        } else {
            out.groups.push_back(g);
        }
    }
    if (removed) *removed = removed_count;
    return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct AmbiguityStats {
    std::size_t ambiguous_mention_count = 0;
    double ambiguous_fraction_of_unique_mentions = 0.0;
    bool has_ambiguity = false; // min/median/max meaningful only when true
    double min_ambiguity = 0.0;
    double median_ambiguity = 0.0;
    double max_ambiguity = 0.0;
};

// Ambiguity of a mention string = number of distinct gold entities it is
// annotated with, keyed by case-folded surface. The min/median/max are
// taken over ambiguous keys only (ambiguity >= 2).
inline AmbiguityStats ambiguity_stats(const AnnotatedCorpus& corpus) {
    std::map<std::string, std::set<std::string>> entities_by_surface;
    for (const auto& g : corpus.groups)
        for (const auto& m : g.mentions) entities_by_surface[fold(m.surface)].insert(m.gold_id);

    AmbiguityStats stats;
    std::vector<double> ambiguities;
    for (const auto& [surface, entities] : entities_by_surface) {
        if (entities.size() >= 2) ambiguities.push_back(static_cast<double>(entities.size()));
    }
    stats.ambiguous_mention_count = ambiguities.size();
    if (!entities_by_surface.empty())
        stats.ambiguous_fraction_of_unique_mentions =
            static_cast<double>(ambiguities.size()) / static_cast<double>(entities_by_surface.size());
    if (!ambiguities.empty()) {
        stats.has_ambiguity = true;
        stats.min_ambiguity = *std::min_element(ambiguities.begin(), ambiguities.end());
        stats.max_ambiguity = *std::max_element(ambiguities.begin(), ambiguities.end());
        stats.median_ambiguity = median(ambiguities);
    }
    return stats;
}

struct CorpusStats {
    std::size_t documents = 0;
    std::size_t sentence_groups = 0;
    std::size_t mentions = 0;
    std::size_t unique_entities = 0;

    bool operator==(const CorpusStats&) const = default;
};

inline CorpusStats corpus_stats(const AnnotatedCorpus& corpus) {
    CorpusStats stats;
    std::set<std::string> docs;
    std::set<std::string> entities;
    for (const auto& g : corpus.groups) {
        docs.insert(g.doc_id);
        stats.mentions += g.mentions.size();
        for (const auto& m : g.mentions) entities.insert(m.gold_id);
    }
    stats.documents = docs.size();
    stats.sentence_groups = corpus.groups.size();
    stats.unique_entities = entities.size();
    return stats;
}

// ---------------------------------------------------------------------------
// Corpus file: one JSON object per line with fields
//   doc_id, group_index, words[], mentions[{start_word, end_word, gold_id}]

inline AnnotatedCorpus load_corpus(const std::string& path, const std::string& split_label = "test") {
    std::ifstream in = detail::open_input(path);
    AnnotatedCorpus corpus;
    corpus.split_label = split_label;
    std::set<std::pair<std::string, std::int64_t>> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        nlohmann::json j = detail::parse_jsonl_line(line, path, line_no);
        SentenceGroup g;
        g.doc_id = detail::string_field(j, "doc_id", where);
        if (!j.contains("group_index") || !j.at("group_index").is_number_integer())
            throw DataError(where + ": missing integer field \"group_index\"");
        g.group_index = j.at("group_index").get<std::int64_t>();
        g.words = detail::string_array(j, "words", where);
        if (g.words.empty()) throw DataError(where + ": group has no words");
        for (const auto& w : g.words) {
            if (w.empty()) throw DataError(where + ": empty word");
            if (is_reserved_token(w))
                throw DataError(where + ": reserved token \"" + w + "\" occurs in source text");
        }
        if (!seen.insert({g.doc_id, g.group_index}).second)
            throw DataError(where + ": duplicate group (" + g.doc_id + ", " +
                            std::to_string(g.group_index) + ")");
        if (j.contains("mentions")) {
            if (!j.at("mentions").is_array()) throw DataError(where + ": \"mentions\" must be an array");
            for (const auto& jm : j.at("mentions")) {
                if (!jm.is_object()) throw DataError(where + ": malformed mention");
                MentionSpan m;
                if (!jm.contains("start_word") || !jm.contains("end_word"))
                    throw DataError(where + ": mention missing start_word/end_word");
                m.start_word = jm.at("start_word").get<std::size_t>();
                m.end_word = jm.at("end_word").get<std::size_t>();
                m.gold_id = detail::string_field(jm, "gold_id", where);
                if (m.start_word >= m.end_word || m.end_word > g.words.size())
                    throw DataError(where + ": mention span [" + std::to_string(m.start_word) +
                                    ", " + std::to_string(m.end_word) + ") out of range");
                std::vector<std::string> covered(
                    g.words.begin() + static_cast<std::ptrdiff_t>(m.start_word),
                    g.words.begin() + static_cast<std::ptrdiff_t>(m.end_word));
                m.surface = join(covered, " ");
                g.mentions.push_back(std::move(m));
            }
        }
        corpus.groups.push_back(std::move(g));
    }
    return corpus;
}

inline void save_corpus(const AnnotatedCorpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open output file: " + path);
    for (const auto& g : corpus.groups) {
        nlohmann::ordered_json j;
        j["doc_id"] = g.doc_id;
        j["group_index"] = g.group_index;
        j["words"] = g.words;
        nlohmann::ordered_json mentions = nlohmann::ordered_json::array();
        for (const auto& m : g.mentions) {
            nlohmann::ordered_json jm;
            jm["start_word"] = m.start_word;
            jm["end_word"] = m.end_word;
            jm["gold_id"] = m.gold_id;
            mentions.push_back(std::move(jm));
        }
        j["mentions"] = std::move(mentions);
        out << j.dump() << "\n";
    }
}

// ---------------------------------------------------------------------------
// Raw-input adapters
//
// MM-style line:     {"doc_id", "text", "mentions": [{"start_char",
//                     "end_char", "gold_id"}], "sentence_breaks"?: [int]}
// BC5CDR-style line: same but mentions carry "gold_ids": [..] and may carry
//                     "sub_spans": [[start, end], ..] for composites.

enum class RawFormat { mm, bc5cdr };

inline RawFormat parse_raw_format(const std::string& name) {
    if (name == "mm") return RawFormat::mm;
    if (name == "bc5cdr") return RawFormat::bc5cdr;
    throw ConfigError("unknown raw corpus format \"" + name + "\" (expected mm or bc5cdr)");
}

inline std::vector<RawDocument> load_raw_documents(const std::string& path, RawFormat format) {
    std::ifstream in = detail::open_input(path);
    std::vector<RawDocument> docs;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        nlohmann::json j = detail::parse_jsonl_line(line, path, line_no);
        RawDocument doc;
        doc.doc_id = detail::string_field(j, "doc_id", where);
        doc.text = detail::string_field(j, "text", where);
        if (!seen_ids.insert(doc.doc_id).second)
            throw DataError(where + ": duplicate doc_id \"" + doc.doc_id + "\"");
        if (j.contains("sentence_breaks")) {
            for (const auto& b : j.at("sentence_breaks"))
                doc.sentence_breaks.push_back(b.get<std::size_t>());
        }
        if (j.contains("mentions")) {
            for (const auto& jm : j.at("mentions")) {
                RawMention m;
                m.start_char = jm.at("start_char").get<std::size_t>();
                m.end_char = jm.at("end_char").get<std::size_t>();
                if (m.start_char >= m.end_char || m.end_char > doc.text.size())
                    throw DataError(where + ": mention char span out of range");
                if (format == RawFormat::mm) {
                    m.gold_ids = {detail::string_field(jm, "gold_id", where)};
                } else {
                    m.gold_ids = detail::string_array(jm, "gold_ids", where);
                    if (m.gold_ids.empty())
                        throw DataError(where + ": mention has empty gold_ids");
                    if (jm.contains("sub_spans")) {
                        for (const auto& js : jm.at("sub_spans")) {
                            if (!js.is_array() || js.size() != 2)
                                throw DataError(where + ": sub_spans entries must be [start, end]");
                            m.sub_spans.emplace_back(js.at(0).get<std::size_t>(),
                                                     js.at(1).get<std::size_t>());
                        }
                    }
                }
                doc.char_mentions.push_back(std::move(m));
            }
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

} // namespace medlink
