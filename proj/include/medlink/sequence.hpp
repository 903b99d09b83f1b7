#pragma once
// Token-sequence construction for the three encoder inputs: mention
// context, entity record, and the concatenated context/entity pair.
//
// A token here is a whitespace word or a marker; all functions are pure.

#include "medlink/common.hpp"
#include "medlink/corpus.hpp"
#include "medlink/kb.hpp"
#include "medlink/special_tokens.hpp"
#include "medlink/text.hpp"

#include <cstddef>
#include <deque>
#include <string>
#include <vector>

namespace medlink {

constexpr std::size_t kDefaultWindowLen = 30;
constexpr std::size_t kDefaultContextMaxLen = 64;
constexpr std::size_t kDefaultEntityMaxLen = 128;
constexpr std::size_t kDefaultPairContextMaxLen = 128;
constexpr std::size_t kDefaultTypesWordLimit = 30;

struct ContextWindow {
    std::vector<std::string> left_words;    // <= window_len
    std::vector<std::string> mention_words; // non-empty
    std::vector<std::string> right_words;   // <= window_len

    bool operator==(const ContextWindow&) const = default;
};

enum class SequenceKind { context, entity, pair };

struct TokenSequence {
    std::vector<std::string> tokens;
    SequenceKind kind = SequenceKind::context;
    std::size_t max_len = 0; // tokens.size() <= max_len always holds

    bool operator==(const TokenSequence&) const = default;
};

// window_len words either side of the mention, clipped at the group edges.
inline ContextWindow extract_window(const SentenceGroup& group, const MentionSpan& mention,
                                    std::size_t window_len = kDefaultWindowLen) {
    if (mention.start_word >= mention.end_word || mention.end_word > group.words.size())
        throw DataError("extract_window: mention span [" + std::to_string(mention.start_word) +
                        ", " + std::to_string(mention.end_word) + ") invalid for group of " +
                        std::to_string(group.words.size()) + " words");
    ContextWindow w;
    std::size_t left_begin = mention.start_word > window_len ? mention.start_word - window_len : 0;
    w.left_words.assign(group.words.begin() + static_cast<std::ptrdiff_t>(left_begin),
                        group.words.begin() + static_cast<std::ptrdiff_t>(mention.start_word));
    w.mention_words.assign(group.words.begin() + static_cast<std::ptrdiff_t>(mention.start_word),
                           group.words.begin() + static_cast<std::ptrdiff_t>(mention.end_word));
    std::size_t right_end = std::min(mention.end_word + window_len, group.words.size());
    w.right_words.assign(group.words.begin() + static_cast<std::ptrdiff_t>(mention.end_word),
                         group.words.begin() + static_cast<std::ptrdiff_t>(right_end));
    return w;
}

// [CLS] left [ENT_START] mention [ENT_END] right [SEP], trimmed to max_len
// by alternately dropping one word from the far-left then far-right context
// ends. Markers and mention words are never trimmed; if the mention plus
// markers alone exceed max_len, the mention tail is cut and
// *mention_truncated is set.
inline TokenSequence build_context_sequence(const ContextWindow& window,
                                            std::size_t max_len = kDefaultContextMaxLen,
                                            bool* mention_truncated = nullptr) {
    constexpr std::size_t marker_count = 4; // [CLS] [ENT_START] [ENT_END] [SEP]
    if (max_len <= marker_count)
        throw ConfigError("build_context_sequence: max_len must exceed " +
                          std::to_string(marker_count));

    std::deque<std::string> left(window.left_words.begin(), window.left_words.end());
    std::deque<std::string> right(window.right_words.begin(), window.right_words.end());
    std::vector<std::string> mention = window.mention_words;

    auto total = [&] { return marker_count + left.size() + mention.size() + right.size(); };

    bool trim_left = true;
    while (total() > max_len && (!left.empty() || !right.empty())) {
        if (trim_left) {
            if (!left.empty()) left.pop_front();
            else right.pop_back();
        } else {
            if (!right.empty()) right.pop_back();
            else left.pop_front();
        }
        trim_left = !trim_left;
    }
    if (total() > max_len) {
        std::size_t keep = max_len > marker_count ? max_len - marker_count : 0;
        mention.resize(keep);
        if (mention_truncated) *mention_truncated = true;
    }

    TokenSequence seq;
    seq.kind = SequenceKind::context;
    seq.max_len = max_len;
    seq.tokens.reserve(total());
    seq.tokens.push_back(kClsToken);
    seq.tokens.insert(seq.tokens.end(), left.begin(), left.end());
    seq.tokens.push_back(kEntStartToken);
    seq.tokens.insert(seq.tokens.end(), mention.begin(), mention.end());
    seq.tokens.push_back(kEntEndToken);
    seq.tokens.insert(seq.tokens.end(), right.begin(), right.end());
    seq.tokens.push_back(kSepToken);
    return seq;
}

// [CLS] title [SEP] types [SEP] desc [SEP].
//  - title: canonical name, plus "; "-joined aliases when the flag is set.
//  - types: "; "-joined; whole types dropped from the end until the joined
//    text is <= types_word_limit words (never cut mid-type).
//  - description truncated last to satisfy max_len; if even an empty
//    description does not fit, more whole types and finally title words go.
inline TokenSequence build_entity_sequence(const EntityRecord& entity,
                                           bool include_aliases_in_title = false,
                                           std::size_t types_word_limit = kDefaultTypesWordLimit,
                                           std::size_t max_len = kDefaultEntityMaxLen) {
    constexpr std::size_t min_len = 4; // [CLS] + three [SEP]
    if (max_len < min_len)
        throw ConfigError("build_entity_sequence: max_len must be at least " +
                          std::to_string(min_len));

    std::string title = entity.canonical_name;
    if (include_aliases_in_title) {
        for (const auto& alias : entity.aliases) title += "; " + alias;
    }
    std::vector<std::string> title_words = split_words(title);

    std::vector<std::string> kept_types = entity.types;
    auto joined_type_words = [&] { return split_words(join(kept_types, "; ")); };
    std::vector<std::string> type_words = joined_type_words();
    while (type_words.size() > types_word_limit && !kept_types.empty()) {
        kept_types.pop_back();
        type_words = joined_type_words();
    }

    std::vector<std::string> desc_words =
        entity.description ? split_words(*entity.description) : std::vector<std::string>{};

    constexpr std::size_t marker_count = 4; // [CLS] + three [SEP]
    auto overshoot = [&]() -> std::size_t {
        std::size_t len = marker_count + title_words.size() + type_words.size() + desc_words.size();
        return len > max_len ? len - max_len : 0;
    };

    if (std::size_t over = overshoot(); over > 0) {
        std::size_t cut = std::min(over, desc_words.size());
        desc_words.resize(desc_words.size() - cut);
    }
    while (overshoot() > 0 && !kept_types.empty()) {
        kept_types.pop_back();
        type_words = joined_type_words();
    }
    if (std::size_t over = overshoot(); over > 0) {
        std::size_t cut = std::min(over, title_words.size());
        title_words.resize(title_words.size() - cut);
    }

    TokenSequence seq;
    seq.kind = SequenceKind::entity;
    seq.max_len = max_len;
    seq.tokens.push_back(kClsToken);
    seq.tokens.insert(seq.tokens.end(), title_words.begin(), title_words.end());
    seq.tokens.push_back(kSepToken);
    seq.tokens.insert(seq.tokens.end(), type_words.begin(), type_words.end());
    seq.tokens.push_back(kSepToken);
    seq.tokens.insert(seq.tokens.end(), desc_words.begin(), desc_words.end());
    seq.tokens.push_back(kSepToken);
    return seq;
}

// context tokens ++ [ENT_DESC] ++ entity tokens with the leading [CLS]
// dropped. Length is |ctx| + |ent| exactly.
inline TokenSequence build_pair_sequence(const TokenSequence& ctx, const TokenSequence& ent) {
    if (ctx.kind != SequenceKind::context || ent.kind != SequenceKind::entity)
        throw Error("build_pair_sequence: expects a context and an entity sequence");
    if (ent.tokens.empty() || ent.tokens.front() != kClsToken)
        throw Error("build_pair_sequence: entity sequence must start with " +
                    std::string(kClsToken));
    TokenSequence seq;
    seq.kind = SequenceKind::pair;
    seq.max_len = ctx.max_len + ent.max_len;
    seq.tokens.reserve(ctx.tokens.size() + ent.tokens.size());
    seq.tokens = ctx.tokens;
    seq.tokens.push_back(kEntDescToken);
    seq.tokens.insert(seq.tokens.end(), ent.tokens.begin() + 1, ent.tokens.end());
    return seq;
}

} // namespace medlink
