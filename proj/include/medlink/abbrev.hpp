#pragma once
// Abbreviation definition extraction and in-text expansion.
//
// Pair extraction follows the classic Schwartz-Hearst procedure: a
// parenthesized short-form candidate next to preceding sentence text, the
// best long form found by matching short-form characters right-to-left
// through the candidate text, then the standard validity constraints on
// the surviving pair. Expansion rewrites every standalone occurrence of a
// short form *after* its defining "long (short)" construct; the defining
// construct itself is never touched, which keeps character offsets inside
// the definition sentence valid.

#include "medlink/text.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace medlink {

struct AbbreviationPair {
    std::string short_form;
    std::string long_form;

    bool operator==(const AbbreviationPair&) const = default;
};

// One splice applied to the original text: [start, end) replaced by text.
struct TextReplacement {
    std::size_t start = 0;
    std::size_t end = 0;
    std::string text;
};

struct ExpansionResult {
    std::string expanded_text;
    std::vector<AbbreviationPair> pairs;
    std::vector<TextReplacement> replacements; // ascending, non-overlapping
};

namespace abbrev_detail {

inline bool has_letter(std::string_view s) {
    for (char c : s) {
        char l = to_lower_byte(c);
        if (l >= 'a' && l <= 'z') return true;
    }
    return false;
}

inline bool has_capital(std::string_view s) {
    for (char c : s)
        if (c >= 'A' && c <= 'Z') return true;
    return false;
}

inline bool valid_short_form(std::string_view s) {
    if (s.empty()) return false;
    return has_letter(s) && (is_alnum_byte(s[0]) || s[0] == '(');
}

// Match short-form characters right-to-left through the long-form
// candidate; the first character of the short form must start a word.
inline std::optional<std::string> find_best_long_form(std::string_view short_form,
                                                      std::string_view long_form) {
    int s_index = static_cast<int>(short_form.size()) - 1;
    int l_index = static_cast<int>(long_form.size()) - 1;
    for (; s_index >= 0; --s_index) {
        char curr = to_lower_byte(short_form[static_cast<std::size_t>(s_index)]);
        if (!is_alnum_byte(curr)) continue;
        while ((l_index >= 0 &&
                to_lower_byte(long_form[static_cast<std::size_t>(l_index)]) != curr) ||
               (s_index == 0 && l_index > 0 &&
                is_alnum_byte(long_form[static_cast<std::size_t>(l_index - 1)])))
            --l_index;
        if (l_index < 0) return std::nullopt;
        --l_index;
    }
    // snap the start back to a word boundary
    std::size_t start = 0;
    if (l_index >= 0) {
        std::size_t sp = long_form.rfind(' ', static_cast<std::size_t>(l_index));
        start = (sp == std::string_view::npos) ? 0 : sp + 1;
    }
    return std::string(long_form.substr(start));
}

inline std::size_t count_long_form_tokens(std::string_view s) {
    // tokens delimited by whitespace or hyphen
    std::size_t n = 0;
    bool in_token = false;
    for (char c : s) {
        bool delim = is_space_byte(c) || c == '-';
        if (!delim && !in_token) ++n;
        in_token = !delim;
    }
    return n;
}

// Validity constraints on a candidate pair; returns the accepted long form.
inline std::optional<std::string> accept_pair(std::string_view short_form,
                                              std::string_view long_form) {
    if (short_form.size() <= 1) return std::nullopt;
    std::optional<std::string> best = find_best_long_form(short_form, long_form);
    if (!best) return std::nullopt;

    std::size_t long_tokens = count_long_form_tokens(*best);
    std::size_t short_chars = 0;
    for (char c : short_form)
        if (is_alnum_byte(c)) ++short_chars;

    const std::string short_str(short_form);
    if (best->size() < short_form.size()) return std::nullopt;
    if (best->find(short_str + " ") != std::string::npos) return std::nullopt;
    if (best->size() >= short_form.size() &&
        best->compare(best->size() - short_form.size(), short_form.size(), short_form) == 0)
        return std::nullopt;
    if (long_tokens > short_chars * 2) return std::nullopt;
    if (long_tokens > short_chars + 5) return std::nullopt;
    if (short_chars > 10) return std::nullopt;
    return best;
}

struct Definition {
    std::string short_form;
    std::string long_form;
    std::size_t def_begin = 0; // start of the "long (short)" construct in the text
    std::size_t def_end = 0;   // index of the ')' closing the defining construct
};

// find last occurrence of `needle` starting in [from, to)
inline std::optional<std::size_t> rfind_in(std::string_view text, std::string_view needle,
                                           std::size_t from, std::size_t to) {
    if (to < from + needle.size()) return std::nullopt;
    std::size_t pos = text.rfind(needle, to - needle.size());
    if (pos == std::string_view::npos || pos < from) return std::nullopt;
    return pos;
}

inline std::vector<Definition> extract_definitions(std::string_view text) {
    std::vector<Definition> defs;
    std::size_t base = 0;
    while (true) {
        std::size_t rel = text.find(" (", base);
        if (rel == std::string_view::npos) break;
        std::size_t open = rel + 1;
        std::size_t close = text.find(')', open);
        if (close == std::string_view::npos) break;

        // long-form candidate runs from the last clause break to the paren
        std::size_t lf_start = base;
        auto dot = rfind_in(text, ". ", base, open);
        auto comma = rfind_in(text, ", ", base, open);
        if (dot || comma) {
            std::size_t sent_end = std::max(dot.value_or(0), comma.value_or(0));
            lf_start = sent_end + 2;
        }
        std::string long_form(text.substr(lf_start, open - lf_start));
        std::string short_form(text.substr(open + 1, close - open - 1));

        if (short_form.size() > 1 && long_form.size() > 1) {
            if (short_form.find('(') != std::string::npos) {
                std::size_t next_close = text.find(')', close + 1);
                if (next_close != std::string_view::npos) {
                    short_form = std::string(text.substr(open + 1, next_close - open - 1));
                    close = next_close;
                }
            }
            if (std::size_t cut = short_form.find(", "); cut != std::string::npos)
                short_form.resize(cut);
            if (std::size_t cut = short_form.find("; "); cut != std::string::npos)
                short_form.resize(cut);

            bool swapped = false;
            std::size_t swap_begin = base;
            if (count_words(short_form) > 2 || short_form.size() > long_form.size()) {
                // roles swap: parenthesized text is the long form and the
                // word immediately before the paren is the short form
                std::size_t tmp_start = base;
                if (open >= 2) {
                    auto sp = rfind_in(text, " ", base, open - 1);
                    if (sp) tmp_start = *sp + 1;
                }
                std::string tmp(text.substr(tmp_start, (open - 1) - tmp_start));
                long_form = std::move(short_form);
                short_form = has_capital(tmp) ? std::move(tmp) : std::string();
                swapped = true;
                swap_begin = tmp_start;
            }
            if (valid_short_form(short_form)) {
                std::string st = trim(short_form);
                std::string lt = trim(long_form);
                if (auto best = accept_pair(st, lt)) {
                    std::size_t begin;
                    if (swapped) {
                        begin = swap_begin;
                    } else {
                        // the accepted long form is a suffix of the candidate
                        // text that ends right before the " ("
                        std::size_t lt_end = open;
                        while (lt_end > lf_start && is_space_byte(text[lt_end - 1])) --lt_end;
                        begin = lt_end >= best->size() ? lt_end - best->size() : 0;
                    }
                    defs.push_back({std::move(st), std::move(*best), begin, close});
                }
            }
        }
        base = close + 1;
    }
    return defs;
}

} // namespace abbrev_detail

// Extract (short, long) pairs and expand later standalone occurrences of
// each short form. An occurrence is standalone when neither neighbor is an
// alphanumeric byte; "later" means strictly after the defining ')'. Any
// occurrence falling inside a defining "long (short)" construct is left
// alone so definition sentences keep their character offsets. At a position
// where several short forms match, the longest wins; a short form defined
// more than once uses its most recent preceding definition.
inline ExpansionResult expand_abbreviations(std::string_view text) {
    ExpansionResult result;
    std::vector<abbrev_detail::Definition> defs = abbrev_detail::extract_definitions(text);
    for (const auto& d : defs) result.pairs.push_back({d.short_form, d.long_form});

    std::string& out = result.expanded_text;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const abbrev_detail::Definition* match = nullptr;
        for (const auto& d : defs) {
            if (d.def_end >= i) continue; // definition not yet seen at this point
            if (text.compare(i, d.short_form.size(), d.short_form) != 0) continue;
            std::size_t end = i + d.short_form.size();
            bool left_ok = (i == 0) || !is_alnum_byte(text[i - 1]);
            bool right_ok = (end == text.size()) || !is_alnum_byte(text[end]);
            if (!left_ok || !right_ok) continue;
            bool in_construct = false;
            for (const auto& other : defs) {
                if (i <= other.def_end && end > other.def_begin) {
                    in_construct = true;
                    break;
                }
            }
            if (in_construct) continue;
            if (!match || d.short_form.size() > match->short_form.size() ||
                (d.short_form.size() == match->short_form.size() &&
                 d.def_end > match->def_end))
                match = &d;
        }
        if (match) {
            result.replacements.push_back({i, i + match->short_form.size(), match->long_form});
            out += match->long_form;
            i += match->short_form.size();
        } else {
            out += text[i];
            ++i;
        }
    }
    return result;
}

// Map a character span on the original text through a replacement list.
// Boundaries inside a replaced region snap outward so the span covers the
// whole substituted long form.
inline std::pair<std::size_t, std::size_t> remap_span(
    const std::vector<TextReplacement>& replacements, std::size_t start, std::size_t end) {
    auto map_point = [&](std::size_t p, bool is_end) {
        std::ptrdiff_t delta = 0;
        for (const auto& r : replacements) {
            if (r.end <= p) {
                delta += static_cast<std::ptrdiff_t>(r.text.size()) -
                         static_cast<std::ptrdiff_t>(r.end - r.start);
            } else if (r.start < p) {
                // inside the replaced region: snap
                std::size_t mapped_start = static_cast<std::size_t>(
                    static_cast<std::ptrdiff_t>(r.start) + delta);
                return is_end ? mapped_start + r.text.size() : mapped_start;
            } else {
                break;
            }
        }
        return static_cast<std::size_t>(static_cast<std::ptrdiff_t>(p) + delta);
    };
    return {map_point(start, false), map_point(end, true)};
}

} // namespace medlink
