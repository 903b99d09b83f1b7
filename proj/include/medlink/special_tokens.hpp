#pragma once
// Reserved marker tokens. Spellings are fixed ASCII, brackets included;
// they may never occur as words in source text.

#include <array>
#include <string_view>

namespace medlink {

inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kEntStartToken = "[ENT_START]";
inline constexpr const char* kEntEndToken = "[ENT_END]";
inline constexpr const char* kEntDescToken = "[ENT_DESC]";

inline constexpr std::array<std::string_view, 5> kReservedTokens = {
    kClsToken, kSepToken, kEntStartToken, kEntEndToken, kEntDescToken};

inline bool is_reserved_token(std::string_view s) {
    for (std::string_view t : kReservedTokens)
        if (s == t) return true;
    return false;
}

} // namespace medlink
