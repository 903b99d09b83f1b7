#pragma once
// Shared helpers for line-oriented JSON input. All parse failures carry
// "path:line" so bad records can be located directly.

#include "medlink/common.hpp"

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace medlink::detail {

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open input file: " + path);
    return in;
}

inline nlohmann::json parse_jsonl_line(const std::string& line, const std::string& path,
                                       std::size_t line_no) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw DataError(path + ":" + std::to_string(line_no) + ": malformed record");
    return j;
}

inline std::string string_field(const nlohmann::json& j, const char* key,
                                const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_string())
        throw DataError(where + ": missing string field \"" + key + "\"");
    return j.at(key).get<std::string>();
}

inline std::vector<std::string> string_array(const nlohmann::json& j, const char* key,
                                             const std::string& where) {
    std::vector<std::string> out;
    if (!j.contains(key)) return out;
    if (!j.at(key).is_array()) throw DataError(where + ": field \"" + key + "\" must be an array");
    for (const auto& v : j.at(key)) {
        if (!v.is_string()) throw DataError(where + ": field \"" + key + "\" must hold strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

} // namespace medlink::detail
