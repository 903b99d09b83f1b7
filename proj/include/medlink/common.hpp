#pragma once
// Shared error types and small helpers used across the toolkit.
//
// Error classes map 1:1 to CLI exit codes:
//   ConfigError       -> 2
//   MissingInputError -> 3
//   DataError         -> 4

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace medlink {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration: bad JSON, unknown key, out-of-range value.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// A required input artifact is absent.
class MissingInputError : public Error {
public:
    explicit MissingInputError(const std::string& msg) : Error(msg) {}
};

// Malformed or inconsistent data in an input file or call.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitMissingInput = 3;
constexpr int kExitDataError = 4;

// Seedable FNV-1a 64-bit with a splitmix-style finalizer. Used for feature
// hashing and input fingerprints in run manifests; stable across platforms.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0) {
    std::uint64_t h = 14695981039346656037ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    // finalizer: spreads low-entropy inputs over all 64 bits
    h ^= h >> 30;
    h *= 0xBF58476D1CE4E5B9ULL;
    h ^= h >> 27;
    h *= 0x94D049BB133111EBULL;
    h ^= h >> 31;
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

} // namespace medlink
