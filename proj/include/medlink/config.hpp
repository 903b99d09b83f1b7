#pragma once
// Pipeline configuration: one JSON file, full key schema, every key
// overridable with --set key.path=value. In-code defaults are the
// shipped parameter values; validation happens before any stage work.

#include "medlink/common.hpp"
#include "medlink/embed.hpp"
#include "medlink/jsonl.hpp"
#include "medlink/postprocess.hpp"
#include "medlink/sequence.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace medlink {

constexpr const char* kConfigEnvVar = "MEDLINK_CONFIG";

struct PipelineConfig {
    std::string dataset = "mm"; // mm | bc5cdr
    std::size_t jobs = 0;       // 0 = logical cores

    struct Paths {
        std::string kb;
        std::string mapping;
        std::string gold_mapping;
        std::string raw_train;
        std::string raw_dev;
        std::string raw_test;
        std::string train_corpus;
        std::string dev_corpus;
        std::string test_corpus;
        std::string pretrain_corpus;
        std::string entity_vectors;
        std::string scores;
        std::string pool;
        std::string output_dir = "out";
    } paths;

    struct Params {
        std::size_t window_len = kDefaultWindowLen;            // 30
        std::size_t context_max = kDefaultContextMaxLen;       // 64
        std::size_t entity_max = kDefaultEntityMaxLen;         // 128
        std::size_t pair_context_max = kDefaultPairContextMaxLen; // 128
        std::size_t types_word_limit = kDefaultTypesWordLimit; // 30
        std::size_t k = kDefaultTopK;                          // 10
        std::optional<double> threshold;                       // default by dataset
        double threshold_mm = kThresholdMm;                    // 0.55
        double threshold_bc5cdr = kThresholdBc5cdr;            // 0.45
        std::size_t group_size = 3;
        std::size_t downsample_threshold = kDefaultDownsampleThreshold; // 40
        std::size_t desc_word_limit = kDefaultDescWordLimit;   // 150
        std::size_t embed_dim = kDefaultEmbedDim;              // 256
        std::uint64_t embed_seed = kDefaultEmbedSeed;          // 42
    } params;

    struct Filters {
        bool expand_abbreviations = true;
        bool split_composites = true;
        bool drop_overlapping = true;
    } filters;

    struct Postprocess {
        bool backoff = true;
        bool synthesis = true;
    } postprocess;

    double effective_threshold() const {
        if (params.threshold) return *params.threshold;
        return dataset == "bc5cdr" ? params.threshold_bc5cdr : params.threshold_mm;
    }
};

namespace detail {

inline void require_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const auto& a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError("unknown config key \"" + where + key + "\"");
    }
}

template <typename T>
inline void read_count(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0))
        throw ConfigError("config key \"" + where + key + "\" must be a non-negative integer");
    out = v.get<T>();
}

inline void read_bool(const nlohmann::json& j, const char* key, bool& out,
                      const std::string& where) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_boolean())
        throw ConfigError("config key \"" + where + key + "\" must be a boolean");
    out = j.at(key).get<bool>();
}

inline void read_string(const nlohmann::json& j, const char* key, std::string& out,
                        const std::string& where) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_string())
        throw ConfigError("config key \"" + where + key + "\" must be a string");
    out = j.at(key).get<std::string>();
}

inline void read_real(const nlohmann::json& j, const char* key, double& out,
                      const std::string& where) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number())
        throw ConfigError("config key \"" + where + key + "\" must be a number");
    out = j.at(key).get<double>();
}

} // namespace detail

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    detail::require_keys(j, {"dataset", "jobs", "paths", "params", "filters", "postprocess"}, "");

    PipelineConfig c;
    detail::read_string(j, "dataset", c.dataset, "");
    detail::read_count(j, "jobs", c.jobs, "");

    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        if (!p.is_object()) throw ConfigError("config key \"paths\" must be an object");
        detail::require_keys(p,
                             {"kb", "mapping", "gold_mapping", "raw_train", "raw_dev", "raw_test",
                              "train_corpus", "dev_corpus", "test_corpus", "pretrain_corpus",
                              "entity_vectors", "scores", "pool", "output_dir"},
                             "paths.");
        detail::read_string(p, "kb", c.paths.kb, "paths.");
        detail::read_string(p, "mapping", c.paths.mapping, "paths.");
        detail::read_string(p, "gold_mapping", c.paths.gold_mapping, "paths.");
        detail::read_string(p, "raw_train", c.paths.raw_train, "paths.");
        detail::read_string(p, "raw_dev", c.paths.raw_dev, "paths.");
        detail::read_string(p, "raw_test", c.paths.raw_test, "paths.");
        detail::read_string(p, "train_corpus", c.paths.train_corpus, "paths.");
        detail::read_string(p, "dev_corpus", c.paths.dev_corpus, "paths.");
        detail::read_string(p, "test_corpus", c.paths.test_corpus, "paths.");
        detail::read_string(p, "pretrain_corpus", c.paths.pretrain_corpus, "paths.");
        detail::read_string(p, "entity_vectors", c.paths.entity_vectors, "paths.");
        detail::read_string(p, "scores", c.paths.scores, "paths.");
        detail::read_string(p, "pool", c.paths.pool, "paths.");
        detail::read_string(p, "output_dir", c.paths.output_dir, "paths.");
    }

    if (j.contains("params")) {
        const auto& p = j.at("params");
        if (!p.is_object()) throw ConfigError("config key \"params\" must be an object");
        detail::require_keys(p,
                             {"window_len", "context_max", "entity_max", "pair_context_max",
                              "types_word_limit", "k", "threshold", "threshold_mm",
                              "threshold_bc5cdr", "group_size", "downsample_threshold",
                              "desc_word_limit", "embed_dim", "embed_seed"},
                             "params.");
        detail::read_count(p, "window_len", c.params.window_len, "params.");
        detail::read_count(p, "context_max", c.params.context_max, "params.");
        detail::read_count(p, "entity_max", c.params.entity_max, "params.");
        detail::read_count(p, "pair_context_max", c.params.pair_context_max, "params.");
        detail::read_count(p, "types_word_limit", c.params.types_word_limit, "params.");
        detail::read_count(p, "k", c.params.k, "params.");
        if (p.contains("threshold") && !p.at("threshold").is_null()) {
            double t = 0.0;
            detail::read_real(p, "threshold", t, "params.");
            c.params.threshold = t;
        }
        detail::read_real(p, "threshold_mm", c.params.threshold_mm, "params.");
        detail::read_real(p, "threshold_bc5cdr", c.params.threshold_bc5cdr, "params.");
        detail::read_count(p, "group_size", c.params.group_size, "params.");
        detail::read_count(p, "downsample_threshold", c.params.downsample_threshold, "params.");
        detail::read_count(p, "desc_word_limit", c.params.desc_word_limit, "params.");
        detail::read_count(p, "embed_dim", c.params.embed_dim, "params.");
        detail::read_count(p, "embed_seed", c.params.embed_seed, "params.");
    }

    if (j.contains("filters")) {
        const auto& f = j.at("filters");
        if (!f.is_object()) throw ConfigError("config key \"filters\" must be an object");
        detail::require_keys(f, {"expand_abbreviations", "split_composites", "drop_overlapping"},
                             "filters.");
        detail::read_bool(f, "expand_abbreviations", c.filters.expand_abbreviations, "filters.");
        detail::read_bool(f, "split_composites", c.filters.split_composites, "filters.");
        detail::read_bool(f, "drop_overlapping", c.filters.drop_overlapping, "filters.");
    }

    if (j.contains("postprocess")) {
        const auto& p = j.at("postprocess");
        if (!p.is_object()) throw ConfigError("config key \"postprocess\" must be an object");
        detail::require_keys(p, {"backoff", "synthesis"}, "postprocess.");
        detail::read_bool(p, "backoff", c.postprocess.backoff, "postprocess.");
        detail::read_bool(p, "synthesis", c.postprocess.synthesis, "postprocess.");
    }
    return c;
}

inline void validate_config(const PipelineConfig& c) {
    if (c.dataset != "mm" && c.dataset != "bc5cdr")
        throw ConfigError("dataset must be \"mm\" or \"bc5cdr\", got \"" + c.dataset + "\"");
    if (c.params.k == 0) throw ConfigError("params.k must be >= 1");
    if (c.params.group_size == 0) throw ConfigError("params.group_size must be >= 1");
    if (c.params.embed_dim == 0) throw ConfigError("params.embed_dim must be >= 1");
    if (c.params.context_max < 5)
        throw ConfigError("params.context_max must be >= 5 (markers plus one mention word)");
    if (c.params.entity_max < 4)
        throw ConfigError("params.entity_max must be >= 4 (marker tokens alone)");
    if (c.params.pair_context_max < 5) throw ConfigError("params.pair_context_max must be >= 5");
    if (c.paths.output_dir.empty()) throw ConfigError("paths.output_dir must not be empty");
    validate_threshold(c.params.threshold_mm);
    validate_threshold(c.params.threshold_bc5cdr);
    if (c.params.threshold) validate_threshold(*c.params.threshold);
}

inline nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
    nlohmann::ordered_json j;
    j["dataset"] = c.dataset;
    j["jobs"] = c.jobs;
    nlohmann::ordered_json paths;
    paths["kb"] = c.paths.kb;
    paths["mapping"] = c.paths.mapping;
    paths["gold_mapping"] = c.paths.gold_mapping;
    paths["raw_train"] = c.paths.raw_train;
    paths["raw_dev"] = c.paths.raw_dev;
    paths["raw_test"] = c.paths.raw_test;
    paths["train_corpus"] = c.paths.train_corpus;
    paths["dev_corpus"] = c.paths.dev_corpus;
    paths["test_corpus"] = c.paths.test_corpus;
    paths["pretrain_corpus"] = c.paths.pretrain_corpus;
    paths["entity_vectors"] = c.paths.entity_vectors;
    paths["scores"] = c.paths.scores;
    paths["pool"] = c.paths.pool;
    paths["output_dir"] = c.paths.output_dir;
    j["paths"] = std::move(paths);
    nlohmann::ordered_json params;
    params["window_len"] = c.params.window_len;
    params["context_max"] = c.params.context_max;
    params["entity_max"] = c.params.entity_max;
    params["pair_context_max"] = c.params.pair_context_max;
    params["types_word_limit"] = c.params.types_word_limit;
    params["k"] = c.params.k;
    params["threshold"] = c.params.threshold ? nlohmann::ordered_json(*c.params.threshold)
                                             : nlohmann::ordered_json(nullptr);
    params["threshold_mm"] = c.params.threshold_mm;
    params["threshold_bc5cdr"] = c.params.threshold_bc5cdr;
    params["group_size"] = c.params.group_size;
    params["downsample_threshold"] = c.params.downsample_threshold;
    params["desc_word_limit"] = c.params.desc_word_limit;
    params["embed_dim"] = c.params.embed_dim;
    params["embed_seed"] = c.params.embed_seed;
    j["params"] = std::move(params);
    nlohmann::ordered_json filters;
    filters["expand_abbreviations"] = c.filters.expand_abbreviations;
    filters["split_composites"] = c.filters.split_composites;
    filters["drop_overlapping"] = c.filters.drop_overlapping;
    j["filters"] = std::move(filters);
    nlohmann::ordered_json postprocess;
    postprocess["backoff"] = c.postprocess.backoff;
    postprocess["synthesis"] = c.postprocess.synthesis;
    j["postprocess"] = std::move(postprocess);
    return j;
}

// Apply one "key.path=value" override onto the raw config JSON. The value
// is parsed as JSON when possible, else taken as a string.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
    std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set expects key.path=value, got \"" + assignment + "\"");
    std::string key_path = assignment.substr(0, eq);
    std::string raw_value = assignment.substr(eq + 1);

    nlohmann::json value = nlohmann::json::parse(raw_value, nullptr, false);
    if (value.is_discarded()) value = raw_value;

    nlohmann::json* node = &j;
    std::size_t pos = 0;
    while (true) {
        std::size_t dot = key_path.find('.', pos);
        std::string part = key_path.substr(pos, dot == std::string::npos ? std::string::npos
                                                                         : dot - pos);
        if (part.empty()) throw ConfigError("--set key has an empty path segment: " + key_path);
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        if (!node->contains(part)) (*node)[part] = nlohmann::json::object();
        node = &(*node)[part];
        if (!node->is_object())
            throw ConfigError("--set key \"" + key_path + "\" descends into a non-object");
        pos = dot + 1;
    }
}

// Load order: explicit path, else $MEDLINK_CONFIG, else pure defaults;
// --set overrides apply on the raw JSON before schema validation.
inline PipelineConfig load_config(const std::string& config_path,
                                  const std::vector<std::string>& overrides = {}) {
    nlohmann::json j = nlohmann::json::object();
    std::string path = config_path;
    if (path.empty()) {
        if (const char* env = std::getenv(kConfigEnvVar)) path = env;
    }
    if (!path.empty()) {
        std::ifstream in = detail::open_input(path);
        j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
    }
    for (const auto& assignment : overrides) apply_override(j, assignment);
    PipelineConfig c = config_from_json(j);
    validate_config(c);
    return c;
}

} // namespace medlink
