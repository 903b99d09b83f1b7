#pragma once
// Stage orchestration: each stage reads its declared inputs, writes its
// artifacts plus a run manifest (config hash, input/output hashes, counts),
// and nothing else. Reruns with unchanged inputs produce byte-identical
// outputs; manifests carry no timestamps for exactly that reason.

#include "medlink/candidates.hpp"
#include "medlink/common.hpp"
#include "medlink/config.hpp"
#include "medlink/corpus.hpp"
#include "medlink/embed.hpp"
#include "medlink/eval.hpp"
#include "medlink/kb.hpp"
#include "medlink/postprocess.hpp"
#include "medlink/rerank.hpp"
#include "medlink/sequence.hpp"

#include <json.hpp>

#include <atomic>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace medlink {

// ---------------------------------------------------------------------------
// Deterministic parallelism: workers pull indices from a shared counter and
// write into pre-sized slots, so results never depend on the worker count.

inline std::size_t resolve_jobs(std::size_t jobs) {
    if (jobs != 0) return jobs;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

inline void parallel_for(std::size_t n, std::size_t jobs,
                         const std::function<void(std::size_t)>& body) {
    jobs = std::min(resolve_jobs(jobs), n);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        while (!stop.load(std::memory_order_relaxed)) {
            std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                stop.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Artifact locations. Explicit config paths win; otherwise stages hand
// files to each other inside output_dir.

inline std::string augmented_kb_path(const PipelineConfig& c) {
    return c.paths.output_dir + "/kb_augmented.jsonl";
}

inline std::string default_corpus_path(const PipelineConfig& c, const std::string& split) {
    return c.paths.output_dir + "/" + split + ".jsonl";
}

inline std::string resolved_corpus_path(const PipelineConfig& c, const std::string& split) {
    const std::string* explicit_path = nullptr;
    if (split == "train") explicit_path = &c.paths.train_corpus;
    else if (split == "dev") explicit_path = &c.paths.dev_corpus;
    else if (split == "test") explicit_path = &c.paths.test_corpus;
    else if (split == "pretrain") explicit_path = &c.paths.pretrain_corpus;
    else throw Error("unknown corpus split \"" + split + "\"");
    if (!explicit_path->empty()) return *explicit_path;
    return default_corpus_path(c, split);
}

inline bool corpus_available(const PipelineConfig& c, const std::string& split) {
    return std::filesystem::exists(resolved_corpus_path(c, split));
}

inline std::string index_vectors_path(const PipelineConfig& c) {
    return c.paths.output_dir + "/index_vectors.tsv";
}
inline std::string candidates_path(const PipelineConfig& c) {
    return c.paths.output_dir + "/candidates.tsv";
}
inline std::string predictions_path(const PipelineConfig& c) {
    return c.paths.output_dir + "/predictions.tsv";
}

// KB used for linking: the augmented KB once kb-augment ran, else the raw
// one from config.
inline std::string linking_kb_path(const PipelineConfig& c) {
    std::string augmented = augmented_kb_path(c);
    if (std::filesystem::exists(augmented)) return augmented;
    if (c.paths.kb.empty())
        throw MissingInputError("no knowledge base: set paths.kb or run kb-augment first");
    return c.paths.kb;
}

// ---------------------------------------------------------------------------
// Run manifests

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open input file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string file_hash(const std::string& path) {
    return hash_hex(fnv1a64(read_file_bytes(path), 0));
}

inline std::string config_hash(const PipelineConfig& c) {
    return hash_hex(fnv1a64(config_to_json(c).dump(), 0));
}

inline void write_manifest(const PipelineConfig& c, const std::string& stage,
                           std::vector<std::string> inputs, std::vector<std::string> outputs,
                           const nlohmann::ordered_json& counts) {
    auto hash_entries = [](std::vector<std::string>& paths) {
        std::sort(paths.begin(), paths.end());
        paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
        nlohmann::ordered_json j;
        for (const auto& p : paths) j[p] = file_hash(p);
        return j;
    };
    nlohmann::ordered_json manifest;
    manifest["stage"] = stage;
    manifest["config_hash"] = config_hash(c);
    manifest["inputs"] = hash_entries(inputs);
    manifest["outputs"] = hash_entries(outputs);
    manifest["counts"] = counts;

    std::string path = c.paths.output_dir + "/manifest_" + stage + ".json";
    std::ofstream out(path);
    if (!out) throw Error("cannot open output file: " + path);
    out << manifest.dump(2) << "\n";
}

inline void ensure_output_dir(const PipelineConfig& c) {
    std::filesystem::create_directories(c.paths.output_dir);
}

// ---------------------------------------------------------------------------
// kb-augment

inline std::string run_kb_augment(const PipelineConfig& c) {
    if (c.paths.kb.empty()) throw ConfigError("kb-augment requires paths.kb");
    if (c.paths.mapping.empty()) throw ConfigError("kb-augment requires paths.mapping");
    ensure_output_dir(c);

    KnowledgeBase kb = load_kb(c.paths.kb);
    CrossKbMapping mapping = load_mapping(c.paths.mapping);
    KbStats before = kb_stats(kb);
    KnowledgeBase augmented = apply_mapping(kb, mapping, c.params.desc_word_limit);
    KbStats after = kb_stats(augmented);
    std::string out_path = augmented_kb_path(c);
    save_kb(augmented, out_path);

    nlohmann::ordered_json counts;
    counts["entities"] = after.entity_count;
    counts["mapping_entries"] = mapping.entries.size();
    counts["described_before"] = before.described_entity_count;
    counts["described_after"] = after.described_entity_count;
    counts["distinct_types_before"] = before.distinct_type_count;
    counts["distinct_types_after"] = after.distinct_type_count;
    write_manifest(c, "kb-augment", {c.paths.kb, c.paths.mapping}, {out_path}, counts);

    std::ostringstream summary;
    summary << "kb-augment: " << after.entity_count << " entities, described "
            << before.described_entity_count << " -> " << after.described_entity_count
            << ", distinct types " << before.distinct_type_count << " -> "
            << after.distinct_type_count << "\n  wrote " << out_path;
    return summary.str();
}

// ---------------------------------------------------------------------------
// preprocess

inline std::string run_preprocess(const PipelineConfig& c) {
    struct Split {
        const char* name;
        const std::string* raw_path;
    };
    const Split splits[] = {{"train", &c.paths.raw_train},
                            {"dev", &c.paths.raw_dev},
                            {"test", &c.paths.raw_test}};
    bool any = false;
    for (const auto& s : splits) any = any || !s.raw_path->empty();
    if (!any)
        throw ConfigError("preprocess requires at least one of paths.raw_train, paths.raw_dev, "
                          "paths.raw_test");
    ensure_output_dir(c);

    RawFormat format = parse_raw_format(c.dataset);
    PreprocessOptions options;
    options.expand_abbreviations = c.filters.expand_abbreviations;
    options.split_composites = c.filters.split_composites;
    options.drop_overlapping = c.filters.drop_overlapping;
    options.group_size = c.params.group_size;

    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    nlohmann::ordered_json counts;
    std::ostringstream summary;
    summary << "preprocess:";
    for (const auto& s : splits) {
        if (s.raw_path->empty()) continue;
        std::vector<RawDocument> docs = load_raw_documents(*s.raw_path, format);
        DropCounts drops;
        AnnotatedCorpus corpus = preprocess_documents(docs, options, drops, s.name);
        std::string out_path = default_corpus_path(c, s.name);
        save_corpus(corpus, out_path);
        CorpusStats stats = corpus_stats(corpus);

        inputs.push_back(*s.raw_path);
        outputs.push_back(out_path);
        nlohmann::ordered_json sc;
        sc["documents"] = stats.documents;
        sc["groups"] = stats.sentence_groups;
        sc["mentions"] = stats.mentions;
        sc["unique_entities"] = stats.unique_entities;
        sc["dropped_invalid_span"] = drops.invalid_span;
        sc["dropped_composite_unsplit"] = drops.composite_unsplit;
        sc["dropped_boundary"] = drops.boundary;
        sc["dropped_overlapping"] = drops.overlapping;
        counts[s.name] = std::move(sc);

        summary << "\n  " << s.name << ": " << stats.documents << " docs, "
                << stats.sentence_groups << " groups, " << stats.mentions << " mentions"
                << " (dropped: invalid_span " << drops.invalid_span << ", composite_unsplit "
                << drops.composite_unsplit << ", boundary " << drops.boundary
                << ", overlapping " << drops.overlapping << ")\n    wrote " << out_path;
    }
    write_manifest(c, "preprocess", inputs, outputs, counts);
    return summary.str();
}

// ---------------------------------------------------------------------------
// downsample: thins the pretraining corpus (falls back to train when no
// pretrain corpus is configured).

inline std::string run_downsample(const PipelineConfig& c) {
    std::string split;
    if (corpus_available(c, "pretrain")) split = "pretrain";
    else if (corpus_available(c, "train")) split = "train";
    else
        throw MissingInputError("downsample: no pretrain or train corpus at " +
                                resolved_corpus_path(c, "pretrain") + " or " +
                                resolved_corpus_path(c, "train"));
    ensure_output_dir(c);

    std::string in_path = resolved_corpus_path(c, split);
    AnnotatedCorpus corpus = load_corpus(in_path, split);
    std::size_t removed = 0;
    AnnotatedCorpus thinned = downsample(corpus, c.params.downsample_threshold, &removed);
    std::string out_path = c.paths.output_dir + "/" + split + "_downsampled.jsonl";
    save_corpus(thinned, out_path);

    nlohmann::ordered_json counts;
    counts["split"] = split;
    counts["groups_before"] = corpus.groups.size();
    counts["groups_after"] = thinned.groups.size();
    counts["removed"] = removed;
    write_manifest(c, "downsample", {in_path}, {out_path}, counts);

    std::ostringstream summary;
    summary << "downsample(" << split << "): " << corpus.groups.size() << " -> "
            << thinned.groups.size() << " groups (" << removed << " removed, threshold "
            << c.params.downsample_threshold << ")\n  wrote " << out_path;
    return summary.str();
}

// ---------------------------------------------------------------------------
// stats

inline std::string run_stats(const PipelineConfig& c) {
    ensure_output_dir(c);
    nlohmann::ordered_json j;
    std::vector<std::string> inputs;

    auto kb_stats_json = [](const KbStats& s) {
        nlohmann::ordered_json out;
        out["entities"] = s.entity_count;
        out["distinct_types"] = s.distinct_type_count;
        out["described_entities"] = s.described_entity_count;
        return out;
    };
    if (!c.paths.kb.empty()) {
        KnowledgeBase kb = load_kb(c.paths.kb);
        j["kb"] = kb_stats_json(kb_stats(kb));
        inputs.push_back(c.paths.kb);

        if (!c.paths.mapping.empty() && !c.paths.gold_mapping.empty()) {
            CrossKbMapping mapping = load_mapping(c.paths.mapping);
            std::map<std::string, std::string> gold = load_gold_mapping(c.paths.gold_mapping);
            j["mapping_accuracy"] = mapping_accuracy(mapping, gold);
            j["integration_performance"] = integration_performance(mapping, gold, kb);
            inputs.push_back(c.paths.mapping);
            inputs.push_back(c.paths.gold_mapping);
        }
    }
    if (std::filesystem::exists(augmented_kb_path(c))) {
        KnowledgeBase kb = load_kb(augmented_kb_path(c), "kb_augmented");
        j["kb_augmented"] = kb_stats_json(kb_stats(kb));
        inputs.push_back(augmented_kb_path(c));
    }

    nlohmann::ordered_json corpora;
    for (const char* split : {"train", "dev", "test", "pretrain"}) {
        if (!corpus_available(c, split)) continue;
        std::string path = resolved_corpus_path(c, split);
        AnnotatedCorpus corpus = load_corpus(path, split);
        CorpusStats stats = corpus_stats(corpus);
        AmbiguityStats ambiguity = ambiguity_stats(corpus);
        nlohmann::ordered_json sc;
        sc["documents"] = stats.documents;
        sc["groups"] = stats.sentence_groups;
        sc["mentions"] = stats.mentions;
        sc["unique_entities"] = stats.unique_entities;
        sc["ambiguous_mentions"] = ambiguity.ambiguous_mention_count;
        sc["ambiguous_fraction"] = ambiguity.ambiguous_fraction_of_unique_mentions;
        if (ambiguity.has_ambiguity) {
            sc["ambiguity_min"] = ambiguity.min_ambiguity;
            sc["ambiguity_median"] = ambiguity.median_ambiguity;
            sc["ambiguity_max"] = ambiguity.max_ambiguity;
        } else {
            sc["ambiguity_min"] = nullptr;
            sc["ambiguity_median"] = nullptr;
            sc["ambiguity_max"] = nullptr;
        }
        corpora[split] = std::move(sc);
        inputs.push_back(path);
    }
    j["corpora"] = std::move(corpora);

    std::string out_path = c.paths.output_dir + "/stats.json";
    {
        std::ofstream out(out_path);
        if (!out) throw Error("cannot open output file: " + out_path);
        out << j.dump(2) << "\n";
    }
    write_manifest(c, "stats", inputs, {out_path}, nlohmann::ordered_json::object());
    return "stats: wrote " + out_path;
}

// ---------------------------------------------------------------------------
// index

inline std::string run_index(const PipelineConfig& c) {
    ensure_output_dir(c);
    std::vector<std::string> inputs;
    std::map<std::string, EmbeddingVector> vectors;
    std::size_t dim = 0;

    if (!c.paths.entity_vectors.empty()) {
        vectors = load_vectors(c.paths.entity_vectors);
        if (vectors.empty()) throw DataError("entity vector file is empty: " + c.paths.entity_vectors);
        dim = vectors.begin()->second.size();
        inputs.push_back(c.paths.entity_vectors);
    } else {
        std::string kb_path = linking_kb_path(c);
        KnowledgeBase kb = load_kb(kb_path);
        dim = c.params.embed_dim;
        HashEmbedder embedder(dim, c.params.embed_seed);
        for (const auto& [id, entity] : kb.entities) {
            TokenSequence seq = build_entity_sequence(entity, /*include_aliases_in_title=*/false,
                                                      c.params.types_word_limit,
                                                      c.params.entity_max);
            vectors.emplace(id, embedder.embed_entity(seq));
        }
        inputs.push_back(kb_path);
    }

    std::optional<std::set<std::string>> filter;
    if (!c.paths.pool.empty()) {
        std::ifstream in = detail::open_input(c.paths.pool);
        std::set<std::string> ids;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty()) ids.insert(line);
        }
        filter = std::move(ids);
        inputs.push_back(c.paths.pool);
    }

    std::vector<std::string> missing;
    CandidateIndex index = build_index(vectors, filter, &missing);
    std::map<std::string, EmbeddingVector> pool_vectors;
    for (const auto& [id, v] : index.pool) pool_vectors.emplace(id, v);
    std::string out_path = index_vectors_path(c);
    save_vectors(pool_vectors, index.dim, out_path);

    nlohmann::ordered_json counts;
    counts["pool_size"] = index.pool.size();
    counts["dim"] = index.dim;
    counts["missing_filter_ids"] = missing.size();
    write_manifest(c, "index", inputs, {out_path}, counts);

    std::ostringstream summary;
    summary << "index: " << index.pool.size() << " entities, dim " << index.dim;
    if (!missing.empty()) summary << " (" << missing.size() << " filter ids without vectors)";
    summary << "\n  wrote " << out_path;
    return summary.str();
}

// ---------------------------------------------------------------------------
// link = retrieve -> rerank -> postprocess

struct MentionTask {
    MentionRef ref;
    std::string surface;
    ContextWindow window;
};

struct ModelOutput {
    CandidateSet candidates;
    std::vector<double> probabilities;
    Prediction prediction;
};

inline std::vector<MentionTask> enumerate_mentions(const AnnotatedCorpus& corpus,
                                                   std::size_t window_len) {
    std::vector<const SentenceGroup*> groups;
    groups.reserve(corpus.groups.size());
    for (const auto& g : corpus.groups) groups.push_back(&g);
    std::sort(groups.begin(), groups.end(), [](const SentenceGroup* a, const SentenceGroup* b) {
        if (a->doc_id != b->doc_id) return a->doc_id < b->doc_id;
        return a->group_index < b->group_index;
    });

    std::vector<MentionTask> tasks;
    for (const SentenceGroup* g : groups) {
        for (std::size_t i = 0; i < g->mentions.size(); ++i) {
            MentionTask task;
            task.ref = {g->doc_id, g->group_index, i};
            task.surface = g->mentions[i].surface;
            task.window = extract_window(*g, g->mentions[i], window_len);
            tasks.push_back(std::move(task));
        }
    }
    return tasks;
}

inline std::vector<ModelOutput> run_model(const std::vector<MentionTask>& tasks,
                                          const CandidateIndex& index, const KnowledgeBase& kb,
                                          const Embedder& embedder, const Scorer& scorer,
                                          const PipelineConfig& c) {
    RerankParams params;
    params.pair_context_max_len = c.params.pair_context_max;
    params.types_word_limit = c.params.types_word_limit;
    params.entity_max_len = c.params.entity_max;

    std::vector<ModelOutput> outputs(tasks.size());
    parallel_for(tasks.size(), c.jobs, [&](std::size_t i) {
        const MentionTask& task = tasks[i];
        TokenSequence ctx = build_context_sequence(task.window, c.params.context_max);
        EmbeddingVector query = embedder.embed_context(ctx);
        ModelOutput out;
        out.candidates = top_k(index, query, c.params.k, task.ref);
        RerankResult reranked = rerank(out.candidates, task.window, kb, scorer, params);
        out.probabilities = std::move(reranked.probabilities);
        out.prediction = std::move(reranked.prediction);
        outputs[i] = std::move(out);
    });
    return outputs;
}

// Backoff per mention, then per-document synthesis over the (possibly
// backed-off) predictions; tasks must be ref-sorted.
inline std::vector<Prediction> apply_postprocessing(const std::vector<ModelOutput>& outputs,
                                                    const std::vector<MentionTask>& tasks,
                                                    const KnowledgeBase& kb, bool do_backoff,
                                                    double threshold, bool do_synthesis) {
    std::vector<Prediction> predictions;
    predictions.reserve(outputs.size());
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        Prediction p = outputs[i].prediction;
        if (do_backoff)
            p = backoff(p, outputs[i].probabilities, outputs[i].candidates, kb, tasks[i].surface,
                        threshold);
        predictions.push_back(std::move(p));
    }
    if (!do_synthesis) return predictions;

    std::map<MentionRef, std::string> surfaces;
    for (const auto& t : tasks) surfaces[t.ref] = t.surface;

    std::vector<Prediction> out;
    out.reserve(predictions.size());
    std::size_t start = 0;
    while (start < predictions.size()) {
        std::size_t end = start;
        while (end < predictions.size() &&
               predictions[end].mention_ref.doc_id == predictions[start].mention_ref.doc_id)
            ++end;
        std::vector<Prediction> doc(predictions.begin() + static_cast<std::ptrdiff_t>(start),
                                    predictions.begin() + static_cast<std::ptrdiff_t>(end));
        std::vector<Prediction> synthesized = synthesize_document(doc, surfaces);
        out.insert(out.end(), std::make_move_iterator(synthesized.begin()),
                   std::make_move_iterator(synthesized.end()));
        start = end;
    }
    return out;
}

inline std::string run_link(const PipelineConfig& c) {
    ensure_output_dir(c);
    std::string index_path = index_vectors_path(c);
    if (!std::filesystem::exists(index_path))
        throw MissingInputError("link: no index vectors at " + index_path +
                                " (run the index stage first)");
    std::string corpus_path = resolved_corpus_path(c, "test");
    if (!std::filesystem::exists(corpus_path))
        throw MissingInputError("link: no test corpus at " + corpus_path);
    std::string kb_path = linking_kb_path(c);

    KnowledgeBase kb = load_kb(kb_path);
    AnnotatedCorpus corpus = load_corpus(corpus_path, "test");
    CandidateIndex index = build_index(load_vectors(index_path));
    if (index.dim != c.params.embed_dim)
        throw ConfigError("index dim " + std::to_string(index.dim) +
                          " does not match params.embed_dim " +
                          std::to_string(c.params.embed_dim) +
                          " used for context embedding");

    HashEmbedder embedder(c.params.embed_dim, c.params.embed_seed);
    std::unique_ptr<Scorer> scorer;
    std::vector<std::string> inputs = {kb_path, corpus_path, index_path};
    if (!c.paths.scores.empty()) {
        scorer = std::make_unique<ScoreFileScorer>(c.paths.scores);
        inputs.push_back(c.paths.scores);
    } else {
        scorer = std::make_unique<ReferenceScorer>(c.params.embed_dim, c.params.embed_seed);
    }

    std::vector<MentionTask> tasks = enumerate_mentions(corpus, c.params.window_len);
    std::vector<ModelOutput> outputs = run_model(tasks, index, kb, embedder, *scorer, c);
    std::vector<Prediction> predictions =
        apply_postprocessing(outputs, tasks, kb, c.postprocess.backoff, c.effective_threshold(),
                             c.postprocess.synthesis);

    std::vector<CandidateSet> candidate_sets;
    candidate_sets.reserve(outputs.size());
    for (const auto& o : outputs) candidate_sets.push_back(o.candidates);
    save_candidates(candidate_sets, candidates_path(c));
    save_predictions(predictions, predictions_path(c));

    std::size_t backoff_count = 0;
    std::size_t synthesis_count = 0;
    for (const auto& p : predictions) {
        if (p.provenance == Provenance::backoff) ++backoff_count;
        if (p.provenance == Provenance::synthesis) ++synthesis_count;
    }
    nlohmann::ordered_json counts;
    counts["groups"] = corpus.groups.size();
    counts["mentions"] = tasks.size();
    counts["backoff"] = backoff_count;
    counts["synthesis"] = synthesis_count;
    write_manifest(c, "link", inputs, {candidates_path(c), predictions_path(c)}, counts);

    std::ostringstream summary;
    summary << "link: " << tasks.size() << " mentions over " << corpus.groups.size()
            << " groups (backoff " << backoff_count << ", synthesis " << synthesis_count
            << ")\n  wrote " << candidates_path(c) << "\n  wrote " << predictions_path(c);
    return summary.str();
}

// ---------------------------------------------------------------------------
// evaluate

inline std::string run_evaluate(const PipelineConfig& c) {
    ensure_output_dir(c);
    std::string pred_path = predictions_path(c);
    if (!std::filesystem::exists(pred_path))
        throw MissingInputError("evaluate: no prediction file at " + pred_path +
                                " (run the link stage first)");
    std::string test_path = resolved_corpus_path(c, "test");
    if (!std::filesystem::exists(test_path))
        throw MissingInputError("evaluate: no test corpus at " + test_path);
    std::string train_path = resolved_corpus_path(c, "train");
    if (!std::filesystem::exists(train_path))
        throw MissingInputError("evaluate: no train corpus at " + train_path +
                                " (slice statistics need the training split)");
    if (c.paths.kb.empty())
        throw ConfigError("evaluate requires paths.kb (the pre-augmentation knowledge base)");

    std::vector<Prediction> predictions = load_predictions(pred_path);
    AnnotatedCorpus test = load_corpus(test_path, "test");
    AnnotatedCorpus train = load_corpus(train_path, "train");
    KnowledgeBase pre_aug_kb = load_kb(c.paths.kb);
    std::vector<std::string> inputs = {pred_path, test_path, train_path, c.paths.kb};

    std::optional<AnnotatedCorpus> pretrain;
    if (corpus_available(c, "pretrain")) {
        std::string pretrain_path = resolved_corpus_path(c, "pretrain");
        pretrain = load_corpus(pretrain_path, "pretrain");
        inputs.push_back(pretrain_path);
    }
    TrainStats stats = build_train_stats(train, pretrain ? &*pretrain : nullptr);

    std::map<MentionRef, std::string> gold;
    std::map<MentionRef, std::string> surfaces;
    for (const auto& g : test.groups) {
        for (std::size_t i = 0; i < g.mentions.size(); ++i) {
            MentionRef ref{g.doc_id, g.group_index, i};
            gold[ref] = g.mentions[i].gold_id;
            surfaces[ref] = g.mentions[i].surface;
        }
    }

    std::optional<std::vector<CandidateSet>> candidate_sets;
    if (std::filesystem::exists(candidates_path(c))) {
        candidate_sets = load_candidates(candidates_path(c));
        inputs.push_back(candidates_path(c));
    }

    EvalReport report = slice_report(predictions, gold, surfaces, stats, pre_aug_kb,
                                     candidate_sets ? &*candidate_sets : nullptr);

    std::string json_path = c.paths.output_dir + "/report.json";
    std::string text_path = c.paths.output_dir + "/report.txt";
    std::string csv_path = c.paths.output_dir + "/slices.csv";
    {
        std::ofstream out(json_path);
        if (!out) throw Error("cannot open output file: " + json_path);
        out << report_to_json(report).dump(2) << "\n";
    }
    {
        std::ofstream out(text_path);
        if (!out) throw Error("cannot open output file: " + text_path);
        out << report_to_text(report);
    }
    save_slice_membership_csv(predictions, gold, surfaces, stats, pre_aug_kb, csv_path);

    nlohmann::ordered_json counts;
    counts["mentions"] = predictions.size();
    counts["overall_accuracy"] = report.overall_accuracy;
    write_manifest(c, "evaluate", inputs, {json_path, text_path, csv_path}, counts);

    std::ostringstream summary;
    summary << "evaluate: accuracy " << format_score(report.overall_accuracy) << " over "
            << predictions.size() << " mentions";
    if (report.recall_at_1)
        summary << " (recall@1 " << format_score(*report.recall_at_1) << ", recall@10 "
                << format_score(*report.recall_at_10) << ")";
    summary << "\n  wrote " << json_path << "\n  wrote " << text_path << "\n  wrote " << csv_path;
    return summary.str();
}

// ---------------------------------------------------------------------------
// sweep-threshold: dev-set accuracy of backoff(+synthesis per config) over
// a threshold grid. Model predictions are computed once; only the
// post-processing is re-applied per grid point.

struct SweepRow {
    double threshold = 0.0;
    double accuracy = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double best_threshold = 0.0;
    double best_accuracy = 0.0;
};

inline SweepResult sweep_threshold(const PipelineConfig& c, const std::vector<double>& grid) {
    std::set<double> points(grid.begin(), grid.end()); // de-duplicated, ascending
    if (points.empty()) throw ConfigError("sweep-threshold: empty threshold grid");
    for (double t : points) validate_threshold(t);

    std::string corpus_path = resolved_corpus_path(c, "dev");
    if (!std::filesystem::exists(corpus_path))
        throw MissingInputError("sweep-threshold: no dev corpus at " + corpus_path);
    std::string index_path = index_vectors_path(c);
    if (!std::filesystem::exists(index_path))
        throw MissingInputError("sweep-threshold: no index vectors at " + index_path +
                                " (run the index stage first)");
    std::string kb_path = linking_kb_path(c);

    KnowledgeBase kb = load_kb(kb_path);
    AnnotatedCorpus dev = load_corpus(corpus_path, "dev");
    CandidateIndex index = build_index(load_vectors(index_path));
    if (index.dim != c.params.embed_dim)
        throw ConfigError("index dim " + std::to_string(index.dim) +
                          " does not match params.embed_dim " + std::to_string(c.params.embed_dim));

    HashEmbedder embedder(c.params.embed_dim, c.params.embed_seed);
    std::unique_ptr<Scorer> scorer;
    if (!c.paths.scores.empty()) scorer = std::make_unique<ScoreFileScorer>(c.paths.scores);
    else scorer = std::make_unique<ReferenceScorer>(c.params.embed_dim, c.params.embed_seed);

    std::vector<MentionTask> tasks = enumerate_mentions(dev, c.params.window_len);
    std::vector<ModelOutput> outputs = run_model(tasks, index, kb, embedder, *scorer, c);

    std::map<MentionRef, std::string> gold;
    for (const auto& g : dev.groups)
        for (std::size_t i = 0; i < g.mentions.size(); ++i)
            gold[{g.doc_id, g.group_index, i}] = g.mentions[i].gold_id;

    SweepResult result;
    bool first = true;
    for (double t : points) {
        std::vector<Prediction> predictions = apply_postprocessing(
            outputs, tasks, kb, /*do_backoff=*/true, t, c.postprocess.synthesis);
        double acc = accuracy(predictions, gold);
        result.rows.push_back({t, acc});
        if (first || acc > result.best_accuracy) {
            result.best_threshold = t;
            result.best_accuracy = acc;
            first = false;
        }
    }
    return result;
}

inline std::string run_sweep_threshold(const PipelineConfig& c, const std::vector<double>& grid) {
    ensure_output_dir(c);
    SweepResult result = sweep_threshold(c, grid);

    std::string out_path = c.paths.output_dir + "/sweep.tsv";
    {
        std::ofstream out(out_path);
        if (!out) throw Error("cannot open output file: " + out_path);
        out << "threshold\taccuracy\n";
        for (const auto& row : result.rows)
            out << format_score(row.threshold) << '\t' << format_score(row.accuracy) << "\n";
    }
    nlohmann::ordered_json counts;
    counts["grid_points"] = result.rows.size();
    counts["best_threshold"] = result.best_threshold;
    counts["best_accuracy"] = result.best_accuracy;
    write_manifest(c, "sweep-threshold",
                   {resolved_corpus_path(c, "dev"), index_vectors_path(c), linking_kb_path(c)},
                   {out_path}, counts);

    std::ostringstream summary;
    summary << "sweep-threshold:\n";
    for (const auto& row : result.rows)
        summary << "  " << format_score(row.threshold) << "\t" << format_score(row.accuracy)
                << "\n";
    summary << "  best " << format_score(result.best_threshold) << " (accuracy "
            << format_score(result.best_accuracy) << ")\n  wrote " << out_path;
    return summary.str();
}

// ---------------------------------------------------------------------------

inline std::string run_stage(const std::string& stage, const PipelineConfig& c) {
    if (stage == "kb-augment") return run_kb_augment(c);
    if (stage == "preprocess") return run_preprocess(c);
    if (stage == "downsample") return run_downsample(c);
    if (stage == "stats") return run_stats(c);
    if (stage == "index") return run_index(c);
    if (stage == "link") return run_link(c);
    if (stage == "evaluate") return run_evaluate(c);
    throw ConfigError("unknown stage \"" + stage + "\"");
}

} // namespace medlink
