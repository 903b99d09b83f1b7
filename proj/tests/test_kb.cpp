#include <medlink/kb.hpp>

#include "test_helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

using namespace medlink;
using testutil::make_entity;
using testutil::make_kb;

namespace {

const char* kThreeLineKb =
    R"({"id":"C0001621","name":"Adrenal gland diseases","aliases":["Adrenal disease"],"types":["Disease or Syndrome"],"description":"A disease of the adrenal glands."})"
    "\n"
    R"({"id":"C0011849","name":"Diabetes Mellitus","aliases":[],"types":["Disease or Syndrome"]})"
    "\n"
    R"({"id":"C0036690","name":"Sepsis","aliases":["Septicemia"],"types":["Disease or Syndrome","Finding"]})"
    "\n";

std::string words_sequence(std::size_t n, const std::string& prefix = "w") {
    std::ostringstream ss;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) ss << ' ';
        ss << prefix << i;
    }
    return ss.str();
}

KnowledgeBase random_kb(std::mt19937_64& rng, std::size_t n) {
    std::vector<EntityRecord> entities;
    std::uniform_int_distribution<int> type_count(0, 3);
    std::uniform_int_distribution<int> coin(0, 1);
    for (std::size_t i = 0; i < n; ++i) {
        EntityRecord e;
        e.id = "E" + std::to_string(i);
        e.canonical_name = testutil::random_token(rng, 10);
        int tc = type_count(rng);
        for (int t = 0; t < tc; ++t) {
            std::string type = "type" + std::to_string(t * 7 + (coin(rng) ? 1 : 0));
            if (std::find(e.types.begin(), e.types.end(), type) == e.types.end())
                e.types.push_back(type);
        }
        if (coin(rng)) e.description = testutil::random_token(rng, 12);
        entities.push_back(std::move(e));
    }
    return make_kb(std::move(entities));
}

CrossKbMapping random_mapping(std::mt19937_64& rng, const KnowledgeBase& kb) {
    CrossKbMapping mapping;
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> type_count(0, 2);
    for (const auto& [id, e] : kb.entities) {
        if (!coin(rng)) continue;
        MappingEntry entry;
        entry.target_id = "T_" + id;
        int tc = type_count(rng);
        for (int t = 0; t < tc; ++t) entry.target_types.push_back("mapped" + std::to_string(t));
        if (coin(rng)) entry.target_description = words_sequence(5, "d");
        mapping.entries.emplace(id, std::move(entry));
    }
    return mapping;
}

} // namespace

TEST_CASE("load_kb reads one entity per line", "[kb]") {
    auto dir = testutil::temp_dir("kb_load");
    testutil::write_file(dir / "kb.jsonl", kThreeLineKb);
    KnowledgeBase kb = load_kb((dir / "kb.jsonl").string());
    REQUIRE(kb.size() == 3);
    const EntityRecord& e = kb.require("C0001621");
    CHECK(e.canonical_name == "Adrenal gland diseases");
    CHECK(e.aliases == std::vector<std::string>{"Adrenal disease"});
    CHECK(e.types == std::vector<std::string>{"Disease or Syndrome"});
    REQUIRE(e.description.has_value());
    CHECK(*e.description == "A disease of the adrenal glands.");
    CHECK_FALSE(kb.require("C0011849").description.has_value());
}

TEST_CASE("load_kb on an empty file yields an empty KB", "[kb]") {
    auto dir = testutil::temp_dir("kb_empty");
    testutil::write_file(dir / "kb.jsonl", "");
    KnowledgeBase kb = load_kb((dir / "kb.jsonl").string());
    CHECK(kb.size() == 0);
}

TEST_CASE("load_kb rejects a duplicate entity id", "[kb]") {
    auto dir = testutil::temp_dir("kb_dup");
    std::string two =
        R"({"id":"C0001621","name":"A","aliases":[],"types":[]})" "\n"
        R"({"id":"C0001621","name":"B","aliases":[],"types":[]})" "\n";
    testutil::write_file(dir / "kb.jsonl", two);
    CHECK_THROWS_AS(load_kb((dir / "kb.jsonl").string()), DataError);
    CHECK_THROWS_WITH(load_kb((dir / "kb.jsonl").string()),
                      Catch::Matchers::ContainsSubstring("C0001621"));
}

TEST_CASE("load_kb rejects malformed records", "[kb]") {
    auto dir = testutil::temp_dir("kb_bad");
    SECTION("not JSON") {
        testutil::write_file(dir / "kb.jsonl", "not json\n");
        CHECK_THROWS_AS(load_kb((dir / "kb.jsonl").string()), DataError);
    }
    SECTION("missing name") {
        testutil::write_file(dir / "kb.jsonl", R"({"id":"X","aliases":[],"types":[]})" "\n");
        CHECK_THROWS_AS(load_kb((dir / "kb.jsonl").string()), DataError);
    }
    SECTION("canonical name repeated as alias") {
        testutil::write_file(dir / "kb.jsonl",
                             R"({"id":"X","name":"A","aliases":["A"],"types":[]})" "\n");
        CHECK_THROWS_AS(load_kb((dir / "kb.jsonl").string()), DataError);
    }
    SECTION("duplicate alias") {
        testutil::write_file(dir / "kb.jsonl",
                             R"({"id":"X","name":"A","aliases":["B","B"],"types":[]})" "\n");
        CHECK_THROWS_AS(load_kb((dir / "kb.jsonl").string()), DataError);
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(load_kb((dir / "absent.jsonl").string()), MissingInputError);
    }
}

TEST_CASE("save_kb then load_kb round-trips and is byte-stable", "[kb]") {
    auto dir = testutil::temp_dir("kb_roundtrip");
    testutil::write_file(dir / "kb.jsonl", kThreeLineKb);
    KnowledgeBase kb = load_kb((dir / "kb.jsonl").string());
    save_kb(kb, (dir / "out1.jsonl").string());
    KnowledgeBase back = load_kb((dir / "out1.jsonl").string());
    CHECK(back.entities == kb.entities);
    save_kb(back, (dir / "out2.jsonl").string());
    CHECK(testutil::read_file(dir / "out1.jsonl") == testutil::read_file(dir / "out2.jsonl"));
}

TEST_CASE("apply_mapping adds the mapped type after the original types", "[kb]") {
    KnowledgeBase kb = make_kb({make_entity("C0001621", "Adrenal gland diseases",
                                            {"Disease or Syndrome"})});
    CrossKbMapping mapping;
    mapping.entries["C0001621"] =
        MappingEntry{"DOID:9553", {"endocrine system disease"}, std::nullopt};
    KnowledgeBase out = apply_mapping(kb, mapping);
    const EntityRecord& e = out.require("C0001621");
    CHECK(e.types ==
          std::vector<std::string>{"Disease or Syndrome", "endocrine system disease"});
}

TEST_CASE("apply_mapping keeps an existing description", "[kb]") {
    KnowledgeBase kb = make_kb({make_entity("E1", "Name", {}, std::string("original text"))});
    CrossKbMapping mapping;
    mapping.entries["E1"] = MappingEntry{"T1", {}, std::string("replacement text")};
    KnowledgeBase out = apply_mapping(kb, mapping);
    CHECK(*out.require("E1").description == "original text");
}

TEST_CASE("apply_mapping truncates a filled description to the word limit", "[kb]") {
    KnowledgeBase kb = make_kb({make_entity("E1", "Name")});
    CrossKbMapping mapping;
    mapping.entries["E1"] = MappingEntry{"T1", {}, words_sequence(200)};
    KnowledgeBase out = apply_mapping(kb, mapping);
    REQUIRE(out.require("E1").description.has_value());
    CHECK(*out.require("E1").description == words_sequence(150));

    KnowledgeBase custom = apply_mapping(kb, mapping, 10);
    CHECK(*custom.require("E1").description == words_sequence(10));
}

TEST_CASE("apply_mapping drops duplicate mapped types and skips unmapped entities", "[kb]") {
    KnowledgeBase kb = make_kb({make_entity("E1", "One", {"X"}),
                                make_entity("E2", "Two", {"Y"})});
    CrossKbMapping mapping;
    mapping.entries["E1"] = MappingEntry{"T1", {"X", "Z"}, std::nullopt};
    KnowledgeBase out = apply_mapping(kb, mapping);
    CHECK(out.require("E1").types == std::vector<std::string>{"X", "Z"});
    CHECK(out.require("E2") == kb.require("E2"));
}

TEST_CASE("apply_mapping is idempotent and never removes structure", "[kb][property]") {
    std::mt19937_64 rng(201);
    for (int trial = 0; trial < 50; ++trial) {
        KnowledgeBase kb = random_kb(rng, 12);
        CrossKbMapping mapping = random_mapping(rng, kb);
        KnowledgeBase once = apply_mapping(kb, mapping);
        KnowledgeBase twice = apply_mapping(once, mapping);
        CHECK(twice.entities == once.entities);

        CHECK(kb_stats(once).distinct_type_count >= kb_stats(kb).distinct_type_count);
        for (const auto& [id, before] : kb.entities) {
            const EntityRecord& after = once.require(id);
            for (const auto& t : before.types)
                CHECK(std::find(after.types.begin(), after.types.end(), t) !=
                      after.types.end());
            if (before.description) {
                REQUIRE(after.description.has_value());
                CHECK(after.description->size() >= before.description->size());
            }
        }
    }
}

TEST_CASE("apply_mapping double application is byte-identical on disk", "[kb]") {
    auto dir = testutil::temp_dir("kb_idem");
    testutil::write_file(dir / "kb.jsonl", kThreeLineKb);
    KnowledgeBase kb = load_kb((dir / "kb.jsonl").string());
    CrossKbMapping mapping;
    mapping.entries["C0001621"] =
        MappingEntry{"DOID:9553", {"endocrine system disease"}, std::string("mapped text")};
    mapping.entries["C0011849"] =
        MappingEntry{"DOID:9351", {"carbohydrate metabolism disease"}, words_sequence(200)};
    KnowledgeBase once = apply_mapping(kb, mapping);
    KnowledgeBase twice = apply_mapping(once, mapping);
    save_kb(once, (dir / "once.jsonl").string());
    save_kb(twice, (dir / "twice.jsonl").string());
    CHECK(testutil::read_file(dir / "once.jsonl") == testutil::read_file(dir / "twice.jsonl"));
}

TEST_CASE("mapping_accuracy counts exact pair matches", "[kb]") {
    SECTION("identity over 10 keys is 1.0") {
        CrossKbMapping mapping;
        std::map<std::string, std::string> gold;
        for (int i = 0; i < 10; ++i) {
            std::string s = "S" + std::to_string(i);
            std::string t = "T" + std::to_string(i);
            mapping.entries[s] = MappingEntry{t, {}, std::nullopt};
            gold[s] = t;
        }
        CHECK(mapping_accuracy(mapping, gold) == 1.0);
    }
    SECTION("two of three correct") {
        CrossKbMapping mapping;
        mapping.entries["S1"] = MappingEntry{"T1", {}, std::nullopt};
        mapping.entries["S2"] = MappingEntry{"T2", {}, std::nullopt};
        mapping.entries["S3"] = MappingEntry{"WRONG", {}, std::nullopt};
        std::map<std::string, std::string> gold{{"S1", "T1"}, {"S2", "T2"}, {"S3", "T3"}};
        CHECK_THAT(mapping_accuracy(mapping, gold),
                   Catch::Matchers::WithinAbs(0.6667, 1e-3));
        CHECK_THAT(mapping_accuracy(mapping, gold),
                   Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-9));
    }
    SECTION("empty mapping scores zero") {
        CrossKbMapping mapping;
        std::map<std::string, std::string> gold;
        for (int i = 0; i < 5; ++i) gold["S" + std::to_string(i)] = "T" + std::to_string(i);
        CHECK(mapping_accuracy(mapping, gold) == 0.0);
    }
    SECTION("empty gold is an error") {
        CrossKbMapping mapping;
        CHECK_THROWS_AS(mapping_accuracy(mapping, {}), DataError);
    }
}

TEST_CASE("integration_performance scores by type overlap", "[kb]") {
    KnowledgeBase target = make_kb({make_entity("A", "Alpha", {"t1", "t2"}),
                                    make_entity("B", "Beta", {"t2", "t3"}),
                                    make_entity("C", "Gamma", {"t4"}),
                                    make_entity("D", "Delta", {"t9"})},
                                   "target");

    SECTION("identity mapping scores 1.0") {
        CrossKbMapping mapping;
        std::map<std::string, std::string> gold;
        for (const std::string id : {"A", "B", "C"}) {
            mapping.entries["S_" + id] = MappingEntry{id, {}, std::nullopt};
            gold["S_" + id] = id;
        }
        CHECK(integration_performance(mapping, gold, target) == 1.0);
    }
    SECTION("a prediction sharing one type with gold counts as a hit") {
        CrossKbMapping mapping;
        mapping.entries["S"] = MappingEntry{"A", {}, std::nullopt}; // A types {t1,t2}
        std::map<std::string, std::string> gold{{"S", "B"}};       // B types {t2,t3}
        CHECK(integration_performance(mapping, gold, target) == 1.0);
    }
    SECTION("one exact, one type-overlapping, one unmapped") {
        CrossKbMapping mapping;
        mapping.entries["S1"] = MappingEntry{"A", {}, std::nullopt}; // exact
        mapping.entries["S2"] = MappingEntry{"A", {}, std::nullopt}; // overlaps B via t2
        std::map<std::string, std::string> gold{{"S1", "A"}, {"S2", "B"}, {"S3", "C"}};
        CHECK_THAT(integration_performance(mapping, gold, target),
                   Catch::Matchers::WithinAbs(0.6667, 1e-3));
        CHECK_THAT(integration_performance(mapping, gold, target),
                   Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-9));
    }
    SECTION("disjoint types miss") {
        CrossKbMapping mapping;
        mapping.entries["S"] = MappingEntry{"C", {}, std::nullopt}; // {t4} vs D {t9}
        std::map<std::string, std::string> gold{{"S", "D"}};
        CHECK(integration_performance(mapping, gold, target) == 0.0);
    }
    SECTION("gold target missing from the KB is an error") {
        CrossKbMapping mapping;
        mapping.entries["S"] = MappingEntry{"A", {}, std::nullopt};
        std::map<std::string, std::string> gold{{"S", "NOPE"}};
        CHECK_THROWS_AS(integration_performance(mapping, gold, target), DataError);
    }
    SECTION("predicted target missing from the KB is a miss, not an error") {
        CrossKbMapping mapping;
        mapping.entries["S"] = MappingEntry{"NOPE", {}, std::nullopt};
        std::map<std::string, std::string> gold{{"S", "A"}};
        CHECK(integration_performance(mapping, gold, target) == 0.0);
    }
}

TEST_CASE("a mapping that equals gold scores 1.0 on both metrics", "[kb][property]") {
    std::mt19937_64 rng(202);
    for (int trial = 0; trial < 20; ++trial) {
        KnowledgeBase target = random_kb(rng, 8);
        // give each entity at least one type so overlap with itself holds
        for (auto& [id, e] : target.entities)
            if (e.types.empty()) e.types.push_back("fallback");
        CrossKbMapping mapping;
        std::map<std::string, std::string> gold;
        int i = 0;
        for (const auto& [id, e] : target.entities) {
            std::string src = "SRC" + std::to_string(i++);
            mapping.entries[src] = MappingEntry{id, {}, std::nullopt};
            gold[src] = id;
        }
        CHECK(mapping_accuracy(mapping, gold) == 1.0);
        CHECK(integration_performance(mapping, gold, target) == 1.0);
    }
}

TEST_CASE("kb_stats counts entities, distinct types, described entities", "[kb]") {
    SECTION("three entities, overlapping types, two descriptions") {
        KnowledgeBase kb = make_kb({make_entity("E1", "One", {"X"}, std::string("d1")),
                                    make_entity("E2", "Two", {"X", "Y"}, std::string("d2")),
                                    make_entity("E3", "Three", {})});
        KbStats s = kb_stats(kb);
        CHECK(s.entity_count == 3);
        CHECK(s.distinct_type_count == 2);
        CHECK(s.described_entity_count == 2);
    }
    SECTION("empty KB") {
        CHECK(kb_stats(KnowledgeBase{}) == KbStats{0, 0, 0});
    }
    SECTION("all entities described") {
        KnowledgeBase kb = make_kb({make_entity("E1", "One", {}, std::string("a")),
                                    make_entity("E2", "Two", {}, std::string("b"))});
        KbStats s = kb_stats(kb);
        CHECK(s.described_entity_count == s.entity_count);
    }
}

TEST_CASE("load_mapping and load_gold_mapping parse their formats", "[kb]") {
    auto dir = testutil::temp_dir("kb_mapping");
    testutil::write_file(
        dir / "mapping.jsonl",
        R"({"source_id":"C1","target_id":"D1","target_types":["a","a","b"],"target_description":"words here"})"
        "\n"
        R"({"source_id":"C2","target_id":"D2","target_types":[]})" "\n");
    CrossKbMapping m = load_mapping((dir / "mapping.jsonl").string());
    REQUIRE(m.entries.size() == 2);
    CHECK(m.entries.at("C1").target_id == "D1");
    CHECK(m.entries.at("C1").target_types == std::vector<std::string>{"a", "b"});
    CHECK(*m.entries.at("C1").target_description == "words here");
    CHECK_FALSE(m.entries.at("C2").target_description.has_value());

    testutil::write_file(dir / "gold.tsv", "C1\tD1\nC2\tD9\n");
    auto gold = load_gold_mapping((dir / "gold.tsv").string());
    REQUIRE(gold.size() == 2);
    CHECK(gold.at("C2") == "D9");

    SECTION("duplicate source_id rejected") {
        testutil::write_file(dir / "dup.jsonl",
                             R"({"source_id":"C1","target_id":"D1","target_types":[]})" "\n"
                             R"({"source_id":"C1","target_id":"D2","target_types":[]})" "\n");
        CHECK_THROWS_AS(load_mapping((dir / "dup.jsonl").string()), DataError);
    }
    SECTION("gold row with wrong column count rejected") {
        testutil::write_file(dir / "bad.tsv", "C1\tD1\tEXTRA\n");
        CHECK_THROWS_AS(load_gold_mapping((dir / "bad.tsv").string()), DataError);
    }
}

TEST_CASE("truncate_words takes the first N words", "[kb]") {
    CHECK(truncate_words("a b c d", 2) == "a b");
    CHECK(truncate_words("a b", 5) == "a b");
    CHECK(truncate_words("  a   b  ", 5) == "a b");
    CHECK(truncate_words("", 3) == "");
}
