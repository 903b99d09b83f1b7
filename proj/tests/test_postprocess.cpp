#include <medlink/postprocess.hpp>

#include "oracle.hpp"
#include "test_helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace medlink;
using testutil::make_entity;
using testutil::make_kb;

namespace {

CandidateSet set_with(std::vector<std::string> ids) {
    CandidateSet set;
    set.mention_ref = {"doc", 0, 0};
    double s = 1.0;
    for (auto& id : ids) set.candidates.emplace_back(std::move(id), s -= 0.1);
    return set;
}

Prediction model_pred(std::string id, double prob, MentionRef ref = {"doc", 0, 0}) {
    Prediction p;
    p.mention_ref = std::move(ref);
    p.entity_id = std::move(id);
    p.probability = prob;
    p.provenance = Provenance::model;
    return p;
}

} // namespace

TEST_CASE("string similarity definition", "[postprocess]") {
    CHECK(string_similarity("Sepsis", "sepsis") == 1.0);
    CHECK_THAT(string_similarity("abc", "abd"), Catch::Matchers::WithinAbs(0.6667, 1e-3));
    CHECK_THAT(string_similarity("abc", "abd"),
               Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-12));
    CHECK(string_similarity("", "x") == 0.0);
    CHECK(string_similarity("", "") == 1.0);
    CHECK(string_similarity("  spaced   out  ", "spaced out") == 1.0); // folding collapses
}

TEST_CASE("string similarity agrees with the reference formula", "[postprocess][property]") {
    std::mt19937_64 rng(901);
    for (int i = 0; i < 1000; ++i) {
        std::string a = testutil::random_ascii(rng, 64);
        std::string b = testutil::random_ascii(rng, 64);
        double expected = oracle::similarity_from_definition(fold(a), fold(b));
        CHECK_THAT(string_similarity(a, b), Catch::Matchers::WithinAbs(expected, 1e-12));
        CHECK(string_similarity(a, b) >= 0.0);
        CHECK(string_similarity(a, b) <= 1.0);
        CHECK(string_similarity(a, a) == 1.0);
        CHECK_THAT(string_similarity(a, b),
                   Catch::Matchers::WithinAbs(string_similarity(b, a), 1e-15));
    }
}

TEST_CASE("confident predictions pass through backoff unchanged", "[postprocess]") {
    KnowledgeBase kb = make_kb({make_entity("E1", "Sepsis"), make_entity("E2", "Asepsis")});
    CandidateSet set = set_with({"E1", "E2"});
    Prediction p = model_pred("E2", 0.60);
    Prediction out = backoff(p, {0.40, 0.60}, set, kb, "sepsis", 0.55);
    CHECK(out == p); // untouched, provenance still model
}

TEST_CASE("low-confidence predictions back off to the closest name", "[postprocess]") {
    KnowledgeBase kb = make_kb({make_entity("E1", "Sepsis"), make_entity("E2", "Asepsis"),
                                make_entity("E3", "Xylophone")});
    CandidateSet set = set_with({"E2", "E1", "E3"});
    Prediction p = model_pred("E2", 0.40);
    Prediction out = backoff(p, {0.40, 0.35, 0.25}, set, kb, "sepsis", 0.45);
    CHECK(out.entity_id == "E1"); // exact fold match beats the one-edit name
    CHECK(out.provenance == Provenance::backoff);
    CHECK(out.probability == 0.35); // model mass of the newly chosen candidate
    CHECK(out.mention_ref == p.mention_ref);
}

TEST_CASE("backoff considers aliases as well as canonical names", "[postprocess]") {
    KnowledgeBase kb = make_kb({
        make_entity("E1", "Completely Different", {}, std::nullopt, {"sepsis"}),
        make_entity("E2", "Asepsis"),
    });
    CandidateSet set = set_with({"E1", "E2"});
    Prediction out = backoff(model_pred("E2", 0.7), {0.3, 0.7}, set, kb, "sepsis", 0.8);
    CHECK(out.entity_id == "E1"); // the alias is an exact match
}

TEST_CASE("backoff similarity ties go to probability then id", "[postprocess]") {
    KnowledgeBase kb = make_kb({make_entity("EB", "same name"), make_entity("EA", "same name"),
                                make_entity("EZ", "unrelated words")});
    CandidateSet set = set_with({"EZ", "EA", "EB"});
    SECTION("higher probability wins the tie") {
        Prediction out =
            backoff(model_pred("EZ", 0.40), {0.40, 0.25, 0.35}, set, kb, "same name", 0.9);
        CHECK(out.entity_id == "EB");
        CHECK(out.probability == 0.35);
    }
    SECTION("equal probabilities fall to the ascending id") {
        Prediction out =
            backoff(model_pred("EZ", 0.40), {0.40, 0.30, 0.30}, set, kb, "same name", 0.9);
        CHECK(out.entity_id == "EA");
    }
}

TEST_CASE("threshold zero never fires", "[postprocess][property]") {
    KnowledgeBase kb = make_kb({make_entity("E1", "Alpha"), make_entity("E2", "Beta")});
    CandidateSet set = set_with({"E1", "E2"});
    std::mt19937_64 rng(902);
    std::uniform_real_distribution<double> prob(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        double p1 = prob(rng), p2 = 1.0 - p1;
        Prediction p = model_pred("E2", p2);
        Prediction out = backoff(p, {p1, p2}, set, kb, "anything", 0.0);
        CHECK(out == p);
    }
}

TEST_CASE("threshold one reroutes every non-certain prediction", "[postprocess]") {
    KnowledgeBase kb = make_kb({make_entity("E1", "exact match"), make_entity("E2", "far off")});
    CandidateSet set = set_with({"E1", "E2"});
    Prediction p = model_pred("E2", 0.9999);
    Prediction out = backoff(p, {0.0001, 0.9999}, set, kb, "exact match", 1.0);
    CHECK(out.entity_id == "E1");
    CHECK(out.provenance == Provenance::backoff);

    // probability exactly 1.0 stays
    Prediction certain = model_pred("E2", 1.0);
    CHECK(backoff(certain, {0.0, 1.0}, set, kb, "exact match", 1.0) == certain);
}

TEST_CASE("backoff validates its inputs", "[postprocess]") {
    KnowledgeBase kb = make_kb({make_entity("E1", "Alpha")});
    CandidateSet set = set_with({"E1"});
    SECTION("threshold outside [0, 1]") {
        CHECK_THROWS_AS(backoff(model_pred("E1", 0.5), {1.0}, set, kb, "x", 1.5), ConfigError);
        CHECK_THROWS_AS(backoff(model_pred("E1", 0.5), {1.0}, set, kb, "x", -0.1), ConfigError);
    }
    SECTION("already post-processed prediction") {
        Prediction p = model_pred("E1", 0.5);
        p.provenance = Provenance::backoff;
        CHECK_THROWS_AS(backoff(p, {1.0}, set, kb, "x", 0.5), Error);
    }
    SECTION("misaligned probabilities") {
        CHECK_THROWS_AS(backoff(model_pred("E1", 0.5), {0.5, 0.5}, set, kb, "x", 0.9),
                        DataError);
    }
}

TEST_CASE("repeated document mentions synthesize to the modal entity", "[postprocess]") {
    std::map<MentionRef, std::string> surfaces;
    std::vector<Prediction> predictions;
    // the worked example: two mentions say one entity, the third says another
    for (std::size_t i = 0; i < 3; ++i) {
        MentionRef ref{"doc", static_cast<std::int64_t>(i), 0};
        surfaces[ref] = "Diabetic Foot Ulcer";
        predictions.push_back(
            model_pred(i < 2 ? "C1456868" : "C4546287", 0.6, ref));
    }
    auto out = synthesize_document(predictions, surfaces);
    REQUIRE(out.size() == 3);
    for (const auto& p : out) CHECK(p.entity_id == "C1456868");
    CHECK(out[0].provenance == Provenance::model);     // unchanged
    CHECK(out[1].provenance == Provenance::model);     // unchanged
    CHECK(out[2].provenance == Provenance::synthesis); // rewritten
    CHECK(out[2].probability == 0.6);                  // probability untouched
    for (std::size_t i = 0; i < 3; ++i) CHECK(out[i].mention_ref == predictions[i].mention_ref);
}

TEST_CASE("synthesis groups by case-folded surface", "[postprocess]") {
    std::map<MentionRef, std::string> surfaces;
    std::vector<Prediction> predictions;
    MentionRef r0{"doc", 0, 0}, r1{"doc", 1, 0}, r2{"doc", 2, 0};
    surfaces[r0] = "Sepsis";
    surfaces[r1] = "SEPSIS";
    surfaces[r2] = "sepsis";
    predictions = {model_pred("E1", 0.9, r0), model_pred("E1", 0.8, r1),
                   model_pred("E2", 0.7, r2)};
    auto out = synthesize_document(predictions, surfaces);
    for (const auto& p : out) CHECK(p.entity_id == "E1");
}

TEST_CASE("singleton mentions never change under synthesis", "[postprocess]") {
    std::map<MentionRef, std::string> surfaces;
    MentionRef r0{"doc", 0, 0}, r1{"doc", 1, 0};
    surfaces[r0] = "alpha";
    surfaces[r1] = "beta";
    std::vector<Prediction> predictions = {model_pred("E1", 0.2, r0),
                                           model_pred("E2", 0.3, r1)};
    auto out = synthesize_document(predictions, surfaces);
    CHECK(out == predictions);
}

TEST_CASE("a count tie synthesizes to the higher summed probability", "[postprocess]") {
    std::map<MentionRef, std::string> surfaces;
    std::vector<Prediction> predictions;
    // E1 twice with 0.7 + 0.6 = 1.3; E2 twice with 0.5 + 0.4 = 0.9
    const double probs[] = {0.7, 0.6, 0.5, 0.4};
    const char* ids[] = {"E1", "E1", "E2", "E2"};
    for (std::size_t i = 0; i < 4; ++i) {
        MentionRef ref{"doc", static_cast<std::int64_t>(i), 0};
        surfaces[ref] = "the term";
        predictions.push_back(model_pred(ids[i], probs[i], ref));
    }
    auto out = synthesize_document(predictions, surfaces);
    for (const auto& p : out) CHECK(p.entity_id == "E1");

    SECTION("a full tie falls to the ascending id") {
        std::vector<Prediction> even = predictions;
        even[0].probability = 0.5;
        even[1].probability = 0.4; // both entities now sum 0.9, count 2
        auto tied = synthesize_document(even, surfaces);
        for (const auto& p : tied) CHECK(p.entity_id == "E1");
    }
}

TEST_CASE("synthesis is idempotent and structure-preserving", "[postprocess][property]") {
    std::mt19937_64 rng(903);
    std::uniform_int_distribution<int> surf_pick(0, 3);
    std::uniform_int_distribution<int> ent_pick(0, 4);
    std::uniform_real_distribution<double> prob(0.0, 1.0);
    const std::string surfs[] = {"alpha", "beta", "gamma", "delta"};

    for (int trial = 0; trial < 50; ++trial) {
        std::map<MentionRef, std::string> surfaces;
        std::vector<Prediction> predictions;
        std::uniform_int_distribution<std::size_t> n_dist(1, 12);
        std::size_t n = n_dist(rng);
        for (std::size_t i = 0; i < n; ++i) {
            MentionRef ref{"doc", static_cast<std::int64_t>(i), 0};
            surfaces[ref] = surfs[surf_pick(rng)];
            predictions.push_back(
                model_pred("E" + std::to_string(ent_pick(rng)), prob(rng), ref));
        }
        auto once = synthesize_document(predictions, surfaces);
        auto twice = synthesize_document(once, surfaces);
        CHECK(twice == once);

        REQUIRE(once.size() == predictions.size());
        std::map<std::string, std::set<std::string>> by_surface;
        for (std::size_t i = 0; i < once.size(); ++i) {
            CHECK(once[i].mention_ref == predictions[i].mention_ref);
            CHECK(once[i].probability == predictions[i].probability);
            by_surface[fold(surfaces[once[i].mention_ref])].insert(once[i].entity_id);
        }
        // every repeated surface now maps to exactly one entity
        std::map<std::string, std::size_t> surface_counts;
        for (const auto& p : predictions) ++surface_counts[fold(surfaces[p.mention_ref])];
        for (const auto& [s, ids] : by_surface)
            if (surface_counts[s] >= 2) CHECK(ids.size() == 1);
    }
}

TEST_CASE("synthesis validates its inputs", "[postprocess]") {
    SECTION("documents may not mix") {
        std::map<MentionRef, std::string> surfaces{{{"docA", 0, 0}, "x"},
                                                   {{"docB", 0, 0}, "x"}};
        std::vector<Prediction> predictions = {model_pred("E1", 0.5, {"docA", 0, 0}),
                                               model_pred("E2", 0.5, {"docB", 0, 0})};
        CHECK_THROWS_AS(synthesize_document(predictions, surfaces), DataError);
    }
    SECTION("a missing surface is an error") {
        std::vector<Prediction> predictions = {model_pred("E1", 0.5, {"docA", 0, 0})};
        CHECK_THROWS_AS(synthesize_document(predictions, {}), DataError);
    }
    SECTION("empty input passes through") {
        CHECK(synthesize_document({}, {}).empty());
    }
}

TEST_CASE("default thresholds carry the documented values", "[postprocess]") {
    CHECK(kThresholdMm == 0.55);
    CHECK(kThresholdBc5cdr == 0.45);
    CHECK_NOTHROW(validate_threshold(0.0));
    CHECK_NOTHROW(validate_threshold(1.0));
    CHECK_THROWS_AS(validate_threshold(1.0000001), ConfigError);
}
