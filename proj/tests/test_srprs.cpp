#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rsnkg/srprs.hpp"
#include "support/synthetic.hpp"

using namespace rsnkg;
using testsupport::make_power_law_kg;

namespace {

KnowledgeGraph graph_of(const std::vector<std::array<std::string, 3>>& rows) {
    return build_graph(rows, KgTag::Single);
}

}  // namespace

TEST_SUITE("srprs") {

TEST_CASE("sampling spec validation") {
    SamplingSpec spec;
    spec.target_entities = 10;
    spec.validate();
    CHECK(spec.epsilon == 0.05);  // the published default

    auto bad = spec;
    bad.target_entities = 0;
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = spec;
    bad.epsilon = 1.0;
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = spec;
    bad.groups = 0;
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = spec;
    bad.dense_factor = 0.5;
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = spec;
    bad.damping = 1.0;
    CHECK_THROWS_AS(bad.validate(), DataError);
    CHECK(sample_mode_from_name("dense") == SampleMode::Dense);
    CHECK_THROWS_AS(sample_mode_from_name("sparse"), DataError);
}

TEST_CASE("a single group swallows every entity") {
    auto kg = make_power_law_kg(50, 3, 2, 7);
    auto segments = segment_by_degree(kg, 1);
    REQUIRE(segments.size() == 1);
    CHECK(segments[0].members.size() == kg.entity_count());
    CHECK(segments[0].lo == *std::min_element(kg.degree.begin(), kg.degree.end()));
    CHECK(segments[0].hi == *std::max_element(kg.degree.begin(), kg.degree.end()));
}

TEST_CASE("equal degrees glue all bands together") {
    // A directed cycle: every entity has degree exactly 2.
    std::vector<std::array<std::string, 3>> rows;
    for (int i = 0; i < 6; ++i)
        rows.push_back({"e" + std::to_string(i), "r", "e" + std::to_string((i + 1) % 6)});
    auto kg = graph_of(rows);
    for (auto d : kg.degree) REQUIRE(d == 2);

    auto segments = segment_by_degree(kg, 4);
    REQUIRE(segments.size() == 1);
    CHECK(segments[0].members.size() == 6);
    CHECK_THROWS_AS(segment_by_degree(kg, 7), DataError);  // more groups than entities
    CHECK_THROWS_AS(segment_by_degree(kg, 0), DataError);
}

TEST_CASE("band boundaries match an independent quantile computation") {
    auto kg = make_power_law_kg(1000, 5, 2, 11);
    const std::uint32_t groups = 8;
    auto segments = segment_by_degree(kg, groups);

    // Independent computation: the j/groups degree quantiles, deduplicated.
    std::vector<std::uint32_t> sorted = kg.degree;
    std::sort(sorted.begin(), sorted.end());
    const std::uint64_t n = sorted.size();
    std::vector<std::uint32_t> cuts;
    for (std::uint32_t j = 1; j < groups; ++j) {
        // Smallest degree value v with count(<= v) * groups >= j * n.
        for (std::uint64_t c = 1; c <= n; ++c) {
            if (c * groups >= std::uint64_t(j) * n) {
                const std::uint32_t v = sorted[c - 1];
                if (cuts.empty() || cuts.back() != v) cuts.push_back(v);
                break;
            }
        }
    }
    REQUIRE(segments.size() == cuts.size() + (cuts.back() == sorted.back() ? 0 : 1));
    for (std::size_t b = 0; b < cuts.size(); ++b) CHECK(segments[b].hi == cuts[b]);

    // The segments partition the entity set.
    std::set<EntityId> all;
    std::uint64_t mass = 0;
    for (const auto& s : segments) {
        CHECK(s.lo <= s.hi);
        for (auto e : s.members) {
            CHECK(kg.degree[e] >= s.lo);
            CHECK(kg.degree[e] <= s.hi);
            all.insert(e);
        }
        mass += s.members.size();
    }
    CHECK(all.size() == kg.entity_count());
    CHECK(mass == kg.entity_count());
}

TEST_CASE("quotas are proportional and sum to the target") {
    auto kg = make_power_law_kg(400, 4, 2, 13);
    auto segments = segment_by_degree(kg, 6);
    assign_quotas(segments, 120);
    std::uint64_t total = 0;
    for (const auto& s : segments) {
        total += s.quota;
        CHECK(s.quota <= s.members.size());
        const double share = 120.0 * double(s.members.size()) / double(kg.entity_count());
        CHECK(std::abs(double(s.quota) - share) <= 1.0 + 1e-9);
    }
    CHECK(total == 120);
    CHECK_THROWS_AS(assign_quotas(segments, 100000), DataError);
}

TEST_CASE("pagerank is a probability vector and matches a hand-solved case") {
    auto kg = make_power_law_kg(300, 3, 2, 17);
    auto p = pagerank(kg);
    double sum = 0.0;
    for (double v : p) {
        CHECK(v > 0.0);
        sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);

    // Two nodes, one edge a -> b, b dangling. The fixed point solves
    // p_a = 0.075 + 0.425 p_b + 0.425 p_a ... reduced with p_a + p_b = 1:
    // p_a = 0.5 / 1.425.
    auto two = graph_of({{"a", "r", "b"}});
    auto q = pagerank(two, 0.85, 50);
    const double pa = 0.5 / 1.425;
    CHECK(q[0] == doctest::Approx(pa).epsilon(1e-4));
    CHECK(q[1] == doctest::Approx(1.0 - pa).epsilon(1e-4));
    CHECK_THROWS_AS(pagerank(two, 0.0, 50), DataError);
    CHECK_THROWS_AS(pagerank(two, 0.85, 0), DataError);
}

TEST_CASE("weighted sampling without replacement respects the scores") {
    DegreeSegment seg;
    seg.members = {4, 9};
    std::vector<double> scores(10, 0.0);
    scores[4] = 0.75;
    scores[9] = 0.25;

    Rng rng(23);
    int first_is_4 = 0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        auto picked = random_pagerank_sample(scores, seg, 2, rng);
        REQUIRE(picked.size() == 2);
        CHECK(picked[0] != picked[1]);
        if (picked[0] == 4) ++first_is_4;
    }
    CHECK(std::abs(double(first_is_4) / trials - 0.75) < 0.02);
}

TEST_CASE("quota equal to the segment size selects everyone") {
    DegreeSegment seg;
    seg.members = {1, 3, 5, 7};
    std::vector<double> scores(8, 0.125);
    Rng rng(5);
    auto picked = random_pagerank_sample(scores, seg, 4, rng);
    std::set<EntityId> got(picked.begin(), picked.end());
    CHECK(got == std::set<EntityId>{1, 3, 5, 7});
    CHECK_THROWS_AS(random_pagerank_sample(scores, seg, 5, rng), DataError);
}

TEST_CASE("zero scores fall back to uniform selection with a warning") {
    DegreeSegment seg;
    seg.members = {0, 1, 2};
    std::vector<double> scores(3, 0.0);
    Rng rng(6);
    std::string warning;
    auto picked = random_pagerank_sample(scores, seg, 3, rng, &warning);
    CHECK(picked.size() == 3);
    CHECK(!warning.empty());
}

TEST_CASE("ks statistic endpoints") {
    CHECK(ks_test({1, 2, 2, 5}, {2, 2, 1, 5}).d == 0.0);
    CHECK(ks_test({1, 1, 2}, {9, 10}).d == 1.0);
    CHECK_THROWS_AS(ks_test({}, {1}), DataError);
}

TEST_CASE("ks statistic matches a double-loop oracle") {
    Rng rng(29);
    std::vector<std::uint32_t> a, b;
    for (int i = 0; i < 200; ++i) a.push_back(std::uint32_t(rng.next_index(30)));
    for (int i = 0; i < 157; ++i) b.push_back(std::uint32_t(1 + rng.next_index(40)));

    double expect = 0.0;
    for (std::uint32_t v = 0; v <= 45; ++v) {
        double fa = 0, fb = 0;
        for (auto x : a) fa += x <= v;
        for (auto x : b) fb += x <= v;
        expect = std::max(expect, std::abs(fa / a.size() - fb / b.size()));
    }
    CHECK(ks_test(a, b).d == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("induced subgraphs keep exactly the internal triples") {
    auto kg = graph_of({{"a", "r1", "b"},
                        {"b", "r1", "c"},
                        {"c", "r2", "d"},
                        {"d", "r2", "a"},
                        {"a", "r2", "c"}});
    std::vector<EntityId> keep = {*kg.entities.find("a"), *kg.entities.find("b"),
                                  *kg.entities.find("c")};
    auto sub = induced_subgraph(kg, keep);
    CHECK(sub.triple_count() == 3);  // a-b, b-c, a-c
    CHECK(sub.entities.find("d") == std::nullopt);
    CHECK(sub.entities.find("a").has_value());
    CHECK(sub.relations.find("r1").has_value());

    CHECK_THROWS_AS(induced_subgraph(kg, {99}), DataError);
    CHECK_THROWS_AS(induced_subgraph(add_reverse_relations(kg), keep), DataError);
}

TEST_CASE("densify refuses a star whose leaves cannot raise the average") {
    // Star: hub h with 5 leaves. Average degree 2*5/6 = 1.67; every leaf
    // has degree 1 >= avg/2, and removing one only lowers the average, so
    // no removal sequence can double it.
    std::vector<std::array<std::string, 3>> rows;
    for (int i = 0; i < 5; ++i) rows.push_back({"h", "r", "l" + std::to_string(i)});
    auto star = graph_of(rows);
    CHECK_THROWS_AS(densify(star, 2.0), DataError);
}

TEST_CASE("densify reaches a doubled average degree on a power-law graph") {
    auto kg = make_power_law_kg(600, 4, 2, 31);
    const double avg0 = 2.0 * double(kg.triple_count()) / double(kg.entity_count());
    auto dense = densify(kg, 2.0, 41);
    const double avg1 = 2.0 * double(dense.triple_count()) / double(dense.entity_count());
    CHECK(avg1 >= 2.0 * avg0);
    CHECK(dense.entity_count() < kg.entity_count());

    // Factor 1 keeps the graph as-is; fixed seeds reproduce the result.
    auto same = densify(kg, 1.0, 41);
    CHECK(same.triple_count() == kg.triple_count());
    auto again = densify(kg, 2.0, 41);
    CHECK(again.triple_count() == dense.triple_count());
    CHECK(again.entity_count() == dense.entity_count());
}

TEST_CASE("a generous epsilon accepts the first attempt") {
    auto kg = make_power_law_kg(300, 3, 2, 37);
    SamplingSpec spec;
    spec.target_entities = 60;
    spec.groups = 5;
    spec.epsilon = 0.99;
    spec.seed = 3;
    auto result = sample_dataset(kg, spec);
    CHECK(result.accepted);
    CHECK(result.attempts.size() == 1);
    CHECK(result.selected.size() == 60);
}

TEST_CASE("normal-mode sampling reaches the published threshold") {
    auto kg = make_power_law_kg(1000, 5, 2, 43);
    SamplingSpec spec;
    spec.target_entities = 200;
    spec.groups = 8;
    spec.epsilon = 0.05;
    spec.max_rounds = 12;
    spec.seed = 7;
    auto result = sample_dataset(kg, spec);
    CHECK(result.accepted);
    CHECK(result.statistic.d <= 0.05);
    CHECK(result.selected.size() == 200);

    // Induced property: every sampled triple joins selected entities.
    std::set<std::string> chosen;
    for (EntityId e : result.selected) chosen.insert(kg.entities.label(e));
    for (const Triple& t : result.graph.triples) {
        CHECK(chosen.count(result.graph.entities.label(t.subject)) == 1);
        CHECK(chosen.count(result.graph.entities.label(t.object)) == 1);
    }

    // Determinism under a fixed seed.
    auto again = sample_dataset(kg, spec);
    CHECK(again.selected == result.selected);
    CHECK(again.statistic.d == result.statistic.d);
    CHECK(again.attempts.size() == result.attempts.size());
}

TEST_CASE("dense mode densifies before sampling") {
    auto kg = make_power_law_kg(800, 4, 2, 47);
    SamplingSpec spec;
    spec.target_entities = 100;
    spec.groups = 6;
    spec.epsilon = 0.08;
    spec.max_rounds = 12;
    spec.mode = SampleMode::Dense;
    spec.dense_factor = 1.5;
    spec.seed = 9;
    auto result = sample_dataset(kg, spec);
    CHECK(result.selected.size() == 100);
    CHECK(result.statistic.d <= 0.08);
}

TEST_CASE("an impossible target is rejected up front") {
    auto kg = make_power_law_kg(100, 3, 2, 53);
    SamplingSpec spec;
    spec.target_entities = 5000;
    CHECK_THROWS_AS(sample_dataset(kg, spec), DataError);
}

TEST_CASE("the sampling report is parseable json-lines") {
    auto kg = make_power_law_kg(300, 3, 2, 59);
    SamplingSpec spec;
    spec.target_entities = 50;
    spec.groups = 4;
    spec.epsilon = 0.07;
    spec.max_rounds = 10;
    spec.seed = 11;
    auto result = sample_dataset(kg, spec);
    auto report = sampling_report(result, kg, spec);

    std::istringstream in(report);
    std::string line;
    std::size_t lines = 0;
    nlohmann::json last;
    while (std::getline(in, line)) {
        last = nlohmann::json::parse(line);  // throws on malformed output
        ++lines;
    }
    CHECK(lines == result.attempts.size() + 1);
    CHECK(last["summary"] == true);
    CHECK(last["accepted"] == result.accepted);
    CHECK(last["entities"] == result.graph.entity_count());
    CHECK(last["source_entities"] == kg.entity_count());
    CHECK(last["sample_degree_histogram"].is_array());
}

}  // TEST_SUITE
