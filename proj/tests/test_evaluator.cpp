#include <doctest.h>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "rsnkg/evaluator.hpp"

using namespace rsnkg;

namespace {

// 20 distinct triples over 10 entities and 3 relations; every id is used.
KnowledgeGraph completion_graph() {
    const int spec[20][3] = {{0, 0, 1}, {1, 0, 2}, {2, 1, 3}, {3, 0, 4}, {4, 2, 5},
                             {5, 0, 6}, {6, 1, 7}, {7, 0, 8}, {8, 2, 9}, {9, 0, 0},
                             {0, 1, 5}, {1, 2, 6}, {2, 0, 7}, {3, 1, 8}, {4, 0, 9},
                             {5, 2, 0}, {6, 0, 1}, {7, 1, 2}, {8, 0, 3}, {9, 2, 4}};
    std::vector<std::array<std::string, 3>> rows;
    for (const auto& t : spec)
        rows.push_back({"e" + std::to_string(t[0]), "r" + std::to_string(t[1]),
                        "e" + std::to_string(t[2])});
    return add_reverse_relations(build_graph(rows, KgTag::Single));
}

Mat<float> random_embeddings(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Mat<float> m(rows, cols);
    Rng rng(seed);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = float(rng.next_uniform(-1.0, 1.0));
    return m;
}

}  // namespace

TEST_SUITE("evaluator") {

TEST_CASE("hits and mrr follow the direct formulas") {
    std::vector<std::uint32_t> ranks = {1, 2, 10};
    CHECK(hits_at_k(ranks, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(hits_at_k(ranks, 10) == 1.0);
    CHECK(mrr(ranks) == doctest::Approx((1.0 + 0.5 + 0.1) / 3.0).epsilon(1e-15));

    std::vector<std::uint32_t> ones = {1, 1, 1, 1};
    auto m = summarize(ones);
    CHECK(m.hits1 == 1.0);
    CHECK(m.hits10 == 1.0);
    CHECK(m.mrr == 1.0);

    CHECK_THROWS_AS(hits_at_k({}, 1), DataError);
    CHECK_THROWS_AS(mrr({}), DataError);
    CHECK_THROWS_AS(mrr({1, 0, 2}), DataError);
}

TEST_CASE("metrics over a thousand random ranks match an independent tally") {
    Rng rng(77);
    std::vector<std::uint32_t> ranks;
    for (int i = 0; i < 1000; ++i) ranks.push_back(std::uint32_t(1 + rng.next_index(50)));

    std::size_t le1 = 0, le10 = 0;
    double recip = 0.0;
    for (auto r : ranks) {
        le1 += r <= 1;
        le10 += r <= 10;
        recip += 1.0 / r;
    }
    auto m = summarize(ranks);
    CHECK(m.hits1 == doctest::Approx(double(le1) / 1000.0).epsilon(1e-15));
    CHECK(m.hits10 == doctest::Approx(double(le10) / 1000.0).epsilon(1e-15));
    CHECK(m.mrr == doctest::Approx(recip / 1000.0).epsilon(1e-13));
    CHECK(m.hits1 <= m.hits10);
    CHECK(m.mrr >= m.hits1);
}

TEST_CASE("copied counterpart embeddings align perfectly") {
    const Eigen::Index d = 6, half = 5;
    Mat<float> emb = random_embeddings(2 * half, d, 3);
    std::vector<KgTag> origin;
    for (Eigen::Index i = 0; i < half; ++i) origin.push_back(KgTag::Kg1);
    for (Eigen::Index i = 0; i < half; ++i) origin.push_back(KgTag::Kg2);
    for (Eigen::Index i = 0; i < half; ++i) emb.row(half + i) = emb.row(i);

    AlignmentTestSet test;
    for (EntityId i = 0; i < half; ++i) test.pairs.push_back({i, EntityId(half + i)});
    auto m = align_entities(emb, origin, test);
    CHECK(m.hits1 == 1.0);
    CHECK(m.mrr == 1.0);
    CHECK(m.ranks.size() == 2 * test.pairs.size());  // both directions
}

TEST_CASE("random embeddings score like uniform ranks") {
    // With 100 candidates and i.i.d. embeddings the truth's rank is uniform
    // on 1..100, so MRR approaches (1/100) * sum 1/r = H_100 / 100. Frozen
    // from an independent evaluation: 0.051873775176396202608.
    const double expected = 0.051873775176396202608;
    const Eigen::Index sources = 1000, cands = 100, d = 8;
    Mat<float> emb = random_embeddings(sources + cands, d, 11);
    std::vector<KgTag> origin;
    for (Eigen::Index i = 0; i < sources; ++i) origin.push_back(KgTag::Kg1);
    for (Eigen::Index i = 0; i < cands; ++i) origin.push_back(KgTag::Kg2);
    AlignmentTestSet test;
    for (EntityId i = 0; i < sources; ++i)
        test.pairs.push_back({i, EntityId(sources + i % cands)});
    auto m = align_entities(emb, origin, test, Similarity::Cosine, AlignDirection::OneToTwo);
    CHECK(m.ranks.size() == 1000);
    CHECK(m.mrr > expected * 0.5);
    CHECK(m.mrr < expected * 1.5);
}

TEST_CASE("cosine ranking is invariant under uniform positive scaling") {
    const Eigen::Index half = 40, d = 5;
    Mat<float> emb = random_embeddings(2 * half, d, 21);
    std::vector<KgTag> origin;
    for (Eigen::Index i = 0; i < half; ++i) origin.push_back(KgTag::Kg1);
    for (Eigen::Index i = 0; i < half; ++i) origin.push_back(KgTag::Kg2);
    AlignmentTestSet test;
    for (EntityId i = 0; i < half; ++i) test.pairs.push_back({i, EntityId(half + i)});

    auto base = align_entities(emb, origin, test);
    Mat<float> scaled = 3.7f * emb;
    auto same = align_entities(scaled, origin, test);
    CHECK(base.ranks == same.ranks);
}

TEST_CASE("dot-product mode really differs from cosine") {
    // One big-norm distractor dominates dot products but not angles.
    Mat<float> emb(4, 2);
    emb << 1.0f, 0.0f,   // KG1 source
           0.0f, 1.0f,   // KG1 filler
           0.9f, 0.1f,   // true counterpart: small but well aligned
           10.0f, 5.0f;  // distractor with a huge norm
    std::vector<KgTag> origin = {KgTag::Kg1, KgTag::Kg1, KgTag::Kg2, KgTag::Kg2};
    AlignmentTestSet test;
    test.pairs.push_back({0, 2});
    auto cosine = align_entities(emb, origin, test, Similarity::Cosine, AlignDirection::OneToTwo);
    auto dot = align_entities(emb, origin, test, Similarity::Dot, AlignDirection::OneToTwo);
    CHECK(cosine.ranks[0] == 1);
    CHECK(dot.ranks[0] == 2);
}

TEST_CASE("alignment rejects out-of-vocabulary or mis-tagged test entities") {
    Mat<float> emb = random_embeddings(4, 3, 5);
    std::vector<KgTag> origin = {KgTag::Kg1, KgTag::Kg1, KgTag::Kg2, KgTag::Kg2};
    AlignmentTestSet bad;
    bad.pairs.push_back({0, 99});
    CHECK_THROWS_WITH_AS(align_entities(emb, origin, bad), doctest::Contains("99"), DataError);
    AlignmentTestSet swapped;
    swapped.pairs.push_back({2, 0});  // both ids exist but sit in the wrong graphs
    CHECK_THROWS_AS(align_entities(emb, origin, swapped), DataError);
    AlignmentTestSet empty;
    CHECK_THROWS_AS(align_entities(emb, origin, empty), DataError);
}

TEST_CASE("single-direction modes emit one rank per pair") {
    const Eigen::Index half = 6, d = 4;
    Mat<float> emb = random_embeddings(2 * half, d, 31);
    std::vector<KgTag> origin;
    for (Eigen::Index i = 0; i < half; ++i) origin.push_back(KgTag::Kg1);
    for (Eigen::Index i = 0; i < half; ++i) origin.push_back(KgTag::Kg2);
    AlignmentTestSet test;
    for (EntityId i = 0; i < 4; ++i) test.pairs.push_back({i, EntityId(half + i)});
    CHECK(align_entities(emb, origin, test, Similarity::Cosine, AlignDirection::OneToTwo)
              .ranks.size() == 4);
    CHECK(align_entities(emb, origin, test, Similarity::Cosine, AlignDirection::TwoToOne)
              .ranks.size() == 4);
    CHECK(align_entities(emb, origin, test).ranks.size() == 8);
}

TEST_CASE("completion ranks equal a brute-force enumerate-score-filter pass") {
    auto kg = completion_graph();
    Rng rng(41);
    auto model = init_model<double>(8, 1, ModelVariant::Rsn, kg.entity_count(),
                                    kg.relation_count(), rng);

    std::vector<Triple> test = {kg.triples[0], kg.triples[4], kg.triples[8],
                                kg.triples[11], kg.triples[17]};
    auto metrics = complete_triples(model, test, kg);
    REQUIRE(metrics.ranks.size() == test.size() * 2);

    // Independent pass: one query at a time, scores by explicit dot
    // products, filtering by scanning the triple list.
    std::size_t qi = 0;
    for (const Triple& t : test) {
        const std::array<std::array<std::uint32_t, 3>, 2> dirs = {{
            {t.subject, t.relation, t.object},
            {t.object, kg.reverse_of(t.relation), t.subject},
        }};
        for (const auto& [head, rel, answer] : dirs) {
            std::vector<Path> one = {{head, rel}};
            auto batch = pack_paths(one, 0, 1, kg.entity_count(), kg.relation_count());
            Mat<double> out = forward_eval(model, batch);
            std::vector<double> score(kg.entity_count());
            for (EntityId c = 0; c < kg.entity_count(); ++c)
                score[c] = out.row(1).dot(model.embeddings.row(c));

            std::uint32_t rank = 1, raw_rank = 1;
            for (EntityId c = 0; c < kg.entity_count(); ++c) {
                if (c == answer) continue;
                if (score[c] >= score[answer]) ++raw_rank;
                bool known = false;
                for (const Triple& k : kg.triples)
                    if (k.subject == head && k.relation == rel && k.object == c) known = true;
                if (known) continue;
                if (score[c] >= score[answer]) ++rank;
            }
            CHECK(metrics.ranks[qi] == rank);
            CHECK(rank <= raw_rank);  // filtering can only improve the rank
            ++qi;
        }
    }
}

TEST_CASE("a shared-context positive is excluded from the candidate pool") {
    std::vector<std::array<std::string, 3>> rows = {{"a", "r", "b"}, {"a", "r", "c"}};
    auto kg = add_reverse_relations(build_graph(rows, KgTag::Single));
    Rng rng(43);
    auto model = init_model<double>(4, 1, ModelVariant::Rsn, kg.entity_count(),
                                    kg.relation_count(), rng);

    std::vector<Triple> test = {kg.triples[0]};  // (a, r, b)
    auto metrics = complete_triples(model, test, kg, /*predict_subjects=*/false);
    REQUIRE(metrics.ranks.size() == 1);

    // Candidates are {a, b, c}; c is filtered because (a, r, c) is a known
    // triple, so only a competes with the answer.
    std::vector<Path> one = {{0, 0}};
    auto batch = pack_paths(one, 0, 1, kg.entity_count(), kg.relation_count());
    Mat<double> out = forward_eval(model, batch);
    double score_a = out.row(1).dot(model.embeddings.row(0));
    double score_b = out.row(1).dot(model.embeddings.row(1));
    CHECK(metrics.ranks[0] == (score_a >= score_b ? 2 : 1));
}

TEST_CASE("the model's own top unfiltered candidate earns rank one") {
    auto kg = completion_graph();
    Rng rng(47);
    auto model = init_model<double>(8, 1, ModelVariant::Rsn, kg.entity_count(),
                                    kg.relation_count(), rng);
    const EntityId head = 2;
    const RelationId rel = 1;
    std::vector<Path> one = {{head, rel}};
    auto batch = pack_paths(one, 0, 1, kg.entity_count(), kg.relation_count());
    Mat<double> out = forward_eval(model, batch);
    EntityId best = 0;
    double best_score = -1e300;
    for (EntityId c = 0; c < kg.entity_count(); ++c) {
        double s = out.row(1).dot(model.embeddings.row(c));
        if (s > best_score) {
            best_score = s;
            best = c;
        }
    }
    std::vector<Triple> test = {{head, rel, best}};
    auto metrics = complete_triples(model, test, kg, /*predict_subjects=*/false);
    CHECK(metrics.ranks[0] == 1);
}

TEST_CASE("completion validates its inputs") {
    std::vector<std::array<std::string, 3>> rows = {{"a", "r", "b"}};
    auto plain = build_graph(rows, KgTag::Single);
    Rng rng(1);
    auto model = init_model<double>(4, 1, ModelVariant::Rsn, 2, 1, rng);
    std::vector<Triple> test = {plain.triples[0]};
    CHECK_THROWS_AS(complete_triples(model, test, plain), DataError);  // not reversed

    auto kg = add_reverse_relations(plain);
    auto wrong = init_model<double>(4, 1, ModelVariant::Rsn, 5, 2, rng);
    CHECK_THROWS_AS(complete_triples(wrong, test, kg), DataError);
    auto ok = init_model<double>(4, 1, ModelVariant::Rsn, 2, 2, rng);
    CHECK_THROWS_AS(complete_triples(ok, {}, kg), DataError);  // empty test set
}

TEST_CASE("evaluation leaves the model untouched") {
    auto kg = completion_graph();
    Rng rng(53);
    auto model = init_model<float>(8, 2, ModelVariant::Rsn, kg.entity_count(),
                                   kg.relation_count(), rng);
    model.bn_in.running_mean.setConstant(0.125f);
    auto embeddings = model.embeddings;
    auto mean = model.bn_in.running_mean;
    auto var = model.bn_out.running_var;

    std::vector<Triple> test = {kg.triples[0], kg.triples[5]};
    complete_triples(model, test, kg);
    CHECK(model.embeddings == embeddings);
    CHECK(model.bn_in.running_mean == mean);
    CHECK(model.bn_out.running_var == var);
}

TEST_CASE("report renderers emit both table and machine formats") {
    auto m = summarize({1, 2, 10});
    auto table = metrics_table(m, "alignment, both directions");
    CHECK(table.find("hits@1") != std::string::npos);
    CHECK(table.find("alignment, both directions") != std::string::npos);
    auto machine = metrics_machine(m);
    CHECK(machine.find("hits@1\t0.333333") != std::string::npos);
    CHECK(machine.find("mrr\t0.533333") != std::string::npos);
    CHECK(machine.find("queries\t3") != std::string::npos);
    auto csv = ranks_csv(m);
    CHECK(csv.find("query,rank") == 0);
    CHECK(csv.find("2,10") != std::string::npos);
}

}  // TEST_SUITE
