#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rsnkg/kg.hpp"
#include "rsnkg/model.hpp"

namespace rsnkg {

enum class Similarity : std::uint8_t { Cosine = 0, Dot = 1 };
enum class AlignDirection : std::uint8_t { OneToTwo = 0, TwoToOne = 1, Both = 2 };

// Test pairs in joint-vocabulary entity ids: (KG1 entity, KG2 entity).
// Must be disjoint from the training seeds; the evaluator cannot verify
// that and takes the split it is given.
struct AlignmentTestSet {
    std::vector<std::pair<EntityId, EntityId>> pairs;
};

struct Metrics {
    double hits1 = 0.0;
    double hits10 = 0.0;
    double mrr = 0.0;
    std::vector<std::uint32_t> ranks;  // one per query, 1-based
};

// hits = |{r <= k}| / N over 1-based ranks; empty input or a zero rank is
// an error.
double hits_at_k(const std::vector<std::uint32_t>& ranks, std::uint32_t k);
double mrr(const std::vector<std::uint32_t>& ranks);
Metrics summarize(std::vector<std::uint32_t> ranks);

// Report renderers: a human-readable table, machine lines of
// "metric<TAB>value", and a per-query CSV for significance testing.
std::string metrics_table(const Metrics& m, const std::string& heading);
std::string metrics_machine(const Metrics& m);
std::string ranks_csv(const Metrics& m);

namespace detail {

// Pessimistic competition rank of `true_score` among `scores`: ties count
// against the query, so the whole tied block shares its worst rank.
template <typename Derived>
std::uint32_t pessimistic_rank(const Eigen::MatrixBase<Derived>& scores, Eigen::Index true_index) {
    const auto true_score = scores(true_index);
    std::uint32_t rank = 1;
    for (Eigen::Index j = 0; j < scores.size(); ++j) {
        if (j == true_index) continue;
        if (scores(j) >= true_score) ++rank;
    }
    return rank;
}

template <typename Scalar>
Mat<Scalar> normalized_rows(const Mat<Scalar>& m) {
    Mat<Scalar> out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const Scalar n = out.row(i).norm();
        if (n > Scalar(0)) out.row(i) /= n;
    }
    return out;
}

}  // namespace detail

// Ranks each test source entity against every entity of the other graph
// by embedding similarity. `embeddings` holds one row per joint entity id;
// `origin` tags each id with its source graph.
template <typename Scalar>
Metrics align_entities(const Mat<Scalar>& embeddings, const std::vector<KgTag>& origin,
                       const AlignmentTestSet& test, Similarity similarity = Similarity::Cosine,
                       AlignDirection direction = AlignDirection::Both) {
    const Eigen::Index n = embeddings.rows();
    if (Eigen::Index(origin.size()) != n)
        throw DataError("align_entities: origin tags do not cover the embedding rows");
    if (test.pairs.empty()) throw DataError("align_entities: empty test set");

    std::string offenders;
    int listed = 0;
    auto offend = [&](EntityId id, const char* why) {
        if (listed < 8) offenders += " " + std::to_string(id) + " (" + why + ")";
        else if (listed == 8) offenders += " ...";
        ++listed;
    };
    for (const auto& [a, b] : test.pairs) {
        if (a >= n) offend(a, "out of range");
        else if (origin[a] != KgTag::Kg1) offend(a, "not a KG1 entity");
        if (b >= n) offend(b, "out of range");
        else if (origin[b] != KgTag::Kg2) offend(b, "not a KG2 entity");
    }
    if (listed > 0)
        throw DataError("align_entities: test entities missing from the expected vocabulary:" +
                        offenders);

    const Mat<Scalar> rep =
        similarity == Similarity::Cosine ? detail::normalized_rows(embeddings) : embeddings;

    std::vector<EntityId> cand1, cand2;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (origin[std::size_t(i)] == KgTag::Kg1) cand1.push_back(EntityId(i));
        if (origin[std::size_t(i)] == KgTag::Kg2) cand2.push_back(EntityId(i));
    }

    auto run_direction = [&](bool one_to_two, std::vector<std::uint32_t>& ranks) {
        const std::vector<EntityId>& pool = one_to_two ? cand2 : cand1;
        std::vector<Eigen::Index> pos(std::size_t(n), -1);
        Mat<Scalar> cand(Eigen::Index(pool.size()), rep.cols());
        for (std::size_t j = 0; j < pool.size(); ++j) {
            cand.row(Eigen::Index(j)) = rep.row(pool[j]);
            pos[pool[j]] = Eigen::Index(j);
        }
        for (const auto& [a, b] : test.pairs) {
            const EntityId source = one_to_two ? a : b;
            const EntityId truth = one_to_two ? b : a;
            Mat<Scalar> scores = rep.row(source) * cand.transpose();
            ranks.push_back(detail::pessimistic_rank(scores.row(0), pos[truth]));
        }
    };

    std::vector<std::uint32_t> ranks;
    if (direction != AlignDirection::TwoToOne) run_direction(true, ranks);
    if (direction != AlignDirection::OneToTwo) run_direction(false, ranks);
    return summarize(std::move(ranks));
}

// Scores (s, r, ?) completion queries with the trained model: the prefix
// is fed as a length-2 sequence, and the output at the relation step is
// dotted with every candidate entity embedding. Subject queries go
// through the reverse relation: (o, r~, ?). Ranks are filtered against
// `filter` (train + valid + test triples, reverse-augmented).
template <typename Scalar>
Metrics complete_triples(const RsnParameters<Scalar>& model, const std::vector<Triple>& test,
                         const KnowledgeGraph& filter, bool predict_subjects = true,
                         std::uint32_t chunk = 1024) {
    if (!filter.reversed)
        throw DataError("complete_triples: subject prediction needs the reverse-augmented "
                        "graph; run the reverse augmentation first");
    if (filter.entity_count() != model.entity_count ||
        filter.relation_count() != model.relation_count)
        throw DataError("complete_triples: model vocabulary does not match the graph");
    if (test.empty()) throw DataError("complete_triples: empty test set");
    if (chunk < 1) throw DataError("complete_triples: chunk must be positive");

    struct Query {
        EntityId head;
        RelationId rel;
        EntityId answer;
    };
    std::vector<Query> queries;
    queries.reserve(test.size() * (predict_subjects ? 2 : 1));
    for (const Triple& t : test) {
        queries.push_back({t.subject, t.relation, t.object});
        if (predict_subjects) queries.push_back({t.object, filter.reverse_of(t.relation), t.subject});
    }

    const Eigen::Index E = model.entity_count;
    const auto entity_rows = model.embeddings.topRows(E);
    std::vector<std::uint32_t> ranks;
    ranks.reserve(queries.size());
    std::vector<Path> prefix;
    for (std::size_t begin = 0; begin < queries.size(); begin += chunk) {
        const std::size_t count = std::min<std::size_t>(chunk, queries.size() - begin);
        prefix.clear();
        for (std::size_t i = 0; i < count; ++i)
            prefix.push_back({queries[begin + i].head, queries[begin + i].rel});
        auto batch = pack_paths(prefix, 0, prefix.size(), model.entity_count,
                                model.relation_count);
        Mat<Scalar> out = forward_eval(model, batch);
        // Output block of the second position (the relation step).
        Mat<Scalar> scores = out.middleRows(Eigen::Index(count), Eigen::Index(count)) *
                             entity_rows.transpose();
        for (std::size_t i = 0; i < count; ++i) {
            const Query& q = queries[begin + i];
            const auto row = scores.row(Eigen::Index(i));
            const Scalar true_score = row(q.answer);
            std::uint32_t rank = 1;
            for (Eigen::Index c = 0; c < E; ++c) {
                if (EntityId(c) == q.answer) continue;
                if (filter.has_triple({q.head, q.rel, EntityId(c)})) continue;
                if (row(c) >= true_score) ++rank;
            }
            ranks.push_back(rank);
        }
    }
    return summarize(std::move(ranks));
}

}  // namespace rsnkg
