#include "rsnkg/kg.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace rsnkg {

std::uint32_t Vocabulary::get_or_add(std::string_view label) {
    auto it = index_.find(std::string(label));
    if (it != index_.end()) return it->second;
    std::uint32_t id = static_cast<std::uint32_t>(labels_.size());
    labels_.emplace_back(label);
    index_.emplace(labels_.back(), id);
    return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocabulary::label(std::uint32_t id) const {
    if (id >= labels_.size()) throw InternalError("vocabulary id out of range");
    return labels_[id];
}

bool KnowledgeGraph::has_triple(const Triple& t) const {
    return triple_set_.count(t) != 0;
}

RelationId KnowledgeGraph::reverse_of(RelationId r) const {
    if (!reversed) throw InternalError("reverse_of called before reverse augmentation");
    if (r >= relations.size()) throw InternalError("relation id out of range");
    return r < original_relation_count ? r + original_relation_count : r - original_relation_count;
}

void KnowledgeGraph::rebuild_index() {
    adjacency.assign(entities.size(), {});
    triple_set_.clear();
    triple_set_.reserve(triples.size() * 2);
    for (const Triple& t : triples) {
        adjacency[t.subject].emplace_back(t.relation, t.object);
        triple_set_.insert(t);
    }
    // Degree counts participation in the pre-reverse triple set only; the
    // synthetic reverses are an internal augmentation, not data.
    degree.assign(entities.size(), 0);
    std::uint64_t originals = reversed ? original_triple_count : triples.size();
    for (std::uint64_t i = 0; i < originals; ++i) {
        const Triple& t = triples[i];
        ++degree[t.subject];
        if (t.object != t.subject) ++degree[t.object];
    }
}

KnowledgeGraph build_graph(const std::vector<std::array<std::string, 3>>& rows, KgTag tag) {
    if (rows.empty()) throw DataError("no triples given");
    KnowledgeGraph kg;
    std::unordered_set<Triple, TripleHash> seen;
    for (const auto& row : rows) {
        Triple t;
        t.subject = kg.entities.get_or_add(row[0]);
        t.relation = kg.relations.get_or_add(row[1]);
        t.object = kg.entities.get_or_add(row[2]);
        if (seen.insert(t).second) kg.triples.push_back(t);
    }
    kg.origin.assign(kg.entities.size(), tag);
    kg.original_relation_count = kg.relations.size();
    kg.original_triple_count = static_cast<std::uint32_t>(kg.triples.size());
    kg.rebuild_index();
    return kg;
}

KnowledgeGraph add_reverse_relations(const KnowledgeGraph& kg) {
    if (kg.reversed) throw DataError("reverse relations already present");
    KnowledgeGraph out;
    out.entities = kg.entities;
    out.relations = kg.relations;
    out.origin = kg.origin;
    out.original_relation_count = kg.relation_count();
    out.original_triple_count = static_cast<std::uint32_t>(kg.triples.size());
    out.reversed = true;

    for (std::uint32_t r = 0; r < kg.relation_count(); ++r) {
        out.relations.get_or_add(kg.relations.label(r) + std::string(kReverseSuffix));
    }
    out.triples = kg.triples;
    out.triples.reserve(kg.triples.size() * 2);
    for (const Triple& t : kg.triples) {
        out.triples.push_back(Triple{t.object, t.relation + out.original_relation_count, t.subject});
    }
    out.rebuild_index();
    return out;
}

KnowledgeGraph assemble_joint(const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
                              const SeedAlignment& seeds) {
    if (kg1.reversed || kg2.reversed)
        throw DataError("assemble_joint expects graphs without reverse relations");
    for (const auto& [e1, e2] : seeds.pairs) {
        if (e1 >= kg1.entity_count())
            throw DataError("seed pair references unknown entity in first graph");
        if (e2 >= kg2.entity_count())
            throw DataError("seed pair references unknown entity in second graph");
    }

    KnowledgeGraph joint;
    std::vector<EntityId> map1(kg1.entity_count()), map2(kg2.entity_count());
    std::vector<RelationId> rmap1(kg1.relation_count()), rmap2(kg2.relation_count());
    for (std::uint32_t e = 0; e < kg1.entity_count(); ++e)
        map1[e] = joint.entities.get_or_add("1:" + kg1.entities.label(e));
    for (std::uint32_t e = 0; e < kg2.entity_count(); ++e)
        map2[e] = joint.entities.get_or_add("2:" + kg2.entities.label(e));
    for (std::uint32_t r = 0; r < kg1.relation_count(); ++r)
        rmap1[r] = joint.relations.get_or_add("1:" + kg1.relations.label(r));
    for (std::uint32_t r = 0; r < kg2.relation_count(); ++r)
        rmap2[r] = joint.relations.get_or_add("2:" + kg2.relations.label(r));

    joint.origin.assign(joint.entities.size(), KgTag::Kg1);
    for (std::uint32_t e = 0; e < kg2.entity_count(); ++e) joint.origin[map2[e]] = KgTag::Kg2;

    std::unordered_set<Triple, TripleHash> seen;
    auto push = [&](Triple t) {
        if (seen.insert(t).second) joint.triples.push_back(t);
    };
    for (const Triple& t : kg1.triples) push({map1[t.subject], rmap1[t.relation], map1[t.object]});
    for (const Triple& t : kg2.triples) push({map2[t.subject], rmap2[t.relation], map2[t.object]});

    // Copy triples of each seed entity to its counterpart, both directions.
    std::unordered_map<EntityId, EntityId> counterpart;
    for (const auto& [e1, e2] : seeds.pairs) {
        EntityId a = map1[e1], b = map2[e2];
        if (!counterpart.emplace(a, b).second || !counterpart.emplace(b, a).second)
            throw DataError("seed alignment is not one-to-one");
    }
    std::uint64_t base = joint.triples.size();
    for (std::uint64_t i = 0; i < base; ++i) {
        Triple t = joint.triples[i];
        auto s_it = counterpart.find(t.subject);
        auto o_it = counterpart.find(t.object);
        if (s_it != counterpart.end()) push({s_it->second, t.relation, t.object});
        if (o_it != counterpart.end()) push({t.subject, t.relation, o_it->second});
    }

    joint.original_relation_count = joint.relations.size();
    joint.original_triple_count = static_cast<std::uint32_t>(joint.triples.size());
    joint.rebuild_index();
    return joint;
}

FrequencyTable element_frequencies(const KnowledgeGraph& kg) {
    if (kg.triples.empty()) throw DataError("cannot compute frequencies of an empty graph");
    FrequencyTable f;
    f.entity_counts.assign(kg.entity_count(), 0);
    f.relation_counts.assign(kg.relation_count(), 0);
    for (const Triple& t : kg.triples) {
        ++f.entity_counts[t.subject];
        ++f.entity_counts[t.object];
        ++f.relation_counts[t.relation];
    }
    return f;
}

AliasTable::AliasTable(const std::vector<double>& probs) : probs_(probs) {
    const std::uint32_t n = static_cast<std::uint32_t>(probs.size());
    threshold_.assign(n, 1.0);
    alias_.assign(n, 0);
    // Vose's method over probabilities scaled by n.
    std::vector<double> scaled(n);
    std::deque<std::uint32_t> small, large;
    for (std::uint32_t i = 0; i < n; ++i) {
        scaled[i] = probs[i] * n;
        (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
        std::uint32_t s = small.front(), l = large.front();
        small.pop_front();
        large.pop_front();
        threshold_[s] = scaled[s];
        alias_[s] = l;
        scaled[l] = (scaled[l] + scaled[s]) - 1.0;
        (scaled[l] < 1.0 ? small : large).push_back(l);
    }
    while (!large.empty()) {
        threshold_[large.front()] = 1.0;
        large.pop_front();
    }
    while (!small.empty()) {
        threshold_[small.front()] = 1.0;
        small.pop_front();
    }
}

std::uint32_t AliasTable::sample(Rng& rng) const {
    if (probs_.empty()) throw InternalError("sampling from an empty alias table");
    std::uint32_t slot = static_cast<std::uint32_t>(rng.next_index(probs_.size()));
    return rng.next_double() < threshold_[slot] ? slot : alias_[slot];
}

namespace {

AliasTable powered_distribution(const std::vector<std::uint64_t>& counts, const char* kind) {
    std::vector<double> probs(counts.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] > 0) {
            probs[i] = std::pow(static_cast<double>(counts[i]), 0.75);
            total += probs[i];
        }
    }
    if (total <= 0.0)
        throw DataError(std::string("all ") + kind + " counts are zero; no noise distribution");
    for (double& p : probs) p /= total;
    return AliasTable(probs);
}

}  // namespace

NoiseDistribution noise_distribution(const FrequencyTable& freqs) {
    if (freqs.entity_counts.empty() || freqs.relation_counts.empty())
        throw DataError("frequency table is empty");
    NoiseDistribution noise;
    noise.entity = powered_distribution(freqs.entity_counts, "entity");
    noise.relation = powered_distribution(freqs.relation_counts, "relation");
    return noise;
}

}  // namespace rsnkg
