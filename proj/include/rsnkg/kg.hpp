#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rsnkg/rng.hpp"
#include "rsnkg/types.hpp"

namespace rsnkg {

// Appended to a relation label to form the label of its synthetic inverse.
// Input files must not use it; the loader rejects offending lines.
inline constexpr std::string_view kReverseSuffix = "#inv";

// Dense string<->id mapping. Ids are assigned in first-appearance order,
// which keeps every downstream artifact deterministic.
class Vocabulary {
public:
    std::uint32_t get_or_add(std::string_view label);
    std::optional<std::uint32_t> find(std::string_view label) const;
    const std::string& label(std::uint32_t id) const;
    std::uint32_t size() const { return static_cast<std::uint32_t>(labels_.size()); }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.labels_ == b.labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

// Immutable once built: construction is single-threaded, afterwards readers
// may share the graph freely.
struct KnowledgeGraph {
    Vocabulary entities;
    Vocabulary relations;
    std::vector<Triple> triples;           // deduplicated, insertion order
    std::vector<KgTag> origin;             // per entity
    std::vector<std::vector<std::pair<RelationId, EntityId>>> adjacency;  // subject -> (relation, object)
    std::vector<std::uint32_t> degree;     // triples an entity participates in, pre-reverse

    // Bookkeeping for the reverse augmentation. While reversed == false the
    // graph holds only original relations.
    bool reversed = false;
    std::uint32_t original_relation_count = 0;
    std::uint32_t original_triple_count = 0;

    std::uint32_t entity_count() const { return entities.size(); }
    std::uint32_t relation_count() const { return relations.size(); }
    std::uint64_t triple_count() const { return triples.size(); }

    bool has_triple(const Triple& t) const;

    // Inverse relation id; valid only after reverse augmentation. An
    // involution: reverse_of(reverse_of(r)) == r.
    RelationId reverse_of(RelationId r) const;

    // Rebuilds adjacency, degree and the dedup index from `triples`.
    void rebuild_index();

private:
    std::unordered_set<Triple, TripleHash> triple_set_;
};

struct SeedAlignment {
    // (entity in KG1, entity in KG2), ids valid in the respective graphs.
    std::vector<std::pair<EntityId, EntityId>> pairs;
};

// Builds a graph from already-parsed string triples. `tag` is recorded as
// the origin of every entity.
KnowledgeGraph build_graph(const std::vector<std::array<std::string, 3>>& rows, KgTag tag);

// For each (s, r, o) adds (o, r~, s) with a fresh relation labelled
// label(r) + kReverseSuffix. Doubles both the triple and relation sets.
// Throws DataError if reverses are already present.
KnowledgeGraph add_reverse_relations(const KnowledgeGraph& kg);

// Merges two graphs into one vocabulary (labels prefixed "1:" / "2:"),
// then copies every triple incident to a seed entity onto its counterpart,
// in both directions. Counterparts stay distinct nodes.
KnowledgeGraph assemble_joint(const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
                              const SeedAlignment& seeds);

struct FrequencyTable {
    // entity_counts[e]: triple slots (subject or object) e fills; a
    // self-loop fills both. relation_counts[r]: triples using r.
    std::vector<std::uint64_t> entity_counts;
    std::vector<std::uint64_t> relation_counts;
};

FrequencyTable element_frequencies(const KnowledgeGraph& kg);

// Walker-alias sampling table over one probability vector. Construction is
// deterministic; sampling needs two uniform draws.
class AliasTable {
public:
    AliasTable() = default;
    explicit AliasTable(const std::vector<double>& probs);

    std::uint32_t sample(Rng& rng) const;
    double probability(std::uint32_t i) const { return probs_[i]; }
    std::uint32_t size() const { return static_cast<std::uint32_t>(probs_.size()); }

private:
    std::vector<double> probs_;       // normalized input distribution
    std::vector<double> threshold_;   // alias acceptance thresholds
    std::vector<std::uint32_t> alias_;
};

// Per-type negative-sampling distributions, probability proportional to
// count^(3/4). Elements with zero count get zero probability.
struct NoiseDistribution {
    AliasTable entity;
    AliasTable relation;
};

NoiseDistribution noise_distribution(const FrequencyTable& freqs);

}  // namespace rsnkg
