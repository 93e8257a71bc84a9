#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rsnkg/kg.hpp"
#include "rsnkg/rng.hpp"

namespace rsnkg {

enum class WalkMode : std::uint8_t { SingleKg = 0, CrossKg = 1 };

struct WalkConfig {
    double alpha = 0.9;             // depth bias, in (0,1)
    double beta = 0.9;              // cross-graph bias, in (0,1); inert in single mode
    std::uint32_t rounds = 1;       // sampling rounds per triple
    std::uint32_t max_length = 15;  // element count per path; odd counts only
    WalkMode mode = WalkMode::CrossKg;
    std::uint64_t seed = 1;
    int threads = 1;
    bool start_on_originals = false;  // seed walks from pre-reverse triples only

    // Throws DataError on out-of-range values. An even max_length is
    // lowered to the next odd count; `warning` (if non-null) receives a
    // message when that happens.
    void validate(std::string* warning = nullptr);
};

// A path is a flat id sequence: entity ids at even indices, relation ids at
// odd indices. Always starts and ends with an entity.
using Path = std::vector<std::uint32_t>;

struct PathCorpus {
    WalkConfig config;
    std::uint64_t graph_checksum = 0;
    std::vector<Path> paths;
};

// Read-only walking index over a reverse-augmented graph: distinct
// neighbors per entity plus an undirected adjacency set for the
// second-order distance test.
class WalkIndex {
public:
    explicit WalkIndex(const KnowledgeGraph& kg);

    struct NeighborGroup {
        EntityId entity;
        std::vector<RelationId> relations;  // all relations current -> entity
    };

    const std::vector<NeighborGroup>& neighbors(EntityId e) const { return groups_[e]; }
    bool connected(EntityId a, EntityId b) const;  // ignoring direction and relation labels
    const KnowledgeGraph& graph() const { return *kg_; }

private:
    const KnowledgeGraph* kg_;
    std::vector<std::vector<NeighborGroup>> groups_;
    std::unordered_set<std::uint64_t> undirected_pairs_;
};

// Bias toward continuing two hops away from where the walk just was:
// alpha when the candidate is at merged-undirected distance 2 from prev,
// 1 - alpha when closer (distance 0 is backtracking, 1 a direct edge).
double depth_bias(const WalkIndex& index, EntityId prev, EntityId cand, double alpha);

// beta when prev and cand belong to different source graphs, 1 - beta
// otherwise; identically 1 in single-graph mode.
double cross_kg_bias(const KnowledgeGraph& kg, EntityId prev, EntityId cand, const WalkConfig& cfg);

struct TransitionContext {
    EntityId previous;
    EntityId current;
    struct Candidate {
        EntityId entity;
        double bias;  // unnormalized, product of depth and cross-graph factors
    };
    std::vector<Candidate> candidates;
};

// Candidates are the distinct neighbors of `current`. Throws DataError when
// current has no neighbors (dead end).
TransitionContext transition_context(const WalkIndex& index, EntityId prev, EntityId current,
                                     const WalkConfig& cfg);

// Normalized probabilities aligned with ctx.candidates.
std::vector<double> transition_distribution(const TransitionContext& ctx);

// Uniform choice among the relations connecting current to next. Throws
// InternalError when none exists (the sampler never asks in that case).
RelationId pick_relation(const WalkIndex& index, EntityId current, EntityId next, Rng& rng);

// One path per (round, triple), started as s -> r -> o and grown by biased
// transitions until max_length elements (or a dead end). Deterministic for
// a fixed (seed, threads) pair; shards are concatenated by worker index.
PathCorpus sample_paths(const KnowledgeGraph& kg, WalkConfig cfg);

// Corpus file: a header line of key=value pairs, then one path per line
// of space-separated "e<id>"/"r<id>" tokens.
void save_corpus(const std::string& path, const PathCorpus& corpus);
std::string serialize_corpus(const PathCorpus& corpus);
PathCorpus load_corpus(const std::string& path);
PathCorpus parse_corpus(std::istream& in, const std::string& source_name = "<stream>");

}  // namespace rsnkg
