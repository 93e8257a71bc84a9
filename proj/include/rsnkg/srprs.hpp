#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsnkg/kg.hpp"

namespace rsnkg {

enum class SampleMode : std::uint8_t { Normal = 0, Dense = 1 };

const char* sample_mode_name(SampleMode mode);
SampleMode sample_mode_from_name(const std::string& name);

struct SamplingSpec {
    std::uint32_t target_entities = 0;
    std::uint32_t groups = 10;
    double epsilon = 0.05;          // K-S acceptance threshold
    std::uint32_t max_rounds = 20;  // quota adjustment budget
    std::uint64_t seed = 1;
    SampleMode mode = SampleMode::Normal;
    double dense_factor = 2.0;  // dense mode: target average-degree multiple
    double damping = 0.85;
    std::uint32_t pagerank_iterations = 50;

    void validate() const;
};

// Contiguous degree band [lo, hi] with its member entities and the number
// of samples currently allotted to it.
struct DegreeSegment {
    std::uint32_t lo = 0;
    std::uint32_t hi = 0;
    std::vector<EntityId> members;
    std::uint32_t quota = 0;
};

struct KsStatistic {
    double d = 0.0;  // sup-norm distance between the degree ECDFs
};

// Partitions entities into at most group_count contiguous degree bands of
// approximately equal entity mass. Entities sharing a degree value never
// straddle a boundary, so heavy ties can glue bands together.
std::vector<DegreeSegment> segment_by_degree(const KnowledgeGraph& kg, std::uint32_t group_count);

// Distributes `target` samples over the segments proportionally to their
// entity mass (largest remainder), capped at each segment's size.
void assign_quotas(std::vector<DegreeSegment>& segments, std::uint32_t target);

// Damped PageRank over the directed triple multigraph; dangling mass is
// spread uniformly. The result sums to 1.
std::vector<double> pagerank(const KnowledgeGraph& kg, double damping = 0.85,
                             std::uint32_t iterations = 50);

// Weighted sampling without replacement inside one segment, weights
// proportional to the entities' PageRank scores. If the remaining weight
// mass vanishes before the quota is met, the rest is drawn uniformly and
// `warning` (if non-null) is set.
std::vector<EntityId> random_pagerank_sample(const std::vector<double>& scores,
                                             const DegreeSegment& segment, std::uint32_t quota,
                                             Rng& rng, std::string* warning = nullptr);

// Two-sample Kolmogorov-Smirnov statistic over degree multisets.
KsStatistic ks_test(const std::vector<std::uint32_t>& sample_degrees,
                    const std::vector<std::uint32_t>& source_degrees);

// All triples whose endpoints both lie in `keep`, rebuilt as a standalone
// graph with the original labels.
KnowledgeGraph induced_subgraph(const KnowledgeGraph& kg, const std::vector<EntityId>& keep);

// Removes uniformly-chosen minimum-degree entities until the average
// degree reaches factor times the original. Removing an entity of degree
// d raises the average exactly when d < avg/2, so once the minimum degree
// crosses that line the factor is unreachable and this throws.
KnowledgeGraph densify(const KnowledgeGraph& kg, double factor = 2.0, std::uint64_t seed = 1);

struct SampleAttempt {
    std::uint32_t attempt = 0;
    double d = 0.0;
    bool accepted = false;
    std::vector<std::uint32_t> quotas;  // per segment, at the time of the attempt
};

struct SampleResult {
    KnowledgeGraph graph;  // induced subgraph of the best attempt
    KsStatistic statistic;
    bool accepted = false;
    std::vector<EntityId> selected;  // ids in the (possibly densified) source
    std::vector<SampleAttempt> attempts;
};

// Segment / sample / test loop with proportional quota adjustment. Dense
// mode densifies first and samples from the result. If no attempt reaches
// epsilon within max_rounds the best one is returned with accepted=false.
SampleResult sample_dataset(const KnowledgeGraph& kg, const SamplingSpec& spec);

// JSON-lines report: one line per attempt plus a final summary line with
// degree histograms of the source and the accepted sample.
std::string sampling_report(const SampleResult& result, const KnowledgeGraph& source,
                            const SamplingSpec& spec);

}  // namespace rsnkg
