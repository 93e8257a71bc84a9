#include "rsnkg/srprs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <json.hpp>

namespace rsnkg {

const char* sample_mode_name(SampleMode mode) {
    switch (mode) {
        case SampleMode::Normal: return "normal";
        case SampleMode::Dense: return "dense";
    }
    throw InternalError("sample_mode_name: unknown mode");
}

SampleMode sample_mode_from_name(const std::string& name) {
    if (name == "normal") return SampleMode::Normal;
    if (name == "dense") return SampleMode::Dense;
    throw DataError("unknown sampling mode '" + name + "' (expected normal or dense)");
}

void SamplingSpec::validate() const {
    if (target_entities < 1) throw DataError("sampling spec: target entity count must be positive");
    if (groups < 1) throw DataError("sampling spec: group count must be positive");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw DataError("sampling spec: epsilon must lie in (0, 1)");
    if (max_rounds < 1) throw DataError("sampling spec: adjustment budget must be positive");
    if (!(dense_factor >= 1.0)) throw DataError("sampling spec: dense factor must be at least 1");
    if (!(damping > 0.0 && damping < 1.0))
        throw DataError("sampling spec: PageRank damping must lie in (0, 1)");
    if (pagerank_iterations < 1)
        throw DataError("sampling spec: PageRank needs at least one iteration");
}

std::vector<DegreeSegment> segment_by_degree(const KnowledgeGraph& kg, std::uint32_t group_count) {
    const std::uint32_t n = kg.entity_count();
    if (group_count < 1) throw DataError("segment_by_degree: group count must be positive");
    if (group_count > n)
        throw DataError("segment_by_degree: more groups than entities (" +
                        std::to_string(group_count) + " > " + std::to_string(n) + ")");

    // Entities of one degree value stay together: band boundaries are the
    // degree quantiles at j/groups, deduplicated, so heavy ties glue
    // adjacent bands instead of splitting a value.
    std::map<std::uint32_t, std::vector<EntityId>> by_degree;
    for (EntityId e = 0; e < n; ++e) by_degree[kg.degree[e]].push_back(e);

    std::vector<std::pair<std::uint32_t, std::uint64_t>> cumulative;  // (value, count <= value)
    std::uint64_t acc = 0;
    for (const auto& [value, members] : by_degree) {
        acc += members.size();
        cumulative.emplace_back(value, acc);
    }

    std::vector<std::uint32_t> cuts;
    for (std::uint32_t j = 1; j < group_count; ++j) {
        for (const auto& [value, count] : cumulative) {
            if (count * group_count >= std::uint64_t(j) * n) {
                if (cuts.empty() || cuts.back() != value) cuts.push_back(value);
                break;
            }
        }
    }

    std::vector<DegreeSegment> segments;
    DegreeSegment current;
    bool open = false;
    std::size_t next_cut = 0;
    for (auto& [value, members] : by_degree) {
        if (!open) {
            current = DegreeSegment{};
            current.lo = value;
            open = true;
        }
        current.hi = value;
        current.members.insert(current.members.end(), members.begin(), members.end());
        if (next_cut < cuts.size() && value == cuts[next_cut]) {
            segments.push_back(std::move(current));
            open = false;
            ++next_cut;
        }
    }
    if (open) segments.push_back(std::move(current));
    return segments;
}

void assign_quotas(std::vector<DegreeSegment>& segments, std::uint32_t target) {
    std::uint64_t n = 0;
    for (const auto& s : segments) n += s.members.size();
    if (n == 0) throw DataError("assign_quotas: no entities to sample from");
    if (target > n)
        throw DataError("assign_quotas: target " + std::to_string(target) +
                        " exceeds the entity count " + std::to_string(n));

    // Largest-remainder apportionment, capped at each segment's size.
    std::vector<double> raw(segments.size());
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        raw[i] = double(target) * double(segments[i].members.size()) / double(n);
        segments[i].quota = std::uint32_t(raw[i]);
        assigned += segments[i].quota;
    }
    std::vector<std::size_t> order(segments.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        double ra = raw[a] - std::floor(raw[a]), rb = raw[b] - std::floor(raw[b]);
        if (ra != rb) return ra > rb;
        return a < b;
    });
    std::size_t cursor = 0;
    while (assigned < target) {
        auto& seg = segments[order[cursor % order.size()]];
        if (seg.quota < seg.members.size()) {
            ++seg.quota;
            ++assigned;
        }
        ++cursor;
        if (cursor > order.size() * (std::size_t(target) + 1))
            throw InternalError("assign_quotas: failed to place the full target");
    }
}

std::vector<double> pagerank(const KnowledgeGraph& kg, double damping, std::uint32_t iterations) {
    const std::uint32_t n = kg.entity_count();
    if (n == 0) throw DataError("pagerank: empty graph");
    if (!(damping > 0.0 && damping < 1.0)) throw DataError("pagerank: damping must lie in (0, 1)");
    if (iterations < 1) throw DataError("pagerank: needs at least one iteration");

    std::vector<double> p(n, 1.0 / double(n)), next(n);
    for (std::uint32_t it = 0; it < iterations; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        double dangling = 0.0;
        for (EntityId u = 0; u < n; ++u) {
            const auto& out = kg.adjacency[u];
            if (out.empty()) {
                dangling += p[u];
                continue;
            }
            const double share = p[u] / double(out.size());
            for (const auto& [r, v] : out) next[v] += share;
        }
        const double base = (1.0 - damping) / double(n) + damping * dangling / double(n);
        for (EntityId v = 0; v < n; ++v) p[v] = base + damping * next[v];
    }
    return p;
}

std::vector<EntityId> random_pagerank_sample(const std::vector<double>& scores,
                                             const DegreeSegment& segment, std::uint32_t quota,
                                             Rng& rng, std::string* warning) {
    if (quota > segment.members.size())
        throw DataError("random_pagerank_sample: quota exceeds the segment size");
    for (EntityId e : segment.members)
        if (e >= scores.size())
            throw InternalError("random_pagerank_sample: entity outside the score vector");

    std::vector<EntityId> remaining = segment.members;
    std::vector<EntityId> picked;
    picked.reserve(quota);
    while (picked.size() < quota) {
        double total = 0.0;
        for (EntityId e : remaining) total += scores[e];
        std::size_t chosen;
        if (total > 0.0) {
            const double u = rng.next_double() * total;
            double acc = 0.0;
            chosen = remaining.size() - 1;
            for (std::size_t i = 0; i < remaining.size(); ++i) {
                acc += scores[remaining[i]];
                if (u < acc) {
                    chosen = i;
                    break;
                }
            }
        } else {
            // No PageRank mass left in the segment; fall back to uniform.
            if (warning && warning->empty())
                *warning = "PageRank mass exhausted inside a segment; remaining quota filled "
                           "uniformly at random";
            chosen = std::size_t(rng.next_index(remaining.size()));
        }
        picked.push_back(remaining[chosen]);
        remaining.erase(remaining.begin() + std::ptrdiff_t(chosen));
    }
    return picked;
}

KsStatistic ks_test(const std::vector<std::uint32_t>& sample_degrees,
                    const std::vector<std::uint32_t>& source_degrees) {
    if (sample_degrees.empty() || source_degrees.empty())
        throw DataError("ks_test: both degree multisets must be non-empty");
    std::vector<std::uint32_t> a = sample_degrees, b = source_degrees;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = double(a.size()), nb = double(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() || j < b.size()) {
        std::uint32_t v;
        if (i >= a.size()) v = b[j];
        else if (j >= b.size()) v = a[i];
        else v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(double(i) / na - double(j) / nb));
    }
    return KsStatistic{d};
}

namespace {

KgTag common_tag(const KnowledgeGraph& kg) {
    for (KgTag t : kg.origin)
        if (t != kg.origin.front()) return KgTag::Single;
    return kg.origin.empty() ? KgTag::Single : kg.origin.front();
}

KnowledgeGraph rebuild_from_triples(const KnowledgeGraph& kg,
                                    const std::vector<bool>& triple_alive) {
    std::vector<std::array<std::string, 3>> rows;
    for (std::size_t i = 0; i < kg.triples.size(); ++i) {
        if (!triple_alive[i]) continue;
        const Triple& t = kg.triples[i];
        rows.push_back({kg.entities.label(t.subject), kg.relations.label(t.relation),
                        kg.entities.label(t.object)});
    }
    if (rows.empty()) throw DataError("sampling produced a graph with no triples");
    return build_graph(rows, common_tag(kg));
}

}  // namespace

KnowledgeGraph induced_subgraph(const KnowledgeGraph& kg, const std::vector<EntityId>& keep) {
    if (kg.reversed)
        throw DataError("induced_subgraph: sampling operates on graphs before reverse "
                        "augmentation");
    std::vector<bool> kept(kg.entity_count(), false);
    for (EntityId e : keep) {
        if (e >= kg.entity_count())
            throw DataError("induced_subgraph: entity id out of range");
        kept[e] = true;
    }
    std::vector<bool> triple_alive(kg.triples.size());
    for (std::size_t i = 0; i < kg.triples.size(); ++i)
        triple_alive[i] = kept[kg.triples[i].subject] && kept[kg.triples[i].object];
    return rebuild_from_triples(kg, triple_alive);
}

KnowledgeGraph densify(const KnowledgeGraph& kg, double factor, std::uint64_t seed) {
    if (!(factor >= 1.0)) throw DataError("densify: factor must be at least 1");
    if (kg.triple_count() == 0) throw DataError("densify: empty graph");
    if (kg.reversed)
        throw DataError("densify: sampling operates on graphs before reverse augmentation");

    const std::uint32_t n0 = kg.entity_count();
    std::uint64_t triples_left = kg.triple_count();
    std::uint32_t entities_left = n0;
    const double target = factor * 2.0 * double(triples_left) / double(entities_left);

    // Incident triple lists; a self-loop appears once, matching the
    // degree bookkeeping of the graph itself.
    std::vector<std::vector<std::uint32_t>> incident(n0);
    for (std::uint32_t i = 0; i < kg.triples.size(); ++i) {
        incident[kg.triples[i].subject].push_back(i);
        if (kg.triples[i].object != kg.triples[i].subject)
            incident[kg.triples[i].object].push_back(i);
    }
    std::vector<std::uint32_t> deg(n0);
    for (EntityId e = 0; e < n0; ++e) deg[e] = std::uint32_t(incident[e].size());
    std::vector<bool> entity_alive(n0, true), triple_alive(kg.triples.size(), true);

    Rng rng(seed);
    auto average = [&]() { return 2.0 * double(triples_left) / double(entities_left); };
    while (average() < target) {
        if (entities_left <= 1)
            throw DataError("densify: low-degree band exhausted before reaching the target "
                            "average degree");
        std::uint32_t min_deg = std::numeric_limits<std::uint32_t>::max();
        for (EntityId e = 0; e < n0; ++e)
            if (entity_alive[e]) min_deg = std::min(min_deg, deg[e]);
        // Removing an entity of degree d changes the average from 2T/n to
        // 2(T-d)/(n-1), a gain exactly when d < T/n; beyond that line no
        // removal can help and the factor is unreachable.
        if (double(min_deg) >= double(triples_left) / double(entities_left))
            throw DataError("densify: cannot reach " + std::to_string(target) +
                            ": every remaining entity has degree at least half the average");
        std::vector<EntityId> band;
        for (EntityId e = 0; e < n0; ++e)
            if (entity_alive[e] && deg[e] == min_deg) band.push_back(e);
        const EntityId victim = band[rng.next_index(band.size())];
        for (std::uint32_t ti : incident[victim]) {
            if (!triple_alive[ti]) continue;
            triple_alive[ti] = false;
            --triples_left;
            const Triple& t = kg.triples[ti];
            --deg[t.subject];
            if (t.object != t.subject) --deg[t.object];
        }
        entity_alive[victim] = false;
        --entities_left;
    }

    if (triples_left == kg.triple_count()) return kg;  // already at the target
    return rebuild_from_triples(kg, triple_alive);
}

SampleResult sample_dataset(const KnowledgeGraph& kg, const SamplingSpec& spec) {
    spec.validate();
    const KnowledgeGraph base =
        spec.mode == SampleMode::Dense ? densify(kg, spec.dense_factor, derive_seed(spec.seed, 0))
                                       : kg;
    const std::uint32_t n = base.entity_count();
    if (spec.target_entities > n)
        throw DataError("sample_dataset: target " + std::to_string(spec.target_entities) +
                        " exceeds the entity count " + std::to_string(n));

    const std::vector<double> scores = pagerank(base, spec.damping, spec.pagerank_iterations);
    const std::vector<std::uint32_t>& source_degrees = base.degree;

    std::uint32_t groups = std::min(spec.groups, n);
    auto segments = segment_by_degree(base, groups);
    assign_quotas(segments, spec.target_entities);

    SampleResult result;
    double best_d = std::numeric_limits<double>::infinity();
    std::vector<EntityId> best_selected;
    for (std::uint32_t attempt = 1; attempt <= spec.max_rounds; ++attempt) {
        Rng rng(derive_seed(spec.seed, attempt));
        std::vector<EntityId> selected;
        std::string warning;
        for (const auto& seg : segments) {
            auto part = random_pagerank_sample(scores, seg, seg.quota, rng, &warning);
            selected.insert(selected.end(), part.begin(), part.end());
        }
        std::vector<std::uint32_t> sample_degrees;
        sample_degrees.reserve(selected.size());
        for (EntityId e : selected) sample_degrees.push_back(source_degrees[e]);
        const double d = ks_test(sample_degrees, source_degrees).d;

        SampleAttempt record;
        record.attempt = attempt;
        record.d = d;
        record.accepted = d <= spec.epsilon;
        for (const auto& seg : segments) record.quotas.push_back(seg.quota);
        result.attempts.push_back(std::move(record));

        if (d < best_d) {
            best_d = d;
            best_selected = selected;
        }
        if (d <= spec.epsilon) {
            result.accepted = true;
            break;
        }

        // Adjustment. While the banding can still be refined, within-band
        // skew dominates, so split into finer bands and re-apportion.
        // Once the bands saturate, shift quotas against the per-band ECDF
        // error instead.
        if (groups < n) {
            groups = std::min<std::uint32_t>(n, groups + (groups + 1) / 2);
            segments = segment_by_degree(base, groups);
            assign_quotas(segments, spec.target_entities);
            continue;
        }
        std::vector<std::uint64_t> in_band(segments.size(), 0);
        for (EntityId e : selected) {
            for (std::size_t b = 0; b < segments.size(); ++b)
                if (source_degrees[e] >= segments[b].lo && source_degrees[e] <= segments[b].hi) {
                    ++in_band[b];
                    break;
                }
        }
        for (std::size_t b = 0; b < segments.size(); ++b) {
            const double g = double(segments[b].members.size()) / double(n);
            const double m = double(in_band[b]) / double(spec.target_entities);
            const auto shift = std::int64_t(std::llround((g - m) * double(spec.target_entities)));
            const std::int64_t room =
                std::int64_t(segments[b].members.size()) - std::int64_t(segments[b].quota);
            const std::int64_t applied =
                std::clamp(shift, -std::int64_t(segments[b].quota), room);
            segments[b].quota = std::uint32_t(std::int64_t(segments[b].quota) + applied);
        }
        std::uint64_t total = 0;
        for (const auto& seg : segments) total += seg.quota;
        std::size_t cursor = 0;
        while (total != spec.target_entities) {
            auto& seg = segments[cursor % segments.size()];
            if (total < spec.target_entities && seg.quota < seg.members.size()) {
                ++seg.quota;
                ++total;
            } else if (total > spec.target_entities && seg.quota > 0) {
                --seg.quota;
                --total;
            }
            ++cursor;
        }
    }

    result.selected = best_selected;
    result.statistic = KsStatistic{best_d};
    result.graph = induced_subgraph(base, best_selected);
    return result;
}

std::string sampling_report(const SampleResult& result, const KnowledgeGraph& source,
                            const SamplingSpec& spec) {
    std::string out;
    for (const auto& a : result.attempts) {
        nlohmann::json line{{"attempt", a.attempt},
                            {"d", a.d},
                            {"accepted", a.accepted},
                            {"quotas", a.quotas}};
        out += line.dump() + "\n";
    }

    auto histogram = [](const std::vector<std::uint32_t>& degrees) {
        std::map<std::uint32_t, std::uint64_t> h;
        for (auto d : degrees) ++h[d];
        nlohmann::json pairs = nlohmann::json::array();
        for (const auto& [deg, count] : h) pairs.push_back({deg, count});
        return pairs;
    };

    nlohmann::json summary{{"summary", true},
                           {"mode", sample_mode_name(spec.mode)},
                           {"epsilon", spec.epsilon},
                           {"accepted", result.accepted},
                           {"d", result.statistic.d},
                           {"attempts", result.attempts.size()},
                           {"entities", result.graph.entity_count()},
                           {"triples", result.graph.triple_count()},
                           {"source_entities", source.entity_count()},
                           {"source_triples", source.triple_count()},
                           {"sample_degree_histogram", histogram(result.graph.degree)},
                           {"source_degree_histogram", histogram(source.degree)}};
    out += summary.dump() + "\n";
    return out;
}

}  // namespace rsnkg
