#include "rsnkg/walker.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>

#include "rsnkg/graph_io.hpp"

namespace rsnkg {

namespace {

std::uint64_t pair_key(EntityId a, EntityId b) {
    if (a > b) std::swap(a, b);
    return (std::uint64_t(a) << 32) | b;
}

}  // namespace

void WalkConfig::validate(std::string* warning) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must lie in (0, 1)");
    if (!(beta > 0.0 && beta < 1.0)) throw DataError("beta must lie in (0, 1)");
    if (rounds < 1) throw DataError("rounds must be >= 1");
    if (max_length < 3) throw DataError("max path length must be >= 3 elements");
    if (threads < 1) throw DataError("threads must be >= 1");
    if (max_length % 2 == 0) {
        --max_length;
        if (warning)
            *warning = "even path length is not representable; using " + std::to_string(max_length);
    }
}

WalkIndex::WalkIndex(const KnowledgeGraph& kg) : kg_(&kg) {
    groups_.resize(kg.entity_count());
    undirected_pairs_.reserve(kg.triples.size());
    for (EntityId e = 0; e < kg.entity_count(); ++e) {
        std::unordered_map<EntityId, std::size_t> slot;
        for (const auto& [rel, nbr] : kg.adjacency[e]) {
            auto [it, fresh] = slot.emplace(nbr, groups_[e].size());
            if (fresh) groups_[e].push_back({nbr, {}});
            groups_[e][it->second].relations.push_back(rel);
            undirected_pairs_.insert(pair_key(e, nbr));
        }
    }
}

bool WalkIndex::connected(EntityId a, EntityId b) const {
    return undirected_pairs_.count(pair_key(a, b)) != 0;
}

double depth_bias(const WalkIndex& index, EntityId prev, EntityId cand, double alpha) {
    // Both prev and cand neighbor the current entity, so the merged
    // undirected distance is 0 (identical), 1 (direct edge) or 2.
    if (prev == cand) return 1.0 - alpha;
    if (index.connected(prev, cand)) return 1.0 - alpha;
    return alpha;
}

double cross_kg_bias(const KnowledgeGraph& kg, EntityId prev, EntityId cand, const WalkConfig& cfg) {
    if (cfg.mode == WalkMode::SingleKg) return 1.0;
    return kg.origin[prev] != kg.origin[cand] ? cfg.beta : 1.0 - cfg.beta;
}

TransitionContext transition_context(const WalkIndex& index, EntityId prev, EntityId current,
                                     const WalkConfig& cfg) {
    const auto& groups = index.neighbors(current);
    if (groups.empty()) throw DataError("entity has no neighbors; walk hit a dead end");
    TransitionContext ctx;
    ctx.previous = prev;
    ctx.current = current;
    ctx.candidates.reserve(groups.size());
    for (const auto& g : groups) {
        double bias = depth_bias(index, prev, g.entity, cfg.alpha) *
                      cross_kg_bias(index.graph(), prev, g.entity, cfg);
        ctx.candidates.push_back({g.entity, bias});
    }
    return ctx;
}

std::vector<double> transition_distribution(const TransitionContext& ctx) {
    if (ctx.candidates.empty()) throw DataError("empty candidate list");
    double z = 0.0;
    for (const auto& c : ctx.candidates) z += c.bias;
    std::vector<double> probs(ctx.candidates.size());
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = ctx.candidates[i].bias / z;
    return probs;
}

RelationId pick_relation(const WalkIndex& index, EntityId current, EntityId next, Rng& rng) {
    for (const auto& g : index.neighbors(current)) {
        if (g.entity == next) {
            if (g.relations.size() == 1) return g.relations[0];
            return g.relations[rng.next_index(g.relations.size())];
        }
    }
    throw InternalError("no relation connects the sampled entities");
}

namespace {

// Extends p (already s,r,o) in place until cfg.max_length elements or a
// dead end.
void extend_path(const WalkIndex& index, const WalkConfig& cfg, Path& p, Rng& rng) {
    while (p.size() < cfg.max_length) {
        EntityId prev = p[p.size() - 3];
        EntityId current = p.back();
        const auto& groups = index.neighbors(current);
        if (groups.empty()) return;  // dead end; keep the partial path

        double z = 0.0;
        for (const auto& g : groups)
            z += depth_bias(index, prev, g.entity, cfg.alpha) *
                 cross_kg_bias(index.graph(), prev, g.entity, cfg);
        double u = rng.next_double() * z;
        const WalkIndex::NeighborGroup* chosen = &groups.back();
        for (const auto& g : groups) {
            u -= depth_bias(index, prev, g.entity, cfg.alpha) *
                 cross_kg_bias(index.graph(), prev, g.entity, cfg);
            if (u < 0.0) {
                chosen = &g;
                break;
            }
        }
        RelationId rel = chosen->relations.size() == 1
                             ? chosen->relations[0]
                             : chosen->relations[rng.next_index(chosen->relations.size())];
        p.push_back(rel);
        p.push_back(chosen->entity);
    }
}

}  // namespace

PathCorpus sample_paths(const KnowledgeGraph& kg, WalkConfig cfg) {
    cfg.validate();
    if (kg.triples.empty()) throw DataError("cannot sample paths from an empty graph");
    if (!kg.reversed) throw DataError("sample_paths requires a reverse-augmented graph");

    const WalkIndex index(kg);
    const std::uint64_t triple_count = cfg.start_on_originals ? kg.original_triple_count : kg.triple_count();

    PathCorpus corpus;
    corpus.config = cfg;
    corpus.graph_checksum = graph_checksum(kg);
    corpus.paths.reserve(cfg.rounds * triple_count);

    const int workers = cfg.threads;
    std::vector<std::vector<Path>> shards(workers);
    auto run_shard = [&](int w) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(w)));
        std::uint64_t lo = triple_count * w / workers;
        std::uint64_t hi = triple_count * (w + 1) / workers;
        auto& out = shards[w];
        out.reserve(cfg.rounds * (hi - lo));
        for (std::uint32_t round = 0; round < cfg.rounds; ++round) {
            for (std::uint64_t i = lo; i < hi; ++i) {
                const Triple& t = kg.triples[i];
                Path p = {t.subject, t.relation, t.object};
                extend_path(index, cfg, p, rng);
                out.push_back(std::move(p));
            }
        }
    };

    if (workers == 1) {
        run_shard(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(run_shard, w);
        for (auto& th : pool) th.join();
    }
    for (auto& shard : shards)
        for (auto& p : shard) corpus.paths.push_back(std::move(p));
    return corpus;
}

std::string serialize_corpus(const PathCorpus& corpus) {
    std::ostringstream out;
    out << "rsnkg corpus v1"
        << " alpha=" << corpus.config.alpha << " beta=" << corpus.config.beta
        << " rounds=" << corpus.config.rounds << " max_length=" << corpus.config.max_length
        << " mode=" << (corpus.config.mode == WalkMode::CrossKg ? "cross" : "single")
        << " seed=" << corpus.config.seed << " graph=" << corpus.graph_checksum << "\n";
    for (const Path& p : corpus.paths) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (i) out << ' ';
            out << (i % 2 == 0 ? 'e' : 'r') << p[i];
        }
        out << "\n";
    }
    return out.str();
}

void save_corpus(const std::string& path, const PathCorpus& corpus) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << serialize_corpus(corpus);
    if (!out) throw DataError("write failed: " + path);
}

namespace {

double parse_double(std::string_view s, const char* what) {
    try {
        return std::stod(std::string(s));
    } catch (const std::exception&) {
        throw DataError(std::string("corpus header: bad ") + what);
    }
}

}  // namespace

PathCorpus parse_corpus(std::istream& in, const std::string& source_name) {
    PathCorpus corpus;
    std::string line;
    if (!std::getline(in, line)) throw DataError(source_name + ": empty corpus file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream header(line);
    std::string word;
    header >> word;
    std::string version;
    header >> version >> version;  // "corpus" then "v1"
    if (word != "rsnkg" || version != "v1")
        throw DataError(source_name + ": unrecognized corpus header");
    std::string kv;
    while (header >> kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw DataError(source_name + ": malformed corpus header entry: " + kv);
        std::string key = kv.substr(0, eq);
        std::string value = kv.substr(eq + 1);
        if (key == "alpha") corpus.config.alpha = parse_double(value, "alpha");
        else if (key == "beta") corpus.config.beta = parse_double(value, "beta");
        else if (key == "rounds") corpus.config.rounds = static_cast<std::uint32_t>(std::stoul(value));
        else if (key == "max_length") corpus.config.max_length = static_cast<std::uint32_t>(std::stoul(value));
        else if (key == "mode") corpus.config.mode = value == "cross" ? WalkMode::CrossKg : WalkMode::SingleKg;
        else if (key == "seed") corpus.config.seed = std::stoull(value);
        else if (key == "graph") corpus.graph_checksum = std::stoull(value);
        else throw DataError(source_name + ": unknown corpus header key: " + key);
    }

    std::uint64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Path p;
        std::size_t pos = 0;
        while (pos < line.size()) {
            std::size_t end = line.find(' ', pos);
            if (end == std::string::npos) end = line.size();
            std::string_view tok(line.data() + pos, end - pos);
            char expected = p.size() % 2 == 0 ? 'e' : 'r';
            if (tok.size() < 2 || tok[0] != expected)
                throw DataError(source_name + ":" + std::to_string(line_no) + ": bad path token: " + std::string(tok));
            std::uint32_t id = 0;
            auto [ptr, ec] = std::from_chars(tok.data() + 1, tok.data() + tok.size(), id);
            if (ec != std::errc() || ptr != tok.data() + tok.size())
                throw DataError(source_name + ":" + std::to_string(line_no) + ": bad path token: " + std::string(tok));
            p.push_back(id);
            pos = end + 1;
        }
        if (p.size() < 3 || p.size() % 2 == 0)
            throw DataError(source_name + ":" + std::to_string(line_no) + ": path must have odd element count >= 3");
        corpus.paths.push_back(std::move(p));
    }
    return corpus;
}

PathCorpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    return parse_corpus(in, path);
}

}  // namespace rsnkg
