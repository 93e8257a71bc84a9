#include "rsnkg/graph_io.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <vector>

namespace rsnkg {

namespace {

constexpr std::string_view kGraphHeader = "rsnkg graph v1";

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    return in;
}

KgTag tag_from_int(int v) {
    switch (v) {
        case 0: return KgTag::Single;
        case 1: return KgTag::Kg1;
        case 2: return KgTag::Kg2;
        default: throw DataError("invalid origin tag value");
    }
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t checksum_file(const std::string& path) {
    std::ifstream in = open_or_throw(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return fnv1a(buf.str());
}

KnowledgeGraph load_triples(std::istream& in, KgTag tag, const std::string& source_name) {
    std::vector<std::array<std::string, 3>> rows;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 3)
            throw DataError(source_name + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                            std::to_string(fields.size()));
        if (fields[1].size() >= kReverseSuffix.size() &&
            fields[1].substr(fields[1].size() - kReverseSuffix.size()) == kReverseSuffix)
            throw DataError(source_name + ":" + std::to_string(line_no) + ": relation label uses reserved suffix '" +
                            std::string(kReverseSuffix) + "'");
        rows.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2])});
    }
    if (rows.empty()) throw DataError(source_name + ": no triples found");
    return build_graph(rows, tag);
}

KnowledgeGraph load_triples_file(const std::string& path, KgTag tag) {
    std::ifstream in = open_or_throw(path);
    return load_triples(in, tag, path);
}

SeedAlignment load_seed_pairs(std::istream& in, const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
                              const std::string& source_name) {
    SeedAlignment seeds;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 2)
            throw DataError(source_name + ":" + std::to_string(line_no) + ": expected 2 tab-separated fields, got " +
                            std::to_string(fields.size()));
        auto e1 = kg1.entities.find(fields[0]);
        auto e2 = kg2.entities.find(fields[1]);
        if (!e1)
            throw DataError(source_name + ":" + std::to_string(line_no) + ": unknown entity in first graph: " +
                            std::string(fields[0]));
        if (!e2)
            throw DataError(source_name + ":" + std::to_string(line_no) + ": unknown entity in second graph: " +
                            std::string(fields[1]));
        seeds.pairs.emplace_back(*e1, *e2);
    }
    return seeds;
}

SeedAlignment load_seed_pairs_file(const std::string& path, const KnowledgeGraph& kg1,
                                   const KnowledgeGraph& kg2) {
    std::ifstream in = open_or_throw(path);
    return load_seed_pairs(in, kg1, kg2, path);
}

std::string serialize_graph(const KnowledgeGraph& kg) {
    std::ostringstream out;
    out << kGraphHeader << "\n";
    out << "counts\t" << kg.entity_count() << "\t" << kg.relation_count() << "\t" << kg.triple_count() << "\t"
        << kg.original_triple_count << "\t" << kg.original_relation_count << "\t" << (kg.reversed ? 1 : 0) << "\n";
    for (std::uint32_t e = 0; e < kg.entity_count(); ++e)
        out << "entity\t" << static_cast<int>(kg.origin[e]) << "\t" << kg.entities.label(e) << "\n";
    for (std::uint32_t r = 0; r < kg.relation_count(); ++r)
        out << "relation\t" << kg.relations.label(r) << "\n";
    for (const Triple& t : kg.triples)
        out << "triple\t" << t.subject << "\t" << t.relation << "\t" << t.object << "\n";
    return out.str();
}

void save_graph(const std::string& path, const KnowledgeGraph& kg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << serialize_graph(kg);
    if (!out) throw DataError("write failed: " + path);
}

KnowledgeGraph parse_graph(std::istream& in, const std::string& source_name) {
    std::string line;
    auto fail = [&](std::uint64_t line_no, const std::string& why) -> DataError {
        return DataError(source_name + ":" + std::to_string(line_no) + ": " + why);
    };
    std::uint64_t line_no = 1;
    if (!std::getline(in, line)) throw fail(line_no, "empty graph file");
    strip_cr(line);
    if (line != kGraphHeader) throw fail(line_no, "unrecognized graph header: " + line);

    ++line_no;
    if (!std::getline(in, line)) throw fail(line_no, "missing counts line");
    strip_cr(line);
    auto counts = split_tabs(line);
    if (counts.size() != 7 || counts[0] != "counts") throw fail(line_no, "malformed counts line");
    KnowledgeGraph kg;
    std::uint64_t n_entities = std::stoull(std::string(counts[1]));
    std::uint64_t n_relations = std::stoull(std::string(counts[2]));
    std::uint64_t n_triples = std::stoull(std::string(counts[3]));
    kg.original_triple_count = static_cast<std::uint32_t>(std::stoull(std::string(counts[4])));
    kg.original_relation_count = static_cast<std::uint32_t>(std::stoull(std::string(counts[5])));
    kg.reversed = counts[6] == "1";

    kg.origin.reserve(n_entities);
    for (std::uint64_t i = 0; i < n_entities; ++i) {
        ++line_no;
        if (!std::getline(in, line)) throw fail(line_no, "truncated entity section");
        strip_cr(line);
        auto f = split_tabs(line);
        if (f.size() != 3 || f[0] != "entity") throw fail(line_no, "malformed entity line");
        if (kg.entities.get_or_add(f[2]) != i) throw fail(line_no, "duplicate entity label");
        kg.origin.push_back(tag_from_int(std::stoi(std::string(f[1]))));
    }
    for (std::uint64_t i = 0; i < n_relations; ++i) {
        ++line_no;
        if (!std::getline(in, line)) throw fail(line_no, "truncated relation section");
        strip_cr(line);
        auto f = split_tabs(line);
        if (f.size() != 2 || f[0] != "relation") throw fail(line_no, "malformed relation line");
        if (kg.relations.get_or_add(f[1]) != i) throw fail(line_no, "duplicate relation label");
    }
    kg.triples.reserve(n_triples);
    for (std::uint64_t i = 0; i < n_triples; ++i) {
        ++line_no;
        if (!std::getline(in, line)) throw fail(line_no, "truncated triple section");
        strip_cr(line);
        auto f = split_tabs(line);
        if (f.size() != 4 || f[0] != "triple") throw fail(line_no, "malformed triple line");
        Triple t{static_cast<EntityId>(std::stoul(std::string(f[1]))),
                 static_cast<RelationId>(std::stoul(std::string(f[2]))),
                 static_cast<EntityId>(std::stoul(std::string(f[3])))};
        if (t.subject >= n_entities || t.object >= n_entities || t.relation >= n_relations)
            throw fail(line_no, "triple references out-of-range id");
        kg.triples.push_back(t);
    }
    kg.rebuild_index();
    return kg;
}

KnowledgeGraph load_graph(const std::string& path) {
    std::ifstream in = open_or_throw(path);
    return parse_graph(in, path);
}

std::uint64_t graph_checksum(const KnowledgeGraph& kg) {
    return fnv1a(serialize_graph(kg));
}

}  // namespace rsnkg
