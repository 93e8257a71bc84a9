#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "rsnkg/kg.hpp"

namespace rsnkg {

// FNV-1a over a byte string; used to fingerprint artifacts so downstream
// stages can detect stale inputs.
std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t checksum_file(const std::string& path);

// Parses UTF-8 lines of "subject<TAB>relation<TAB>object". Empty lines are
// skipped; any other field count is a parse error reporting the line
// number. Duplicate triples collapse to one.
KnowledgeGraph load_triples(std::istream& in, KgTag tag, const std::string& source_name = "<stream>");
KnowledgeGraph load_triples_file(const std::string& path, KgTag tag);

// Lines of "entity1<TAB>entity2", labels resolved against the two source
// graphs. Pairs must be one-to-one.
SeedAlignment load_seed_pairs(std::istream& in, const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
                              const std::string& source_name = "<stream>");
SeedAlignment load_seed_pairs_file(const std::string& path, const KnowledgeGraph& kg1,
                                   const KnowledgeGraph& kg2);

// Versioned text serialization; see docs/formats.md for the byte-exact
// layout. Round-trips bit-identically.
std::string serialize_graph(const KnowledgeGraph& kg);
void save_graph(const std::string& path, const KnowledgeGraph& kg);
KnowledgeGraph parse_graph(std::istream& in, const std::string& source_name = "<stream>");
KnowledgeGraph load_graph(const std::string& path);

// Fingerprint of the canonical serialization.
std::uint64_t graph_checksum(const KnowledgeGraph& kg);

}  // namespace rsnkg
