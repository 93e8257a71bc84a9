#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace rsnkg {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

// Which source graph an entity came from. Single is used when only one
// graph is loaded (completion-style setups).
enum class KgTag : std::uint8_t { Single = 0, Kg1 = 1, Kg2 = 2 };

struct Triple {
    EntityId subject;
    RelationId relation;
    EntityId object;

    friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept {
        std::uint64_t k = (std::uint64_t(t.subject) << 32) ^ (std::uint64_t(t.relation) << 21) ^ t.object;
        k ^= k >> 33;
        k *= 0xff51afd7ed558ccdULL;
        k ^= k >> 33;
        return static_cast<std::size_t>(k);
    }
};

// Input or file-content problem (bad flag value, malformed line, stale
// checksum). CLI maps these to exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Broken internal contract; always a bug, never a user error.
class InternalError : public std::logic_error {
public:
    explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace rsnkg
