#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rsnkg/types.hpp"

namespace rsnkg {

inline constexpr const char* kToolVersion = "0.1.0";

// Flat "key = value" text file: one pair per line, '#' starts a comment,
// blank lines are skipped. Keys are dotted lowercase identifiers; values
// keep their raw text until a typed getter parses them. Duplicate keys are
// rejected so a typo cannot silently lose an override.
class ConfigFile {
public:
    ConfigFile() = default;

    static ConfigFile parse(std::istream& in, const std::string& source_name = "<stream>");
    static ConfigFile load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::string& raw(const std::string& key) const;
    const std::map<std::string, std::string>& values() const { return values_; }
    const std::string& source() const { return source_; }

    // Typed views of a value; all throw DataError naming key and source.
    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    bool get_bool(const std::string& key) const;

private:
    std::map<std::string, std::string> values_;
    std::string source_ = "<empty>";
};

// Scalar <-> string conversions shared by the config file, the CLI
// resolution layer, and the manifest. Parsers demand full consumption of
// the token, so "3x" or "" never half-parses.
std::string format_bool(bool v);
std::string format_double(double v);
bool parse_bool(const std::string& text, const std::string& what);
double parse_double(const std::string& text, const std::string& what);
std::int64_t parse_int(const std::string& text, const std::string& what);
std::uint64_t parse_uint(const std::string& text, const std::string& what);

std::string to_hex(std::uint64_t value);  // 16 lowercase hex digits

// Fingerprint of a resolved configuration: FNV-1a over the sorted
// "key=value\n" serialization. Stable across key insertion order.
std::uint64_t config_hash(const std::map<std::string, std::string>& resolved);

// Wall-clock helpers. `iso_utc_now` renders 2026-08-19T12:00:00Z;
// `compact_utc_now` renders 20260819T120000Z for run-directory names.
std::string iso_utc_now();
std::string compact_utc_now();

// One manifest per CLI run: what ran, with which resolved settings, over
// which inputs, producing which artifacts. Identical command + config +
// inputs reproduce identical artifacts in single-threaded mode; the
// timestamps record when, not what.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::map<std::string, std::string> config;            // resolved semantic key/values
    std::map<std::string, std::string> inputs;            // path -> content checksum (hex)
    std::map<std::string, std::uint64_t> seeds;           // rng seeds in effect
    std::map<std::string, std::string> outputs;           // artifact name -> path
    std::map<std::string, std::string> output_checksums;  // artifact name -> checksum (hex)
    std::string started_utc;
    std::string finished_utc;
    std::string version = kToolVersion;

    std::string to_json() const;  // pretty-printed, trailing newline
    void write(const std::string& path) const;
};

}  // namespace rsnkg
