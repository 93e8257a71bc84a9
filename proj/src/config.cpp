#include "rsnkg/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rsnkg/graph_io.hpp"

namespace rsnkg {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string utc_now(const char* fmt) {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), fmt, &tm);
    return buf;
}

}  // namespace

ConfigFile ConfigFile::parse(std::istream& in, const std::string& source_name) {
    ConfigFile cfg;
    cfg.source_ = source_name;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos)
            throw DataError(source_name + ":" + std::to_string(line_no) +
                            ": expected 'key = value', got: " + text);
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty())
            throw DataError(source_name + ":" + std::to_string(line_no) + ": empty key");
        if (!cfg.values_.emplace(key, value).second)
            throw DataError(source_name + ":" + std::to_string(line_no) + ": duplicate key: " + key);
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open config file: " + path);
    return parse(in, path);
}

const std::string& ConfigFile::raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw DataError(source_ + ": missing config key: " + key);
    return it->second;
}

double ConfigFile::get_double(const std::string& key) const {
    return parse_double(raw(key), source_ + ": key " + key);
}

std::int64_t ConfigFile::get_int(const std::string& key) const {
    return parse_int(raw(key), source_ + ": key " + key);
}

std::uint64_t ConfigFile::get_uint(const std::string& key) const {
    return parse_uint(raw(key), source_ + ": key " + key);
}

bool ConfigFile::get_bool(const std::string& key) const {
    return parse_bool(raw(key), source_ + ": key " + key);
}

std::string format_bool(bool v) { return v ? "true" : "false"; }

std::string format_double(double v) {
    // Shortest representation that parses back to the same double, so a
    // dumped config reproduces the run bit-for-bit.
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double back = 0;
    std::sscanf(buf, "%lf", &back);
    for (int prec = 1; prec < 17; ++prec) {
        char probe[48];
        std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
        std::sscanf(probe, "%lf", &back);
        if (back == v) return probe;
    }
    return buf;
}

bool parse_bool(const std::string& text, const std::string& what) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw DataError(what + ": expected a boolean, got: " + text);
}

double parse_double(const std::string& text, const std::string& what) {
    if (!text.empty()) {
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(text.c_str(), &end);
        if (errno == 0 && end == text.c_str() + text.size()) return v;
    }
    throw DataError(what + ": expected a number, got: " + text);
}

std::int64_t parse_int(const std::string& text, const std::string& what) {
    if (!text.empty()) {
        errno = 0;
        char* end = nullptr;
        const long long v = std::strtoll(text.c_str(), &end, 10);
        if (errno == 0 && end == text.c_str() + text.size()) return v;
    }
    throw DataError(what + ": expected an integer, got: " + text);
}

std::uint64_t parse_uint(const std::string& text, const std::string& what) {
    if (!text.empty() && text[0] != '-') {
        errno = 0;
        char* end = nullptr;
        const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
        if (errno == 0 && end == text.c_str() + text.size()) return v;
    }
    throw DataError(what + ": expected a non-negative integer, got: " + text);
}

std::string to_hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::uint64_t config_hash(const std::map<std::string, std::string>& resolved) {
    std::string canon;
    for (const auto& [key, value] : resolved) {
        canon += key;
        canon += '=';
        canon += value;
        canon += '\n';
    }
    return fnv1a(canon);
}

std::string iso_utc_now() { return utc_now("%Y-%m-%dT%H:%M:%SZ"); }

std::string compact_utc_now() { return utc_now("%Y%m%dT%H%M%SZ"); }

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = "rsnkg";
    j["version"] = version;
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config;
    j["config_hash"] = to_hex(config_hash(config));
    j["inputs"] = inputs;
    j["seeds"] = seeds;
    j["outputs"] = outputs;
    j["output_checksums"] = output_checksums;
    j["started_utc"] = started_utc;
    j["finished_utc"] = finished_utc;
    return j.dump(2) + "\n";
}

void RunManifest::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << to_json();
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace rsnkg
