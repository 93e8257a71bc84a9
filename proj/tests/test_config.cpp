#include <doctest.h>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rsnkg/config.hpp"

using namespace rsnkg;

namespace {

ConfigFile config_from(const std::string& text) {
    std::istringstream in(text);
    return ConfigFile::parse(in, "test.cfg");
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("parse reads key = value lines with comments and blanks") {
    auto cfg = config_from(
        "# a comment\n"
        "\n"
        "walk.alpha = 0.9\n"
        "  train.batch_size=512  \n"
        "name = toy graph\n"
        "empty =\n");
    CHECK(cfg.values().size() == 4);
    CHECK(cfg.raw("walk.alpha") == "0.9");
    CHECK(cfg.raw("train.batch_size") == "512");
    CHECK(cfg.raw("name") == "toy graph");
    CHECK(cfg.raw("empty") == "");
    CHECK(cfg.has("walk.alpha"));
    CHECK_FALSE(cfg.has("walk.beta"));
}

TEST_CASE("parse strips carriage returns") {
    auto cfg = config_from("a = 1\r\nb = 2\r\n");
    CHECK(cfg.raw("a") == "1");
    CHECK(cfg.raw("b") == "2");
}

TEST_CASE("parse rejects malformed lines with their line number") {
    CHECK_THROWS_WITH_AS(config_from("a = 1\nnonsense line\n"),
                         doctest::Contains("test.cfg:2"), DataError);
    CHECK_THROWS_WITH_AS(config_from("= 3\n"), doctest::Contains("empty key"), DataError);
    CHECK_THROWS_WITH_AS(config_from("a = 1\na = 2\n"), doctest::Contains("duplicate key"),
                         DataError);
}

TEST_CASE("typed getters parse and reject with key and source context") {
    auto cfg = config_from(
        "d = 0.003\n"
        "i = -7\n"
        "u = 18\n"
        "b = true\n"
        "junk = 3x\n");
    CHECK(cfg.get_double("d") == 0.003);
    CHECK(cfg.get_int("i") == -7);
    CHECK(cfg.get_uint("u") == 18);
    CHECK(cfg.get_bool("b") == true);
    CHECK_THROWS_WITH_AS(cfg.get_double("junk"), doctest::Contains("key junk"), DataError);
    CHECK_THROWS_WITH_AS(cfg.get_uint("i"), doctest::Contains("non-negative"), DataError);
    CHECK_THROWS_WITH_AS(cfg.raw("missing"), doctest::Contains("missing config key"), DataError);
    CHECK_THROWS_WITH_AS(cfg.get_bool("d"), doctest::Contains("boolean"), DataError);
}

TEST_CASE("parse_bool accepts the documented spellings only") {
    for (const char* t : {"true", "1", "yes", "on"}) CHECK(parse_bool(t, "x"));
    for (const char* t : {"false", "0", "no", "off"}) CHECK_FALSE(parse_bool(t, "x"));
    CHECK_THROWS_AS(parse_bool("TRUE", "x"), DataError);
    CHECK_THROWS_AS(parse_bool("", "x"), DataError);
}

TEST_CASE("scalar parsers demand full token consumption") {
    CHECK(parse_double("2.5e-3", "x") == 2.5e-3);
    CHECK_THROWS_AS(parse_double("2.5e-3q", "x"), DataError);
    CHECK_THROWS_AS(parse_double("", "x"), DataError);
    CHECK(parse_int("-12", "x") == -12);
    CHECK_THROWS_AS(parse_int("12.5", "x"), DataError);
    CHECK(parse_uint("12", "x") == 12);
    CHECK_THROWS_AS(parse_uint("-12", "x"), DataError);
}

TEST_CASE("format_double round-trips exactly through parse_double") {
    for (double v : {0.003, 0.9, 1e-5, 1.0 / 3.0, 5.0, 1e300, -0.25, 0.0,
                     0.051873775176396202608}) {
        const std::string text = format_double(v);
        CHECK(parse_double(text, "x") == v);
    }
    // Friendly spellings for the common cases, not 17-digit noise.
    CHECK(format_double(0.9) == "0.9");
    CHECK(format_double(512.0) == "512");
}

TEST_CASE("to_hex renders 16 lowercase digits") {
    CHECK(to_hex(0) == "0000000000000000");
    CHECK(to_hex(0xdeadbeefULL) == "00000000deadbeef");
    CHECK(to_hex(~std::uint64_t{0}) == "ffffffffffffffff");
}

TEST_CASE("config_hash matches the frozen fnv1a of the canonical text") {
    // fnv1a("a=1\n") and fnv1a("walk.alpha=0.9\nwalk.beta=0.5\n"),
    // computed independently.
    CHECK(config_hash({{"a", "1"}}) == 0xed9ed282c45f76f4ULL);
    CHECK(config_hash({{"walk.beta", "0.5"}, {"walk.alpha", "0.9"}}) == 0xd1d36d795eb0cbafULL);
    CHECK(config_hash({{"a", "1"}}) != config_hash({{"a", "2"}}));
}

TEST_CASE("timestamps have the documented shapes") {
    const std::string iso = iso_utc_now();
    REQUIRE(iso.size() == 20);
    CHECK(iso[4] == '-');
    CHECK(iso[7] == '-');
    CHECK(iso[10] == 'T');
    CHECK(iso[13] == ':');
    CHECK(iso[16] == ':');
    CHECK(iso[19] == 'Z');

    const std::string compact = compact_utc_now();
    REQUIRE(compact.size() == 16);
    CHECK(compact[8] == 'T');
    CHECK(compact[15] == 'Z');
    for (std::size_t i : {0u, 1u, 2u, 3u, 4u, 5u, 6u, 7u})
        CHECK(std::isdigit(static_cast<unsigned char>(compact[i])));
}

TEST_CASE("manifest serializes every field and parses back as JSON") {
    RunManifest m;
    m.command = "train";
    m.argv = {"rsnkg", "train", "--graph", "g.tsv"};
    m.config = {{"train.learning_rate", "0.003"}, {"train.epochs", "30"}};
    m.inputs = {{"g.tsv", to_hex(0x1234)}};
    m.seeds = {{"train.seed", 1}};
    m.outputs = {{"checkpoint", "model.ckpt"}};
    m.output_checksums = {{"checkpoint", to_hex(0x9999)}};
    m.started_utc = "2026-08-19T00:00:00Z";
    m.finished_utc = "2026-08-19T00:01:00Z";

    const auto j = nlohmann::json::parse(m.to_json());
    CHECK(j.at("tool") == "rsnkg");
    CHECK(j.at("version") == kToolVersion);
    CHECK(j.at("command") == "train");
    CHECK(j.at("argv").size() == 4);
    CHECK(j.at("config").at("train.learning_rate") == "0.003");
    CHECK(j.at("config_hash") == to_hex(config_hash(m.config)));
    CHECK(j.at("inputs").at("g.tsv") == "0000000000001234");
    CHECK(j.at("seeds").at("train.seed") == 1);
    CHECK(j.at("outputs").at("checkpoint") == "model.ckpt");
    CHECK(j.at("output_checksums").at("checkpoint") == "0000000000009999");
    CHECK(j.at("started_utc") == "2026-08-19T00:00:00Z");
    CHECK(j.at("finished_utc") == "2026-08-19T00:01:00Z");
}

TEST_CASE("manifest write lands on disk and load_config round-trips a dump") {
    const std::string path = "test_manifest_tmp.json";
    RunManifest m;
    m.command = "prepare";
    m.started_utc = m.finished_utc = "2026-08-19T00:00:00Z";
    m.write(path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(nlohmann::json::parse(buf.str()).at("command") == "prepare");
    in.close();
    std::remove(path.c_str());
}

}  // TEST_SUITE
