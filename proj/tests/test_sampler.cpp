#include <doctest.h>

#include "cadenza/sampler/preset.hpp"

using namespace cadenza;
using namespace cadenza::sampler;

TEST_CASE("map_samples") {
    SUBCASE("one sample spans the keyboard and roots at middle C") {
        auto zones = map_samples({"a.wav"}, MapStrategy::EvenSplit);
        REQUIRE(zones.size() == 1);
        CHECK(zones[0].lo_note == 0);
        CHECK(zones[0].hi_note == 127);
        CHECK(zones[0].root_note == 60);
    }
    SUBCASE("four samples split into width-32 zones rooted at the centers") {
        auto zones = map_samples({"a.wav", "b.wav", "c.wav", "d.wav"}, MapStrategy::EvenSplit);
        REQUIRE(zones.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(zones[i].lo_note == int(i) * 32);
            CHECK(zones[i].hi_note == int(i) * 32 + 31);
            CHECK(zones[i].root_note == int(i) * 32 + 15);
        }
    }
    SUBCASE("uneven split still tiles the keyboard") {
        auto zones = map_samples({"a", "b", "c"}, MapStrategy::EvenSplit);
        REQUIRE(zones.size() == 3);
        CHECK(zones[0].lo_note == 0);
        CHECK(zones[2].hi_note == 127);
        for (std::size_t i = 1; i < zones.size(); ++i)
            CHECK(zones[i].lo_note == zones[i - 1].hi_note + 1);
    }
    SUBCASE("round robin assigns semitones cyclically") {
        auto zones = map_samples({"a", "b", "c"}, MapStrategy::RoundRobinChromatic);
        REQUIRE(zones.size() == 128);
        CHECK(zones[0].path == "a");
        CHECK(zones[1].path == "b");
        CHECK(zones[2].path == "c");
        CHECK(zones[3].path == "a");
        CHECK(zones[127].lo_note == 127);
    }
    SUBCASE("no samples is an error") {
        CHECK_THROWS_AS(map_samples({}, MapStrategy::EvenSplit), ConfigError);
    }
}

TEST_CASE("emit_preset") {
    SamplerInstrumentSpec spec;
    spec.name = "test kit";
    spec.envelope = {0.1, 0.2, 0.8, 0.5};
    spec.entries = map_samples({"samples/one.wav", "samples/two.wav"}, MapStrategy::EvenSplit);

    SUBCASE("ADSR values appear verbatim as attributes") {
        const std::string xml = emit_preset(spec);
        CHECK(xml.find("attack=\"0.1\"") != std::string::npos);
        CHECK(xml.find("decay=\"0.2\"") != std::string::npos);
        CHECK(xml.find("sustain=\"0.8\"") != std::string::npos);
        CHECK(xml.find("release=\"0.5\"") != std::string::npos);
    }
    SUBCASE("emit then parse-back is the identity") {
        CHECK(parse_preset(emit_preset(spec)) == spec);
    }
    SUBCASE("loop attributes survive the round trip") {
        spec.entries = map_samples({"cycle.wav"}, MapStrategy::EvenSplit);
        spec.entries[0].loop_enabled = true;
        spec.entries[0].loop_start = 0;
        spec.entries[0].loop_end = 1023;
        CHECK(parse_preset(emit_preset(spec)) == spec);
    }
    SUBCASE("equal specs emit identical bytes") {
        CHECK(emit_preset(spec) == emit_preset(spec));
    }
    SUBCASE("xml metacharacters in paths are escaped and recovered") {
        spec.entries = map_samples({"we&ird <name>.wav"}, MapStrategy::EvenSplit);
        const std::string xml = emit_preset(spec);
        CHECK(xml.find("we&amp;ird") != std::string::npos);
        CHECK(parse_preset(xml).entries[0].path == "we&ird <name>.wav");
    }
    SUBCASE("validation failures happen before any output") {
        spec.entries[0].hi_note = 80; // gap before entry 1
        CHECK_THROWS_AS(emit_preset(spec), ConfigError);
        spec.entries[0].hi_note = 70; // overlap? no: entry1 lo=64 -> overlap
        CHECK_THROWS_AS(emit_preset(spec), ConfigError);
        spec.entries.clear();
        CHECK_THROWS_AS(emit_preset(spec), ConfigError);
    }
    SUBCASE("envelope out of range is rejected") {
        spec.envelope.sustain = 1.5;
        CHECK_THROWS_AS(emit_preset(spec), ConfigError);
    }
    SUBCASE("malformed xml is rejected by the strict parser") {
        CHECK_THROWS_AS(parse_preset("<DecentSampler><groups></DecentSampler>"), ParseError);
        CHECK_THROWS_AS(parse_preset("not xml at all"), ParseError);
    }
}
