#include <doctest.h>

#include <random>

#include "smf_builder.hpp"
#include "tactile/midi.hpp"

using namespace tactile::midi;

namespace {

std::vector<MidiMessage> decode_all(const std::vector<uint8_t>& bytes) {
    DecoderState state;
    return decode_stream(bytes, state);
}

/// Brute-force tick->seconds oracle: walks every tick and accumulates the
/// per-tick duration of whatever tempo segment it falls in.
double seconds_oracle(const std::vector<std::pair<uint64_t, uint32_t>>& changes, int tpq,
                      uint64_t tick) {
    double s = 0.0;
    for (uint64_t t = 0; t < tick; ++t) {
        uint32_t uspq = 500000;
        for (const auto& [ct, cu] : changes)
            if (ct <= t) uspq = cu;
        s += (double)uspq / (1e6 * tpq);
    }
    return s;
}

}  // namespace

TEST_CASE("note-on triplet decodes per the wire convention") {
    auto msgs = decode_all({144, 72, 100});
    REQUIRE(msgs.size() == 1);
    CHECK(msgs[0] == MidiMessage{MessageKind::NoteOn, 0, 72, 100});
}

TEST_CASE("note-off triplet decodes with velocity 0") {
    auto msgs = decode_all({128, 72, 0});
    REQUIRE(msgs.size() == 1);
    CHECK(msgs[0] == MidiMessage{MessageKind::NoteOff, 0, 72, 0});
}

TEST_CASE("running status with velocity-0 normalization") {
    auto msgs = decode_all({144, 72, 100, 72, 0});
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0].kind == MessageKind::NoteOn);
    CHECK(msgs[1].kind == MessageKind::NoteOff);
    CHECK(msgs[1].data1 == 72);
}

TEST_CASE("one-data-byte kinds store data2 = 0") {
    auto msgs = decode_all({0xC3, 17});
    REQUIRE(msgs.size() == 1);
    CHECK(msgs[0] == MidiMessage{MessageKind::ProgramChange, 3, 17, 0});
}

TEST_CASE("status 146 is a note-on on channel 2, not a control change") {
    // MIDI standard wins over the published example; 0xB0+channel is CC
    auto msgs = decode_all({146, 1, 100});
    REQUIRE(msgs.size() == 1);
    CHECK(msgs[0].kind == MessageKind::NoteOn);
    CHECK(msgs[0].channel == 2);
    auto cc = decode_all({0xB2, 1, 100});
    REQUIRE(cc.size() == 1);
    CHECK(cc[0].kind == MessageKind::ControlChange);
}

TEST_CASE("stray data bytes are discarded and counted") {
    DecoderState state;
    auto msgs = decode_stream(std::vector<uint8_t>{10, 20, 144, 60, 90}, state);
    REQUIRE(msgs.size() == 1);
    CHECK(state.stray_data_bytes == 2);
}

TEST_CASE("realtime bytes pass through a message without disturbing it") {
    auto msgs = decode_all({144, 0xF8, 72, 0xFE, 100});
    REQUIRE(msgs.size() == 1);
    CHECK(msgs[0] == MidiMessage{MessageKind::NoteOn, 0, 72, 100});
}

TEST_CASE("sysex payload is skipped and counted") {
    DecoderState state;
    auto msgs = decode_stream(std::vector<uint8_t>{0xF0, 1, 2, 3, 0xF7, 144, 60, 80}, state);
    REQUIRE(msgs.size() == 1);
    CHECK(msgs[0].data1 == 60);
    CHECK(state.skipped_sysex == 1);
}

TEST_CASE("system common cancels running status") {
    DecoderState state;
    auto msgs = decode_stream(std::vector<uint8_t>{144, 60, 80, 0xF6, 61, 80}, state);
    CHECK(msgs.size() == 1);
    CHECK(state.stray_data_bytes == 2);
}

TEST_CASE("chunk-split decoding equals single-shot decoding") {
    std::mt19937 rng(7);
    std::vector<uint8_t> stream;
    uint8_t note = 60;
    for (int i = 0; i < 300; ++i) {
        switch (rng() % 5) {
            case 0: stream.insert(stream.end(), {(uint8_t)(0x90 | (rng() % 16)),
                                                 (uint8_t)(rng() % 128), (uint8_t)(1 + rng() % 127)});
                break;
            case 1: stream.insert(stream.end(), {(uint8_t)(0x80 | (rng() % 16)), note, 0}); break;
            case 2: stream.insert(stream.end(), {(uint8_t)(rng() % 128),
                                                 (uint8_t)(rng() % 128)});  // running status data
                break;
            case 3: stream.push_back((uint8_t)(0xF8 + rng() % 8)); break;
            case 4: stream.insert(stream.end(), {(uint8_t)(0xC0 | (rng() % 16)),
                                                 (uint8_t)(rng() % 128)});
                break;
        }
    }
    auto whole = decode_all(stream);
    for (int trial = 0; trial < 200; ++trial) {
        size_t cut = rng() % (stream.size() + 1);
        DecoderState state;
        auto part = decode_stream(std::span(stream.data(), cut), state);
        auto rest = decode_stream(std::span(stream.data() + cut, stream.size() - cut), state);
        part.insert(part.end(), rest.begin(), rest.end());
        REQUIRE(part == whole);
    }
}

TEST_CASE("every decoded message has data bytes below 128") {
    std::mt19937 rng(99);
    std::vector<uint8_t> noise(5000);
    for (auto& b : noise) b = (uint8_t)rng();
    for (const auto& m : decode_all(noise)) {
        CHECK(m.data1 < 128);
        CHECK(m.data2 < 128);
    }
}

TEST_CASE("minimal format-0 file parses to two timed events") {
    auto bytes = testutil::build_smf({{testutil::note_on(0, 0, 60, 100),
                                       testutil::note_off(480, 0, 60)}});
    auto doc = parse_smf(bytes);
    CHECK(doc.format == 0);
    CHECK(doc.ticks_per_quarter == 480);
    REQUIRE(doc.tracks.size() == 1);
    REQUIRE(doc.tracks[0].size() == 2);
    CHECK(doc.tracks[0][0].tick == 0);
    CHECK(doc.tracks[0][1].tick == 480);
    CHECK(doc.tracks[0][1].message.kind == MessageKind::NoteOff);
}

TEST_CASE("bad header tag is a parse error at offset 0") {
    std::vector<uint8_t> bytes = {'X', 'T', 'h', 'd', 0, 0, 0, 6};
    try {
        parse_smf(bytes);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 0);
    }
}

TEST_CASE("track length past end of file is a truncated-chunk error") {
    auto bytes = testutil::build_smf({{testutil::note_on(0, 0, 60, 100)}});
    // inflate the MTrk length field
    bytes[14 + 7] = (uint8_t)(bytes[14 + 7] + 50);
    CHECK_THROWS_AS(parse_smf(bytes), ParseError);
}

TEST_CASE("SMPTE division is rejected with a clear error") {
    auto bytes = testutil::build_smf({{testutil::note_on(0, 0, 60, 100)}});
    bytes[12] = 0xE8;  // negative SMPTE fps
    CHECK_THROWS_WITH_AS(parse_smf(bytes), doctest::Contains("SMPTE"), ParseError);
}

TEST_CASE("overlong variable-length quantity is rejected") {
    std::vector<uint8_t> bytes = {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 1, 0xE0,
                                  'M', 'T', 'r', 'k', 0, 0, 0, 8,
                                  0x80, 0x80, 0x80, 0x80, 0x80, 0x00, 0x90, 60};
    CHECK_THROWS_AS(parse_smf(bytes), ParseError);
}

TEST_CASE("tempo map defaults to 120 BPM") {
    SmfDocument doc;
    doc.tracks.push_back({});
    auto map = build_tempo_map(doc);
    REQUIRE(map.entries().size() == 1);
    CHECK(map.entries()[0] == std::pair<uint64_t, uint32_t>{0, 500000});
}

TEST_CASE("tempo events stay ordered, same-tick duplicates keep the last") {
    SmfDocument doc;
    doc.meta_tempo_changes = {{960, 300000}, {0, 600000}, {0, 550000}};
    auto map = build_tempo_map(doc);
    REQUIRE(map.entries().size() == 2);
    CHECK(map.entries()[0] == std::pair<uint64_t, uint32_t>{0, 550000});
    CHECK(map.entries()[1] == std::pair<uint64_t, uint32_t>{960, 300000});
}

TEST_CASE("ticks_to_seconds basics") {
    TempoMap map;
    CHECK(ticks_to_seconds(map, 480, 0) == 0.0);
    CHECK(ticks_to_seconds(map, 480, 480) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ticks_to_seconds across tempo changes matches the per-tick oracle") {
    std::vector<std::pair<uint64_t, uint32_t>> changes = {{0, 600000}, {960, 300000},
                                                          {1500, 800000}};
    TempoMap map(changes);
    for (uint64_t tick : {0ull, 1ull, 959ull, 960ull, 961ull, 1500ull, 2400ull}) {
        CHECK(map.seconds_at(480, tick) ==
              doctest::Approx(seconds_oracle(changes, 480, tick)).epsilon(1e-9));
    }
}

TEST_CASE("ticks_to_seconds is monotone") {
    std::mt19937 rng(3);
    std::vector<std::pair<uint64_t, uint32_t>> changes;
    uint64_t t = 0;
    for (int i = 0; i < 10; ++i) {
        t += rng() % 500 + 1;
        changes.emplace_back(t, 100000 + rng() % 900000);
    }
    TempoMap map(changes);
    double prev = -1.0;
    for (uint64_t tick = 0; tick < 6000; tick += 37) {
        double s = map.seconds_at(96, tick);
        CHECK(s >= prev);
        prev = s;
    }
}

TEST_CASE("merge keeps single-track order") {
    auto bytes = testutil::build_smf({{testutil::note_on(0, 0, 60, 100),
                                       testutil::note_off(480, 0, 60),
                                       testutil::note_on(480, 0, 62, 100)}});
    auto doc = parse_smf(bytes);
    auto merged = merge_tracks(doc);
    REQUIRE(merged.size() == 3);
    CHECK(merged[0].message.data1 == 60);
    CHECK(merged[1].message.kind == MessageKind::NoteOff);
}

TEST_CASE("merge interleaves two tracks by tick") {
    auto bytes = testutil::build_smf({{testutil::note_on(0, 0, 60, 100),
                                       testutil::note_on(960, 0, 61, 100)},
                                      {testutil::note_on(480, 1, 62, 100)}},
                                     480, 1);
    auto merged = merge_tracks(parse_smf(bytes));
    REQUIRE(merged.size() == 3);
    CHECK(merged[0].tick == 0);
    CHECK(merged[1].tick == 480);
    CHECK(merged[2].tick == 960);
}

TEST_CASE("note-off sorts before note-on of the same note at the same tick") {
    // the on arrives before the off in byte order, across tracks
    auto bytes = testutil::build_smf({{testutil::note_on(480, 0, 60, 100)},
                                      {testutil::note_off(480, 0, 60)}},
                                     480, 1);
    auto merged = merge_tracks(parse_smf(bytes));
    REQUIRE(merged.size() == 2);
    CHECK(merged[0].message.kind == MessageKind::NoteOff);
    CHECK(merged[1].message.kind == MessageKind::NoteOn);
}

TEST_CASE("parse then re-serialize reproduces tick-identical events") {
    std::mt19937 rng(17);
    std::vector<testutil::TrackEvent> events;
    uint64_t tick = 0;
    for (int i = 0; i < 120; ++i) {
        tick += rng() % 700;
        int note = 30 + (int)(rng() % 60);
        if (rng() % 2)
            events.push_back(testutil::note_on(tick, (int)(rng() % 16), note,
                                               1 + (int)(rng() % 127)));
        else
            events.push_back(testutil::note_off(tick, (int)(rng() % 16), note));
    }
    auto doc = parse_smf(testutil::build_smf({events}));
    REQUIRE(doc.tracks[0].size() == events.size());
    std::vector<testutil::TrackEvent> round;
    for (const auto& ev : doc.tracks[0]) {
        uint8_t status = ev.message.kind == MessageKind::NoteOn
                             ? (uint8_t)(0x90 | ev.message.channel)
                             : (uint8_t)(0x80 | ev.message.channel);
        round.push_back({ev.tick, {status, ev.message.data1, ev.message.data2}});
    }
    auto doc2 = parse_smf(testutil::build_smf({round}));
    REQUIRE(doc2.tracks[0].size() == doc.tracks[0].size());
    for (size_t i = 0; i < doc.tracks[0].size(); ++i) {
        CHECK(doc2.tracks[0][i].tick == doc.tracks[0][i].tick);
        CHECK(doc2.tracks[0][i].message.kind == doc.tracks[0][i].message.kind);
        CHECK(doc2.tracks[0][i].message.data1 == doc.tracks[0][i].message.data1);
    }
}
