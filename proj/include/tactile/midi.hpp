#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tactile::midi {

enum class MessageKind : uint8_t {
    NoteOn,
    NoteOff,
    ControlChange,
    ProgramChange,
    PitchBend,
    ChannelPressure,
    PolyPressure,
    SystemOther,
};

struct MidiMessage {
    MessageKind kind = MessageKind::SystemOther;
    uint8_t channel = 0;  // 0-15
    uint8_t data1 = 0;    // note number or controller number, < 128
    uint8_t data2 = 0;    // velocity or controller value, < 128; 0 for one-byte kinds

    bool operator==(const MidiMessage&) const = default;
};

/// Builds a channel message from a status byte and its data bytes.
/// A NoteOn with velocity 0 is normalized to NoteOff.
inline MidiMessage make_channel_message(uint8_t status, uint8_t d1, uint8_t d2) {
    MidiMessage m;
    m.channel = status & 0x0F;
    m.data1 = d1;
    m.data2 = d2;
    switch (status & 0xF0) {
        case 0x80: m.kind = MessageKind::NoteOff; break;
        case 0x90:
            m.kind = (d2 == 0) ? MessageKind::NoteOff : MessageKind::NoteOn;
            break;
        case 0xA0: m.kind = MessageKind::PolyPressure; break;
        case 0xB0: m.kind = MessageKind::ControlChange; break;
        case 0xC0: m.kind = MessageKind::ProgramChange; break;
        case 0xD0: m.kind = MessageKind::ChannelPressure; break;
        case 0xE0: m.kind = MessageKind::PitchBend; break;
        default:   m.kind = MessageKind::SystemOther; break;
    }
    return m;
}

/// Number of data bytes following a channel status byte.
inline int channel_data_bytes(uint8_t status) {
    switch (status & 0xF0) {
        case 0xC0:
        case 0xD0: return 1;
        default:   return 2;
    }
}

/// Incremental decoder state for a raw MIDI byte stream. Owns running
/// status and any partially received message; one instance per source.
struct DecoderState {
    uint8_t running_status = 0;      // 0 = none
    uint8_t pending[2] = {0, 0};
    int pending_count = 0;
    bool in_sysex = false;
    uint64_t stray_data_bytes = 0;   // data bytes seen with no active status
    uint64_t skipped_sysex = 0;
};

/// Decodes as many complete channel messages as the bytes allow.
/// Supports running status; system-realtime bytes (0xF8-0xFF) are skipped
/// without disturbing an in-progress message. Stray data bytes are
/// discarded and counted, never fatal.
inline std::vector<MidiMessage> decode_stream(std::span<const uint8_t> bytes,
                                              DecoderState& state) {
    std::vector<MidiMessage> out;
    for (uint8_t b : bytes) {
        if (b >= 0xF8) continue;  // realtime, transparent
        if (state.in_sysex) {
            if (b < 0x80) continue;        // sysex payload, skipped
            state.in_sysex = false;        // any status byte terminates sysex
            if (b == 0xF7) continue;
        }
        if (b >= 0x80) {
            state.pending_count = 0;
            if (b < 0xF0) {
                state.running_status = b;
            } else {
                // system common cancels running status
                state.running_status = 0;
                if (b == 0xF0) {
                    state.in_sysex = true;
                    state.skipped_sysex++;
                }
            }
            continue;
        }
        // data byte
        if (state.running_status == 0) {
            state.stray_data_bytes++;
            continue;
        }
        state.pending[state.pending_count++] = b;
        int need = channel_data_bytes(state.running_status);
        if (state.pending_count == need) {
            uint8_t d2 = need == 2 ? state.pending[1] : 0;
            out.push_back(make_channel_message(state.running_status,
                                               state.pending[0], d2));
            state.pending_count = 0;
        }
    }
    return out;
}

struct TimedEvent {
    uint64_t tick = 0;
    MidiMessage message;
    uint32_t track_index = 0;

    bool operator==(const TimedEvent&) const = default;
};

struct SmfDocument {
    int format = 0;                      // 0, 1 or 2
    int ticks_per_quarter = 480;
    std::vector<std::vector<TimedEvent>> tracks;
    std::vector<std::pair<uint64_t, uint32_t>> meta_tempo_changes;  // (tick, us/quarter)
    uint64_t skipped_meta = 0;
    uint64_t skipped_sysex = 0;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, size_t offset)
        : std::runtime_error(what + " at byte offset " + std::to_string(offset)),
          offset_(offset) {}
    size_t offset() const { return offset_; }

private:
    size_t offset_;
};

namespace detail {

class ByteReader {
public:
    explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

    size_t pos() const { return pos_; }
    size_t remaining() const { return data_.size() - pos_; }

    uint8_t u8() {
        require(1);
        return data_[pos_++];
    }
    uint16_t u16() {
        require(2);
        uint16_t v = (uint16_t)((data_[pos_] << 8) | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    uint32_t u32() {
        require(4);
        uint32_t v = ((uint32_t)data_[pos_] << 24) | ((uint32_t)data_[pos_ + 1] << 16) |
                     ((uint32_t)data_[pos_ + 2] << 8) | data_[pos_ + 3];
        pos_ += 4;
        return v;
    }
    /// SMF variable-length quantity, at most 4 bytes.
    uint32_t vlq() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            uint8_t b = u8();
            v = (v << 7) | (b & 0x7F);
            if (!(b & 0x80)) return v;
        }
        throw ParseError("variable-length quantity exceeds 4 bytes", pos_);
    }
    void skip(size_t n) {
        require(n);
        pos_ += n;
    }
    bool tag(const char (&t)[5]) {
        require(4);
        bool ok = data_[pos_] == (uint8_t)t[0] && data_[pos_ + 1] == (uint8_t)t[1] &&
                  data_[pos_ + 2] == (uint8_t)t[2] && data_[pos_ + 3] == (uint8_t)t[3];
        if (ok) pos_ += 4;
        return ok;
    }

private:
    void require(size_t n) {
        if (remaining() < n) throw ParseError("truncated chunk", pos_);
    }
    std::span<const uint8_t> data_;
    size_t pos_ = 0;
};

}  // namespace detail

/// Parses a Standard MIDI File. Meta events other than tempo and sysex
/// payloads are skipped with a count. SMPTE division formats are rejected.
inline SmfDocument parse_smf(std::span<const uint8_t> bytes) {
    detail::ByteReader r(bytes);
    if (!r.tag("MThd")) throw ParseError("bad SMF header tag", 0);
    uint32_t hlen = r.u32();
    if (hlen < 6) throw ParseError("SMF header too short", r.pos());
    SmfDocument doc;
    doc.format = r.u16();
    if (doc.format > 2) throw ParseError("unknown SMF format", r.pos() - 2);
    uint16_t ntrks = r.u16();
    uint16_t division = r.u16();
    if (division & 0x8000) throw ParseError("SMPTE division not supported", r.pos() - 2);
    if (division == 0) throw ParseError("zero ticks-per-quarter", r.pos() - 2);
    doc.ticks_per_quarter = division;
    r.skip(hlen - 6);

    for (uint32_t ti = 0; ti < ntrks; ++ti) {
        // skip unknown chunks between tracks
        while (!r.tag("MTrk")) {
            if (r.remaining() < 8) throw ParseError("missing track chunk", r.pos());
            r.skip(4);
            uint32_t len = r.u32();
            r.skip(len);
        }
        uint32_t tlen = r.u32();
        if (tlen > r.remaining())
            throw ParseError("track length exceeds remaining bytes", r.pos() - 4);
        size_t track_end = r.pos() + tlen;

        std::vector<TimedEvent> track;
        uint64_t tick = 0;
        uint8_t running = 0;
        bool ended = false;
        while (r.pos() < track_end && !ended) {
            tick += r.vlq();
            uint8_t b = r.u8();
            if (b == 0xFF) {
                uint8_t type = r.u8();
                uint32_t len = r.vlq();
                if (type == 0x51 && len == 3) {
                    uint32_t uspq = ((uint32_t)r.u8() << 16);
                    uspq |= ((uint32_t)r.u8() << 8);
                    uspq |= r.u8();
                    doc.meta_tempo_changes.emplace_back(tick, uspq);
                } else if (type == 0x2F) {
                    r.skip(len);
                    ended = true;
                } else {
                    r.skip(len);
                    doc.skipped_meta++;
                }
                running = 0;
            } else if (b == 0xF0 || b == 0xF7) {
                uint32_t len = r.vlq();
                r.skip(len);
                doc.skipped_sysex++;
                running = 0;
            } else {
                uint8_t status, d1;
                if (b & 0x80) {
                    status = b;
                    running = b;
                    d1 = r.u8();
                } else {
                    if (running == 0)
                        throw ParseError("data byte with no running status", r.pos() - 1);
                    status = running;
                    d1 = b;
                }
                if (d1 & 0x80) throw ParseError("data byte out of range", r.pos() - 1);
                uint8_t d2 = 0;
                if (channel_data_bytes(status) == 2) {
                    d2 = r.u8();
                    if (d2 & 0x80) throw ParseError("data byte out of range", r.pos() - 1);
                }
                track.push_back({tick, make_channel_message(status, d1, d2), ti});
            }
        }
        if (r.pos() != track_end) {
            if (r.pos() > track_end)
                throw ParseError("event ran past track boundary", r.pos());
            r.skip(track_end - r.pos());
        }
        doc.tracks.push_back(std::move(track));
    }
    if (doc.tracks.empty()) throw ParseError("file has no tracks", bytes.size());
    return doc;
}

class TempoMap {
public:
    /// Entries sorted by tick; an entry at tick 0 always exists
    /// (MIDI default 500000 us/quarter, i.e. 120 BPM).
    explicit TempoMap(std::vector<std::pair<uint64_t, uint32_t>> changes = {}) {
        std::stable_sort(changes.begin(), changes.end(),
                         [](auto& a, auto& b) { return a.first < b.first; });
        entries_.emplace_back(0, 500000u);
        for (auto& [tick, uspq] : changes) {
            if (!entries_.empty() && entries_.back().first == tick)
                entries_.back().second = uspq;  // same tick: last wins
            else
                entries_.emplace_back(tick, uspq);
        }
    }

    const std::vector<std::pair<uint64_t, uint32_t>>& entries() const { return entries_; }

    /// Piecewise-linear tick -> seconds conversion.
    double seconds_at(int ticks_per_quarter, uint64_t tick) const {
        double seconds = 0.0;
        for (size_t i = 0; i < entries_.size(); ++i) {
            uint64_t seg_start = entries_[i].first;
            if (tick <= seg_start) break;
            uint64_t seg_end = (i + 1 < entries_.size()) ? entries_[i + 1].first : tick;
            uint64_t span = std::min(tick, seg_end) - seg_start;
            seconds += (double)span * entries_[i].second / (1e6 * ticks_per_quarter);
        }
        return seconds;
    }

private:
    std::vector<std::pair<uint64_t, uint32_t>> entries_;
};

inline TempoMap build_tempo_map(const SmfDocument& doc) {
    return TempoMap(doc.meta_tempo_changes);
}

inline double ticks_to_seconds(const TempoMap& map, int ticks_per_quarter, uint64_t tick) {
    return map.seconds_at(ticks_per_quarter, tick);
}

/// Merges all tracks into one time-ordered list. Stable by
/// (tick, track_index, original index); at an equal tick a NoteOff is
/// moved ahead of a NoteOn for the same (channel, note) so zero-length
/// re-strikes do not read as stuck notes.
inline std::vector<TimedEvent> merge_tracks(const SmfDocument& doc) {
    struct Keyed {
        TimedEvent ev;
        uint64_t index;
    };
    std::vector<Keyed> all;
    uint64_t idx = 0;
    for (const auto& track : doc.tracks)
        for (const auto& ev : track) all.push_back({ev, idx++});
    std::stable_sort(all.begin(), all.end(), [](const Keyed& a, const Keyed& b) {
        if (a.ev.tick != b.ev.tick) return a.ev.tick < b.ev.tick;
        if (a.ev.track_index != b.ev.track_index)
            return a.ev.track_index < b.ev.track_index;
        return a.index < b.index;
    });

    std::vector<TimedEvent> out;
    out.reserve(all.size());
    for (auto& k : all) out.push_back(k.ev);

    // within each equal-tick run, hoist Offs over Ons of the same note
    size_t i = 0;
    while (i < out.size()) {
        size_t j = i;
        while (j < out.size() && out[j].tick == out[i].tick) ++j;
        for (size_t off = i; off < j; ++off) {
            if (out[off].message.kind != MessageKind::NoteOff) continue;
            for (size_t on = i; on < off; ++on) {
                if (out[on].message.kind == MessageKind::NoteOn &&
                    out[on].message.channel == out[off].message.channel &&
                    out[on].message.data1 == out[off].message.data1) {
                    TimedEvent tmp = out[off];
                    for (size_t k = off; k > on; --k) out[k] = out[k - 1];
                    out[on] = tmp;
                    break;
                }
            }
        }
        i = j;
    }
    return out;
}

}  // namespace tactile::midi
