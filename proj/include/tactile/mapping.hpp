#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tactile/layout.hpp"
#include "tactile/midi.hpp"

namespace tactile::mapping {

using layout::ActuatorSite;
using layout::ChromaticCircle;

/// One timed intensity pulse on one site. Every pulse belongs to a
/// gesture: the group of pulses born of a single musical note.
struct HapticEvent {
    double t_on = 0.0;        // seconds
    double duration = 0.0;    // seconds, > 0
    ActuatorSite site = ActuatorSite::TipThumb;
    uint8_t intensity = 0;    // 0-255 drive level
    uint32_t gesture_id = 0;

    double t_off() const { return t_on + duration; }
    bool operator==(const HapticEvent&) const = default;
};

struct HapticTimeline {
    std::vector<HapticEvent> events;  // sorted by (t_on, site id, gesture_id)
    double duration = 0.0;
};

enum class MelodyMode : uint8_t { FingerScript, ChromaticCircle };
enum class RabbitSequencing : uint8_t { Alternating, Saltation };
enum class ChannelRole : uint8_t { Melody, Chords, Bassline, Percussion, Ignore };

struct RabbitParams {
    int tap_count = 4;
    double inter_tap_ms = 60.0;
    double tap_duration_ms = 40.0;
    RabbitSequencing sequencing = RabbitSequencing::Alternating;
};

struct PercussionTarget {
    ActuatorSite site;
    double intensity_scale = 1.0;  // 0-1
};

struct OctaveBand {
    int intensity_lo = 0;  // 0-255, lo < hi
    int intensity_hi = 0;
};

struct MappingProfile {
    MelodyMode melody_mode = MelodyMode::ChromaticCircle;
    ChromaticCircle circle;
    std::map<int, int> finger_table;            // note number -> finger 1-5
    std::map<int, OctaveBand> octave_bands;     // octave index (note/12) -> band
    int bass_window_base_note = 45;             // low A, per the piano example
    double bass_base_freq_hz = 50.0;
    double bass_top_freq_hz = 150.0;
    int bass_span_semitones = 24;
    std::map<int, std::vector<PercussionTarget>> percussion_table;
    double percussion_duration_s = 0.05;
    RabbitParams rabbit;
    std::map<int, ChannelRole> channel_roles;

    MappingProfile() {
        octave_bands = {{6, {85, 170}},    // middle octave band
                        {7, {170, 255}}};  // upper octave band
        percussion_table = default_percussion_table();
        channel_roles = {{0, ChannelRole::Melody}, {9, ChannelRole::Percussion}};
    }

    /// GM drum routing following the group rules: sharp high sounds to the
    /// tips, bass drum to thenar/hypothenar, toms to the MCP row, with
    /// snare and kick doubled onto the MCP center for extra impact.
    static std::map<int, std::vector<PercussionTarget>> default_percussion_table() {
        using S = ActuatorSite;
        std::map<int, std::vector<PercussionTarget>> t;
        for (int n : {35, 36})  // acoustic/std bass drum
            t[n] = {{S::Thenar, 1.0}, {S::Hypothenar, 1.0}, {S::McpCenter, 1.0}};
        for (int n : {38, 40})  // snares
            t[n] = {{S::TipIndex, 1.0}, {S::TipMiddle, 1.0}, {S::McpCenter, 1.0}};
        t[42] = {{S::TipRing, 1.0}};                       // closed hi-hat
        for (int n : {44, 46}) t[n] = {{S::TipLittle, 1.0}};  // pedal/open hi-hat
        for (int n : {49, 57})                             // crash cymbals
            t[n] = {{S::TipThumb, 1.0}, {S::TipIndex, 1.0}, {S::TipMiddle, 1.0},
                    {S::TipRing, 1.0},  {S::TipLittle, 1.0}};
        for (int n : {51, 59}) t[n] = {{S::TipLittle, 1.0}};  // ride cymbals
        for (int n : {41, 43}) t[n] = {{S::McpUlnar, 1.0}};   // low toms
        for (int n : {45, 47}) t[n] = {{S::McpCenter, 1.0}};  // mid toms
        for (int n : {48, 50}) t[n] = {{S::McpRadial, 1.0}};  // high toms
        return t;
    }
};

struct Diagnostics {
    uint64_t clamped_octaves = 0;      // note outside configured bands
    uint64_t clamped_bass_notes = 0;   // note outside the bass window
    uint64_t unmapped_percussion = 0;  // GM note absent from the table
    uint64_t unmatched_note_off = 0;
    uint64_t unclosed_note_on = 0;
    uint64_t ignored_channel_events = 0;  // channels with no configured role
};

class UnmappedNoteError : public std::runtime_error {
public:
    explicit UnmappedNoteError(int note)
        : std::runtime_error("note " + std::to_string(note) +
                             " missing from the finger table"),
          note_(note) {}
    int note() const { return note_; }

private:
    int note_;
};

/// The drive band usable on the ERM motors: 50-150 Hz maps linearly onto
/// intensity 85-255 (anchors 50->85, 100->170, 150->255).
inline int frequency_to_intensity(double freq_hz) {
    if (freq_hz < 50.0 || freq_hz > 150.0)
        throw std::out_of_range("frequency " + std::to_string(freq_hz) +
                                " Hz outside the perceptible 50-150 Hz band");
    return (int)std::lround(1.7 * freq_hz);
}

/// Linear semitone -> frequency law over the bass window; the default
/// 50-150 Hz over 24 semitones gives the 100/24 ~= 4.17 Hz step.
inline double bass_pitch_to_frequency(int semitone_index, const MappingProfile& profile) {
    if (semitone_index < 0 || semitone_index > profile.bass_span_semitones)
        throw std::out_of_range("semitone index outside the bass window");
    return profile.bass_base_freq_hz +
           semitone_index *
               (profile.bass_top_freq_hz - profile.bass_base_freq_hz) /
               profile.bass_span_semitones;
}

/// Velocity mapped linearly into the note's octave band. Octaves without
/// a configured band clamp to the nearest configured one.
inline int octave_band_intensity(int note, int velocity, const MappingProfile& profile,
                                 Diagnostics* diag = nullptr) {
    if (profile.octave_bands.empty())
        throw std::invalid_argument("profile has no octave bands");
    int octave = note / 12;
    auto it = profile.octave_bands.find(octave);
    if (it == profile.octave_bands.end()) {
        if (diag) diag->clamped_octaves++;
        auto lo = profile.octave_bands.lower_bound(octave);
        if (lo == profile.octave_bands.end())
            it = std::prev(profile.octave_bands.end());
        else if (lo == profile.octave_bands.begin())
            it = lo;
        else {
            auto below = std::prev(lo);
            it = (octave - below->first <= lo->first - octave) ? below : lo;
        }
    }
    const OctaveBand& band = it->second;
    int v = std::clamp(velocity, 1, 127);
    return band.intensity_lo +
           (int)std::lround((double)(band.intensity_hi - band.intensity_lo) * (v - 1) / 126.0);
}

/// Tap train for the cutaneous rabbit illusion. round(n * fraction) taps
/// land on anchor B, the rest on A; Alternating spreads the B taps evenly
/// through the train, Saltation plays all A taps first. If the nominal
/// train overruns the note, inter-tap spacing compresses so it fits.
inline std::vector<HapticEvent> rabbit_train(ActuatorSite anchor_a, ActuatorSite anchor_b,
                                             double fraction, double t_on, double duration,
                                             int intensity, const RabbitParams& params,
                                             uint32_t gesture_id = 0) {
    if (fraction < 0.0 || fraction > 1.0)
        throw std::out_of_range("fraction must be in [0,1]");
    int n = params.tap_count;
    if (n < 1) throw std::invalid_argument("tap_count must be >= 1");

    int taps_b = (int)std::lround(n * fraction);
    double spacing = params.inter_tap_ms / 1000.0;
    double tap_dur = params.tap_duration_ms / 1000.0;
    if (tap_dur > duration) tap_dur = duration;
    if (n > 1 && (n - 1) * spacing + tap_dur > duration)
        spacing = (duration - tap_dur) / (n - 1);

    std::vector<HapticEvent> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        bool is_b;
        if (params.sequencing == RabbitSequencing::Saltation) {
            is_b = i >= n - taps_b;
        } else {
            // Bresenham spread of taps_b B-slots over n positions
            is_b = (int64_t)(i + 1) * taps_b / n > (int64_t)i * taps_b / n;
        }
        out.push_back({t_on + i * spacing, tap_dur, is_b ? anchor_b : anchor_a,
                       (uint8_t)std::clamp(intensity, 0, 255), gesture_id});
    }
    return out;
}

/// Melody note -> fingertip gesture. FingerScript triggers the scripted
/// finger directly; ChromaticCircle places the pitch class on the circle
/// and interpolates virtual positions with a rabbit train.
inline std::vector<HapticEvent> map_melody_note(int note, int velocity, double t_on,
                                                double duration, const MappingProfile& profile,
                                                Diagnostics* diag = nullptr,
                                                uint32_t gesture_id = 0) {
    int intensity = octave_band_intensity(note, velocity, profile, diag);
    if (profile.melody_mode == MelodyMode::FingerScript) {
        auto it = profile.finger_table.find(note);
        if (it == profile.finger_table.end()) throw UnmappedNoteError(note);
        auto site = static_cast<ActuatorSite>(it->second - 1);  // finger 1 = thumb
        return {{t_on, duration, site, (uint8_t)intensity, gesture_id}};
    }
    auto loc = profile.circle.locate_pitch_class(note % 12);
    if (loc.fraction == 0.0)
        return {{t_on, duration, loc.anchor_a, (uint8_t)intensity, gesture_id}};
    return rabbit_train(loc.anchor_a, loc.anchor_b, loc.fraction, t_on, duration, intensity,
                        profile.rabbit, gesture_id);
}

namespace detail {

/// Clamps a note into the bass window, returning the semitone index.
inline int bass_index(int note, const MappingProfile& profile, Diagnostics* diag) {
    int index = note - profile.bass_window_base_note;
    if (index < 0 || index > profile.bass_span_semitones) {
        if (diag) diag->clamped_bass_notes++;
        index = std::clamp(index, 0, profile.bass_span_semitones);
    }
    return index;
}

}  // namespace detail

/// Chord-layer note onto the MCP row: site by window tertile, intensity
/// from the pitch->frequency->intensity chain.
inline HapticEvent map_chord_note(int note, int /*velocity*/, double t_on, double duration,
                                  const MappingProfile& profile, Diagnostics* diag = nullptr,
                                  uint32_t gesture_id = 0) {
    int index = detail::bass_index(note, profile, diag);
    int tertile = (int)((int64_t)index * 3 / (profile.bass_span_semitones + 1));
    ActuatorSite site = tertile == 0   ? ActuatorSite::McpUlnar
                        : tertile == 1 ? ActuatorSite::McpCenter
                                       : ActuatorSite::McpRadial;
    int intensity = frequency_to_intensity(bass_pitch_to_frequency(index, profile));
    return {t_on, duration, site, (uint8_t)intensity, gesture_id};
}

/// Bassline note onto thenar/hypothenar: lower half of the window to the
/// hypothenar, upper half (midpoint included) to the thenar.
inline HapticEvent map_bassline_note(int note, int /*velocity*/, double t_on, double duration,
                                     const MappingProfile& profile, Diagnostics* diag = nullptr,
                                     uint32_t gesture_id = 0) {
    int index = detail::bass_index(note, profile, diag);
    ActuatorSite site = (2 * index >= profile.bass_span_semitones) ? ActuatorSite::Thenar
                                                                   : ActuatorSite::Hypothenar;
    int intensity = frequency_to_intensity(bass_pitch_to_frequency(index, profile));
    return {t_on, duration, site, (uint8_t)intensity, gesture_id};
}

/// Percussion hit -> fixed-duration pulses on the instrument's sites.
inline std::vector<HapticEvent> map_percussion(int gm_note, int velocity, double t_on,
                                               const MappingProfile& profile,
                                               Diagnostics* diag = nullptr,
                                               uint32_t gesture_id = 0) {
    auto it = profile.percussion_table.find(gm_note);
    if (it == profile.percussion_table.end()) {
        if (diag) diag->unmapped_percussion++;
        return {};
    }
    int base = (int)std::lround(velocity * 255.0 / 127.0);
    std::vector<HapticEvent> out;
    out.reserve(it->second.size());
    for (const auto& target : it->second) {
        int intensity = std::clamp((int)std::lround(base * target.intensity_scale), 0, 255);
        out.push_back({t_on, profile.percussion_duration_s, target.site, (uint8_t)intensity,
                       gesture_id});
    }
    return out;
}

struct RenderResult {
    HapticTimeline timeline;
    Diagnostics diagnostics;
};

/// Full mapping pass: pairs NoteOn/NoteOff per (channel, note), converts
/// ticks to seconds, and dispatches each note to its channel's role
/// mapper. Deterministic for identical inputs.
inline RenderResult render_timeline(const std::vector<midi::TimedEvent>& events,
                                    const midi::TempoMap& tempo, int ticks_per_quarter,
                                    const MappingProfile& profile) {
    RenderResult result;
    Diagnostics& diag = result.diagnostics;
    std::vector<HapticEvent>& out = result.timeline.events;

    struct OpenNote {
        double t_on;
        int velocity;
    };
    std::map<std::pair<int, int>, OpenNote> open;  // (channel, note) -> onset
    uint32_t next_gesture = 0;
    double end_of_song = 0.0;
    for (const auto& ev : events) {
        double t = tempo.seconds_at(ticks_per_quarter, ev.tick);
        end_of_song = std::max(end_of_song, t);
    }

    auto role_of = [&](int channel) {
        auto it = profile.channel_roles.find(channel);
        return it == profile.channel_roles.end() ? std::optional<ChannelRole>{}
                                                 : std::optional<ChannelRole>{it->second};
    };

    auto emit_note = [&](ChannelRole role, int note, int velocity, double t_on,
                         double duration) {
        std::vector<HapticEvent> events_for_note;
        switch (role) {
            case ChannelRole::Melody:
                events_for_note =
                    map_melody_note(note, velocity, t_on, duration, profile, &diag, next_gesture);
                break;
            case ChannelRole::Chords:
                events_for_note = {
                    map_chord_note(note, velocity, t_on, duration, profile, &diag, next_gesture)};
                break;
            case ChannelRole::Bassline:
                events_for_note = {map_bassline_note(note, velocity, t_on, duration, profile,
                                                     &diag, next_gesture)};
                break;
            default:
                return;
        }
        if (!events_for_note.empty()) {
            out.insert(out.end(), events_for_note.begin(), events_for_note.end());
            ++next_gesture;
        }
    };

    for (const auto& ev : events) {
        const midi::MidiMessage& m = ev.message;
        if (m.kind != midi::MessageKind::NoteOn && m.kind != midi::MessageKind::NoteOff)
            continue;
        auto role = role_of(m.channel);
        if (!role || *role == ChannelRole::Ignore) {
            if (!role) diag.ignored_channel_events++;
            continue;
        }
        double t = tempo.seconds_at(ticks_per_quarter, ev.tick);
        if (m.kind == midi::MessageKind::NoteOn) {
            if (*role == ChannelRole::Percussion) {
                auto hits = map_percussion(m.data1, m.data2, t, profile, &diag, next_gesture);
                if (!hits.empty()) {
                    out.insert(out.end(), hits.begin(), hits.end());
                    ++next_gesture;
                }
            } else {
                open[{m.channel, m.data1}] = {t, m.data2};
            }
        } else {
            if (*role == ChannelRole::Percussion) continue;  // hits are one-shot
            auto it = open.find({m.channel, m.data1});
            if (it == open.end()) {
                diag.unmatched_note_off++;
                continue;
            }
            double duration = t - it->second.t_on;
            if (duration <= 0.0) duration = 1e-3;  // zero-length note, keep it audible
            emit_note(*role, m.data1, it->second.velocity, it->second.t_on, duration);
            open.erase(it);
        }
    }

    // notes never released close at end-of-song
    for (const auto& [key, note] : open) {
        diag.unclosed_note_on++;
        auto role = role_of(key.first);
        double duration = std::max(end_of_song - note.t_on, 0.05);
        emit_note(*role, key.second, note.velocity, note.t_on, duration);
    }

    std::sort(out.begin(), out.end(), [](const HapticEvent& a, const HapticEvent& b) {
        if (a.t_on != b.t_on) return a.t_on < b.t_on;
        if (layout::site_id(a.site) != layout::site_id(b.site))
            return layout::site_id(a.site) < layout::site_id(b.site);
        return a.gesture_id < b.gesture_id;
    });
    for (const auto& e : out)
        result.timeline.duration = std::max(result.timeline.duration, e.t_off());
    return result;
}

}  // namespace tactile::mapping
