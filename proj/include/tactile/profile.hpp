#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tactile/layout.hpp"
#include "tactile/mapping.hpp"

namespace tactile::profile {

using mapping::MappingProfile;

class ProfileError : public std::runtime_error {
public:
    ProfileError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), field_path_(path) {}
    const std::string& field_path() const { return field_path_; }

private:
    std::string field_path_;
};

namespace detail {

using nlohmann::json;

inline int int_in_range(const json& v, int lo, int hi, const std::string& path) {
    if (!v.is_number_integer())
        throw ProfileError(path, "expected an integer");
    int n = v.get<int>();
    if (n < lo || n > hi)
        throw ProfileError(path, "value " + std::to_string(n) + " outside [" +
                                     std::to_string(lo) + "," + std::to_string(hi) + "]");
    return n;
}

inline double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ProfileError(path, "expected a number");
    return v.get<double>();
}

inline int parse_int_key(const std::string& key, const std::string& path) {
    try {
        size_t used = 0;
        int n = std::stoi(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
        return n;
    } catch (const std::exception&) {
        throw ProfileError(path, "key '" + key + "' is not an integer");
    }
}

inline layout::ActuatorSite site(const json& v, const std::string& path) {
    if (!v.is_string()) throw ProfileError(path, "expected a site name");
    auto s = layout::site_from_name(v.get<std::string>());
    if (!s) throw ProfileError(path, "unknown site '" + v.get<std::string>() + "'");
    return *s;
}

}  // namespace detail

/// Parses a profile document. Every omitted section keeps the built-in
/// defaults, which encode the published mapping constants (octave bands
/// 85-170 / 170-255, bass 50-150 Hz over 24 semitones, GM drum routing).
inline MappingProfile parse_profile(const nlohmann::json& doc) {
    using detail::json;
    MappingProfile p;
    if (!doc.is_object()) throw ProfileError("$", "profile document must be an object");

    static const std::vector<std::string> known = {"layout", "melody", "bass",
                                                   "percussion", "rabbit", "channels"};
    for (auto& [key, value] : doc.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ProfileError(key, "unknown section");

    if (doc.contains("layout")) {
        const json& l = doc["layout"];
        if (l.contains("anchors")) {
            std::vector<std::pair<int, layout::ActuatorSite>> anchors;
            for (auto& [key, value] : l["anchors"].items()) {
                std::string path = "layout.anchors." + key;
                int pc = detail::parse_int_key(key, path);
                if (pc < 0 || pc > 11) throw ProfileError(path, "pitch class outside 0-11");
                anchors.emplace_back(pc, detail::site(value, path));
            }
            try {
                p.circle = layout::ChromaticCircle(anchors);
            } catch (const std::invalid_argument& e) {
                throw ProfileError("layout.anchors", e.what());
            }
        }
    }

    if (doc.contains("melody")) {
        const json& m = doc["melody"];
        if (m.contains("mode")) {
            std::string mode = m["mode"].get<std::string>();
            if (mode == "finger_script")
                p.melody_mode = mapping::MelodyMode::FingerScript;
            else if (mode == "chromatic_circle")
                p.melody_mode = mapping::MelodyMode::ChromaticCircle;
            else
                throw ProfileError("melody.mode", "unknown mode '" + mode + "'");
        }
        if (m.contains("finger_table")) {
            p.finger_table.clear();
            for (auto& [key, value] : m["finger_table"].items()) {
                std::string path = "melody.finger_table." + key;
                int note = detail::parse_int_key(key, path);
                if (note < 0 || note > 127) throw ProfileError(path, "note outside 0-127");
                p.finger_table[note] = detail::int_in_range(value, 1, 5, path);
            }
        }
        if (m.contains("octave_bands")) {
            p.octave_bands.clear();
            for (auto& [key, value] : m["octave_bands"].items()) {
                std::string path = "melody.octave_bands." + key;
                int octave = detail::parse_int_key(key, path);
                if (!value.is_array() || value.size() != 2)
                    throw ProfileError(path, "expected [lo, hi]");
                int lo = detail::int_in_range(value[0], 0, 255, path + "[0]");
                int hi = detail::int_in_range(value[1], 0, 255, path + "[1]");
                if (lo >= hi) throw ProfileError(path, "band lo must be < hi");
                p.octave_bands[octave] = {lo, hi};
            }
            if (p.octave_bands.empty())
                throw ProfileError("melody.octave_bands", "at least one band required");
        }
    }

    if (doc.contains("bass")) {
        const json& b = doc["bass"];
        if (b.contains("window_base_note"))
            p.bass_window_base_note =
                detail::int_in_range(b["window_base_note"], 0, 127, "bass.window_base_note");
        if (b.contains("base_freq_hz"))
            p.bass_base_freq_hz = detail::number(b["base_freq_hz"], "bass.base_freq_hz");
        if (b.contains("top_freq_hz"))
            p.bass_top_freq_hz = detail::number(b["top_freq_hz"], "bass.top_freq_hz");
        if (b.contains("span_semitones"))
            p.bass_span_semitones =
                detail::int_in_range(b["span_semitones"], 1, 127, "bass.span_semitones");
        if (p.bass_base_freq_hz >= p.bass_top_freq_hz)
            throw ProfileError("bass", "base_freq_hz must be below top_freq_hz");
    }

    if (doc.contains("percussion")) {
        const json& perc = doc["percussion"];
        if (perc.contains("duration_ms")) {
            double d = detail::number(perc["duration_ms"], "percussion.duration_ms");
            if (d <= 0) throw ProfileError("percussion.duration_ms", "must be > 0");
            p.percussion_duration_s = d / 1000.0;
        }
        if (perc.contains("table")) {
            p.percussion_table.clear();
            for (auto& [key, value] : perc["table"].items()) {
                std::string path = "percussion.table." + key;
                int note = detail::parse_int_key(key, path);
                if (note < 0 || note > 127) throw ProfileError(path, "note outside 0-127");
                if (!value.is_array()) throw ProfileError(path, "expected a target array");
                std::vector<mapping::PercussionTarget> targets;
                for (size_t i = 0; i < value.size(); ++i) {
                    std::string tpath = path + "[" + std::to_string(i) + "]";
                    const json& t = value[i];
                    mapping::PercussionTarget target;
                    target.site = detail::site(t.at("site"), tpath + ".site");
                    if (t.contains("scale")) {
                        target.intensity_scale = detail::number(t["scale"], tpath + ".scale");
                        if (target.intensity_scale < 0 || target.intensity_scale > 1)
                            throw ProfileError(tpath + ".scale", "scale outside [0,1]");
                    }
                    targets.push_back(target);
                }
                p.percussion_table[note] = std::move(targets);
            }
        }
    }

    if (doc.contains("rabbit")) {
        const json& r = doc["rabbit"];
        if (r.contains("tap_count"))
            p.rabbit.tap_count = detail::int_in_range(r["tap_count"], 1, 64, "rabbit.tap_count");
        if (r.contains("inter_tap_ms")) {
            p.rabbit.inter_tap_ms = detail::number(r["inter_tap_ms"], "rabbit.inter_tap_ms");
            if (p.rabbit.inter_tap_ms <= 0)
                throw ProfileError("rabbit.inter_tap_ms", "must be > 0");
        }
        if (r.contains("tap_duration_ms")) {
            p.rabbit.tap_duration_ms =
                detail::number(r["tap_duration_ms"], "rabbit.tap_duration_ms");
            if (p.rabbit.tap_duration_ms <= 0)
                throw ProfileError("rabbit.tap_duration_ms", "must be > 0");
        }
        if (p.rabbit.tap_duration_ms > p.rabbit.inter_tap_ms)
            throw ProfileError("rabbit", "tap_duration_ms must be <= inter_tap_ms");
        if (r.contains("sequencing")) {
            std::string s = r["sequencing"].get<std::string>();
            if (s == "alternating")
                p.rabbit.sequencing = mapping::RabbitSequencing::Alternating;
            else if (s == "saltation")
                p.rabbit.sequencing = mapping::RabbitSequencing::Saltation;
            else
                throw ProfileError("rabbit.sequencing", "unknown sequencing '" + s + "'");
        }
    }

    if (doc.contains("channels")) {
        p.channel_roles.clear();
        for (auto& [key, value] : doc["channels"].items()) {
            std::string path = "channels." + key;
            int channel = detail::parse_int_key(key, path);
            if (channel < 0 || channel > 15) throw ProfileError(path, "channel outside 0-15");
            std::string role = value.get<std::string>();
            if (role == "melody")
                p.channel_roles[channel] = mapping::ChannelRole::Melody;
            else if (role == "chords")
                p.channel_roles[channel] = mapping::ChannelRole::Chords;
            else if (role == "bassline")
                p.channel_roles[channel] = mapping::ChannelRole::Bassline;
            else if (role == "percussion")
                p.channel_roles[channel] = mapping::ChannelRole::Percussion;
            else if (role == "ignore")
                p.channel_roles[channel] = mapping::ChannelRole::Ignore;
            else
                throw ProfileError(path, "unknown role '" + role + "'");
        }
        // the GM drum channel stays percussion unless the profile says otherwise
        if (!p.channel_roles.count(9))
            p.channel_roles[9] = mapping::ChannelRole::Percussion;
    }

    return p;
}

inline MappingProfile load_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ProfileError("$", "cannot open profile file " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ProfileError("$", std::string("invalid JSON: ") + e.what());
    }
    return parse_profile(doc);
}

}  // namespace tactile::profile
