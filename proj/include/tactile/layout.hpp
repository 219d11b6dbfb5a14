#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tactile::layout {

/// The 10 palm actuator sites. Numeric ids 0-9 in declaration order are
/// part of the wire protocol and must not change.
enum class ActuatorSite : uint8_t {
    TipThumb = 0,
    TipIndex,
    TipMiddle,
    TipRing,
    TipLittle,
    McpRadial,
    McpCenter,
    McpUlnar,
    Thenar,
    Hypothenar,
};

inline constexpr int kSiteCount = 10;

inline constexpr uint8_t site_id(ActuatorSite s) { return static_cast<uint8_t>(s); }

inline ActuatorSite site_from_id(uint8_t id) {
    if (id >= kSiteCount) throw std::out_of_range("actuator site id out of range");
    return static_cast<ActuatorSite>(id);
}

inline constexpr std::array<ActuatorSite, kSiteCount> all_sites() {
    return {ActuatorSite::TipThumb,  ActuatorSite::TipIndex,  ActuatorSite::TipMiddle,
            ActuatorSite::TipRing,   ActuatorSite::TipLittle, ActuatorSite::McpRadial,
            ActuatorSite::McpCenter, ActuatorSite::McpUlnar,  ActuatorSite::Thenar,
            ActuatorSite::Hypothenar};
}

inline std::string_view site_name(ActuatorSite s) {
    switch (s) {
        case ActuatorSite::TipThumb:   return "TipThumb";
        case ActuatorSite::TipIndex:   return "TipIndex";
        case ActuatorSite::TipMiddle:  return "TipMiddle";
        case ActuatorSite::TipRing:    return "TipRing";
        case ActuatorSite::TipLittle:  return "TipLittle";
        case ActuatorSite::McpRadial:  return "McpRadial";
        case ActuatorSite::McpCenter:  return "McpCenter";
        case ActuatorSite::McpUlnar:   return "McpUlnar";
        case ActuatorSite::Thenar:     return "Thenar";
        case ActuatorSite::Hypothenar: return "Hypothenar";
    }
    throw std::logic_error("invalid actuator site");
}

inline std::optional<ActuatorSite> site_from_name(std::string_view name) {
    for (ActuatorSite s : all_sites())
        if (site_name(s) == name) return s;
    return std::nullopt;
}

enum class SiteGroup : uint8_t { Tips, Middle, Bass };

/// Tips = 5 fingertips, Middle = 3 MCP sites, Bass = thenar + hypothenar.
inline constexpr SiteGroup site_group(ActuatorSite s) {
    switch (s) {
        case ActuatorSite::TipThumb:
        case ActuatorSite::TipIndex:
        case ActuatorSite::TipMiddle:
        case ActuatorSite::TipRing:
        case ActuatorSite::TipLittle:
            return SiteGroup::Tips;
        case ActuatorSite::McpRadial:
        case ActuatorSite::McpCenter:
        case ActuatorSite::McpUlnar:
            return SiteGroup::Middle;
        case ActuatorSite::Thenar:
        case ActuatorSite::Hypothenar:
            return SiteGroup::Bass;
    }
    return SiteGroup::Tips;  // unreachable
}

inline constexpr bool is_fingertip(ActuatorSite s) {
    return site_group(s) == SiteGroup::Tips;
}

struct PitchLocation {
    ActuatorSite anchor_a;  // nearest anchor counter-clockwise (at or below)
    ActuatorSite anchor_b;  // nearest anchor clockwise
    double fraction;        // arc position between them, 0 = at anchor_a
};

/// Twelve pitch classes equally spaced on a circle, five of them anchored
/// to fingertip sites; the remaining seven are virtual positions reached
/// through rabbit-illusion interpolation between their neighbours.
class ChromaticCircle {
public:
    /// Default anchoring: C, D#, F, G#, A# on thumb through little finger.
    /// Near-uniform spacing; fully overridable via the mapping profile.
    ChromaticCircle()
        : ChromaticCircle({{0, ActuatorSite::TipThumb},
                           {3, ActuatorSite::TipIndex},
                           {5, ActuatorSite::TipMiddle},
                           {8, ActuatorSite::TipRing},
                           {10, ActuatorSite::TipLittle}}) {}

    explicit ChromaticCircle(
        const std::vector<std::pair<int, ActuatorSite>>& anchors) {
        anchors_.fill(std::nullopt);
        uint16_t seen = 0;
        for (auto& [pc, site] : anchors) {
            if (pc < 0 || pc > 11)
                throw std::invalid_argument("anchor pitch class out of range 0-11");
            if (!is_fingertip(site))
                throw std::invalid_argument("anchor must be a fingertip site");
            if (anchors_[pc])
                throw std::invalid_argument("duplicate anchor pitch class");
            if (seen & (1u << site_id(site)))
                throw std::invalid_argument("duplicate anchor site");
            seen |= (1u << site_id(site));
            anchors_[pc] = site;
        }
        int count = 0;
        for (auto& a : anchors_)
            if (a) ++count;
        if (count < 2) throw std::invalid_argument("circle needs at least 2 anchors");
    }

    std::optional<ActuatorSite> anchor_at(int pitch_class) const {
        return anchors_[((pitch_class % 12) + 12) % 12];
    }

    PitchLocation locate_pitch_class(int pitch_class) const {
        int pc = ((pitch_class % 12) + 12) % 12;
        if (anchors_[pc]) return {*anchors_[pc], *anchors_[pc], 0.0};
        int down = pc, dist_down = 0;
        while (!anchors_[down]) {
            down = (down + 11) % 12;
            ++dist_down;
        }
        int up = pc, dist_up = 0;
        while (!anchors_[up]) {
            up = (up + 1) % 12;
            ++dist_up;
        }
        double span = dist_down + dist_up;
        return {*anchors_[down], *anchors_[up], dist_down / span};
    }

private:
    std::array<std::optional<ActuatorSite>, 12> anchors_;
};

}  // namespace tactile::layout
