#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "tactile/mapping.hpp"

namespace tactile::timeline {

using layout::ActuatorSite;
using mapping::HapticEvent;
using mapping::HapticTimeline;

struct DeviceCommand {
    double t = 0.0;  // seconds
    ActuatorSite site = ActuatorSite::TipThumb;
    uint8_t intensity = 0;  // 0 means off

    bool operator==(const DeviceCommand&) const = default;
};

/// Collapses overlapping gestures per site into one command stream: at
/// any instant a site's commanded level is the maximum over its active
/// events. Commands are emitted only at change points and every touched
/// site ends at 0.
inline std::vector<DeviceCommand> arbitrate(const HapticTimeline& timeline) {
    std::vector<DeviceCommand> out;
    for (int id = 0; id < layout::kSiteCount; ++id) {
        auto site = layout::site_from_id((uint8_t)id);
        std::vector<const HapticEvent*> site_events;
        for (const auto& e : timeline.events)
            if (e.site == site) site_events.push_back(&e);
        if (site_events.empty()) continue;

        std::vector<double> points;
        points.reserve(site_events.size() * 2);
        for (auto* e : site_events) {
            points.push_back(e->t_on);
            points.push_back(e->t_off());
        }
        std::sort(points.begin(), points.end());
        points.erase(std::unique(points.begin(), points.end()), points.end());

        int level = 0;
        for (double t : points) {
            int next = 0;
            for (auto* e : site_events)
                if (e->t_on <= t && t < e->t_off()) next = std::max(next, (int)e->intensity);
            if (next != level) {
                out.push_back({t, site, (uint8_t)next});
                level = next;
            }
        }
        // active-interval semantics guarantee level 0 after the last point
    }
    std::sort(out.begin(), out.end(), [](const DeviceCommand& a, const DeviceCommand& b) {
        if (a.t != b.t) return a.t < b.t;
        return layout::site_id(a.site) < layout::site_id(b.site);
    });
    return out;
}

/// Output sink for device commands. One playback owns a backend
/// exclusively for its whole run.
class Backend {
public:
    virtual ~Backend() = default;
    /// Returns false on an unrecoverable write failure.
    virtual bool write(ActuatorSite site, uint8_t intensity) = 0;
};

class Clock {
public:
    virtual ~Clock() = default;
    virtual void sleep_until(double t) = 0;
    virtual double now() = 0;
};

/// Clock whose time jumps instantly to whatever is waited for; playback
/// under it is deterministic with zero lateness.
class VirtualClock : public Clock {
public:
    void sleep_until(double t) override { now_ = std::max(now_, t); }
    double now() override { return now_; }

private:
    double now_ = 0.0;
};

class SteadyClock : public Clock {
public:
    SteadyClock() : start_(std::chrono::steady_clock::now()) {}
    void sleep_until(double t) override {
        std::this_thread::sleep_until(start_ + std::chrono::duration<double>(t));
    }
    double now() override {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

struct PlaybackReport {
    uint64_t commands_emitted = 0;
    double max_lateness_s = 0.0;
    bool cancelled = false;
};

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Delivers each command when the clock reaches its time. On a backend
/// failure all ten sites are commanded to 0 before the error surfaces.
inline PlaybackReport playback(const std::vector<DeviceCommand>& commands, Clock& clock,
                               Backend& backend, const std::atomic<bool>* cancel = nullptr) {
    PlaybackReport report;
    auto shutoff = [&] {
        for (auto site : layout::all_sites()) backend.write(site, 0);
    };
    for (const auto& cmd : commands) {
        if (cancel && cancel->load()) {
            shutoff();
            report.cancelled = true;
            return report;
        }
        clock.sleep_until(cmd.t);
        double late = clock.now() - cmd.t;
        report.max_lateness_s = std::max(report.max_lateness_s, late);
        if (!backend.write(cmd.site, cmd.intensity)) {
            shutoff();
            throw BackendError("backend write failed during playback");
        }
        report.commands_emitted++;
    }
    return report;
}

}  // namespace tactile::timeline
