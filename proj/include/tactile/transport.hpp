#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tactile/layout.hpp"
#include "tactile/midi.hpp"
#include "tactile/timeline.hpp"

namespace tactile::transport {

using layout::ActuatorSite;
using timeline::DeviceCommand;

/// CRC-8, polynomial 0x07, init 0x00, no reflection or final xor.
inline uint8_t crc8(std::span<const uint8_t> data) {
    uint8_t crc = 0x00;
    for (uint8_t b : data) {
        crc ^= b;
        for (int i = 0; i < 8; ++i)
            crc = (crc & 0x80) ? (uint8_t)((crc << 1) ^ 0x07) : (uint8_t)(crc << 1);
    }
    return crc;
}

inline constexpr uint8_t kFrameSync = 0xA5;
inline constexpr size_t kFrameSize = 4;

/// Frame layout: [0xA5, site_id, intensity, crc8(site_id, intensity)].
inline std::array<uint8_t, kFrameSize> encode_frame(ActuatorSite site, uint8_t intensity) {
    uint8_t id = layout::site_id(site);
    uint8_t payload[2] = {id, intensity};
    return {kFrameSync, id, intensity, crc8(payload)};
}

struct Frame {
    ActuatorSite site;
    uint8_t intensity;
};

inline std::optional<Frame> decode_frame(std::span<const uint8_t, kFrameSize> bytes) {
    if (bytes[0] != kFrameSync || bytes[1] >= layout::kSiteCount) return std::nullopt;
    uint8_t payload[2] = {bytes[1], bytes[2]};
    if (crc8(payload) != bytes[3]) return std::nullopt;
    return Frame{layout::site_from_id(bytes[1]), bytes[2]};
}

/// Streaming frame scanner. Resynchronizes on the next sync byte that
/// heads a CRC-valid frame; everything else is counted as noise.
class FrameDecoder {
public:
    std::vector<Frame> push(std::span<const uint8_t> bytes) {
        buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
        std::vector<Frame> out;
        while (buffer_.size() >= kFrameSize) {
            if (buffer_[0] != kFrameSync) {
                buffer_.pop_front();
                noise_bytes_++;
                continue;
            }
            std::array<uint8_t, kFrameSize> candidate = {buffer_[0], buffer_[1], buffer_[2],
                                                         buffer_[3]};
            if (auto f = decode_frame(candidate)) {
                out.push_back(*f);
                buffer_.erase(buffer_.begin(), buffer_.begin() + kFrameSize);
            } else {
                buffer_.pop_front();
                noise_bytes_++;
            }
        }
        return out;
    }

    uint64_t noise_bytes() const { return noise_bytes_; }

private:
    std::deque<uint8_t> buffer_;
    uint64_t noise_bytes_ = 0;
};

/// Deterministic event log: `#tactile-log v1` header, then one JSON
/// object per line with keys t, site, intensity in that order and
/// 6-decimal fixed-point seconds.
inline std::string write_log(const std::vector<DeviceCommand>& commands) {
    std::string out = "#tactile-log v1\n";
    char line[96];
    for (const auto& cmd : commands) {
        std::snprintf(line, sizeof(line), "{\"t\":%.6f,\"site\":\"%s\",\"intensity\":%d}\n",
                      cmd.t, std::string(layout::site_name(cmd.site)).c_str(),
                      (int)cmd.intensity);
        out += line;
    }
    return out;
}

class LogParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads a v1 event log back into commands (used by `identify` and tests).
inline std::vector<DeviceCommand> read_log(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "#tactile-log v1")
        throw LogParseError("missing #tactile-log v1 header");
    std::vector<DeviceCommand> out;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        double t;
        char site_buf[32];
        int intensity;
        if (std::sscanf(line.c_str(), "{\"t\":%lf,\"site\":\"%31[^\"]\",\"intensity\":%d}", &t,
                        site_buf, &intensity) != 3)
            throw LogParseError("malformed log line " + std::to_string(lineno));
        auto site = layout::site_from_name(site_buf);
        if (!site || intensity < 0 || intensity > 255)
            throw LogParseError("invalid site or intensity on line " + std::to_string(lineno));
        out.push_back({t, *site, (uint8_t)intensity});
    }
    return out;
}

/// Null sink; counts writes so tests can assert delivery.
class NullBackend : public timeline::Backend {
public:
    bool write(ActuatorSite, uint8_t) override {
        writes_++;
        return true;
    }
    uint64_t writes() const { return writes_; }

private:
    uint64_t writes_ = 0;
};

/// Captures commands in memory, stamped with the emission order.
class CaptureBackend : public timeline::Backend {
public:
    bool write(ActuatorSite site, uint8_t intensity) override {
        captured_.push_back({site, intensity});
        return true;
    }
    const std::vector<Frame>& captured() const { return captured_; }

private:
    std::vector<Frame> captured_;
};

/// Writes wire frames to any ostream (a serial device file or a capture
/// buffer). The stream must already be configured (115200 8N1 for a
/// real port; see SerialPort below).
class FrameStreamBackend : public timeline::Backend {
public:
    explicit FrameStreamBackend(std::ostream& out) : out_(out) {}
    bool write(ActuatorSite site, uint8_t intensity) override {
        auto frame = encode_frame(site, intensity);
        out_.write(reinterpret_cast<const char*>(frame.data()), frame.size());
        out_.flush();
        return out_.good();
    }

private:
    std::ostream& out_;
};

/// Reads byte chunks from a MIDI source stream (serial port file or
/// stdin) and feeds them to a decoder callback until end-of-stream.
/// Returns total bytes delivered.
template <typename ChunkFn>
uint64_t read_midi_source(std::istream& in, ChunkFn&& on_chunk,
                          const std::atomic<bool>* cancel = nullptr) {
    uint64_t total = 0;
    char buf[256];
    while (!(cancel && cancel->load())) {
        in.read(buf, sizeof(buf));
        std::streamsize n = in.gcount();
        if (n <= 0) break;
        on_chunk(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(buf), (size_t)n));
        total += (uint64_t)n;
        if (in.eof()) break;
    }
    return total;
}

}  // namespace tactile::transport
