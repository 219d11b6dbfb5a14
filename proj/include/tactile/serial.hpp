#pragma once

// POSIX serial port configured for the firmware link: 115200 baud, 8N1, raw.

#include <fcntl.h>
#include <termios.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>
#include <string>

namespace tactile::transport {

class SerialError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SerialPort {
public:
    explicit SerialPort(const std::string& device) {
        fd_ = ::open(device.c_str(), O_RDWR | O_NOCTTY);
        if (fd_ < 0)
            throw SerialError("cannot open " + device + ": " + std::strerror(errno));
        termios tio{};
        if (tcgetattr(fd_, &tio) != 0) {
            ::close(fd_);
            throw SerialError("tcgetattr failed for " + device);
        }
        cfmakeraw(&tio);
        cfsetispeed(&tio, B115200);
        cfsetospeed(&tio, B115200);
        tio.c_cflag &= ~(PARENB | CSTOPB | CSIZE);
        tio.c_cflag |= CS8 | CLOCAL | CREAD;
        tio.c_cc[VMIN] = 1;
        tio.c_cc[VTIME] = 0;
        if (tcsetattr(fd_, TCSANOW, &tio) != 0) {
            ::close(fd_);
            throw SerialError("tcsetattr failed for " + device);
        }
    }

    SerialPort(const SerialPort&) = delete;
    SerialPort& operator=(const SerialPort&) = delete;
    SerialPort(SerialPort&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

    ~SerialPort() {
        if (fd_ >= 0) ::close(fd_);
    }

    bool write_bytes(const uint8_t* data, size_t n) {
        while (n > 0) {
            ssize_t w = ::write(fd_, data, n);
            if (w < 0) {
                if (errno == EINTR) continue;
                return false;
            }
            data += w;
            n -= (size_t)w;
        }
        return true;
    }

    ssize_t read_bytes(uint8_t* data, size_t n) { return ::read(fd_, data, n); }

    int fd() const { return fd_; }

private:
    int fd_ = -1;
};

}  // namespace tactile::transport
