#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "hfm/errors.hpp"

namespace hfm::io {

// Little-endian primitive readers/writers with byte-offset tracking so format
// errors can point at the exact location in the stream.
class ByteWriter {
public:
    explicit ByteWriter(std::ostream& out) : out_(out) {}

    void magic(const char tag[4]) { raw(tag, 4); }

    void u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
        raw(reinterpret_cast<const char*>(b), 4);
    }

    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    void f64(double v) {
        std::uint64_t u = std::bit_cast<std::uint64_t>(v);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
        raw(reinterpret_cast<const char*>(b), 8);
    }

    std::size_t offset() const { return offset_; }

private:
    void raw(const char* p, std::size_t n) {
        out_.write(p, static_cast<std::streamsize>(n));
        offset_ += n;
    }

    std::ostream& out_;
    std::size_t offset_ = 0;
};

class ByteReader {
public:
    explicit ByteReader(std::istream& in) : in_(in) {}

    void magic(const char expect[4], const std::string& what) {
        std::size_t at = offset_;
        char got[4];
        raw(got, 4, what);
        if (std::memcmp(got, expect, 4) != 0)
            throw FormatError(what + ": bad magic", at);
    }

    std::uint32_t u32(const std::string& what) {
        unsigned char b[4];
        raw(reinterpret_cast<char*>(b), 4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }

    float f32(const std::string& what) { return std::bit_cast<float>(u32(what)); }

    double f64(const std::string& what) {
        unsigned char b[8];
        raw(reinterpret_cast<char*>(b), 8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return std::bit_cast<double>(v);
    }

    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

    std::size_t offset() const { return offset_; }

private:
    void raw(char* p, std::size_t n, const std::string& what) {
        in_.read(p, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw FormatError(what + ": truncated", offset_);
        offset_ += n;
    }

    std::istream& in_;
    std::size_t offset_ = 0;
};

} // namespace hfm::io
