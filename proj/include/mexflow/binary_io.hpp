#pragma once

// Little-endian primitives shared by the on-disk formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mex::io {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void write_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

inline void write_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void write_f32(std::ostream& out, float v) { write_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void write_magic(std::ostream& out, std::string_view magic) { out.write(magic.data(), static_cast<std::streamsize>(magic.size())); }

class Reader {
public:
    Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    std::uint8_t u8() {
        unsigned char b[1];
        take(b, 1, "u8");
        return b[0];
    }
    std::uint32_t u32() {
        unsigned char b[4];
        take(b, 4, "u32");
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        const std::uint64_t hi = u32();
        return lo | (hi << 32);
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    void expect_magic(std::string_view magic) {
        std::string got(magic.size(), '\0');
        take(reinterpret_cast<unsigned char*>(got.data()), got.size(), "magic");
        if (got != magic) fail("bad magic, expected '" + std::string(magic) + "'");
    }

    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) fail("trailing bytes after payload");
    }

    std::uint64_t offset() const { return offset_; }
    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError(source_ + ": " + what + " at byte offset " + std::to_string(offset_));
    }

private:
    void take(unsigned char* dst, std::size_t n, const char* what) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) fail(std::string("truncated while reading ") + what);
        offset_ += n;
    }

    std::istream& in_;
    std::string source_;
    std::uint64_t offset_ = 0;
};

}  // namespace mex::io
