#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "thinkdex/errors.hpp"

namespace thinkdex::io {

// Little-endian primitives. The index file format is fixed little-endian
// regardless of host byte order.

inline void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, uint64_t v) {
    put_u32(os, static_cast<uint32_t>(v));
    put_u32(os, static_cast<uint32_t>(v >> 32));
}

inline void put_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

inline void put_string(std::ostream& os, std::string_view s) {
    put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw CorruptIndex("unexpected end of stream");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline uint64_t get_u64(std::istream& is) {
    const uint64_t lo = get_u32(is);
    const uint64_t hi = get_u32(is);
    return lo | (hi << 32);
}

inline double get_f64(std::istream& is) {
    const uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline std::string get_string(std::istream& is) {
    const uint64_t n = get_u64(is);
    if (n > (1ULL << 40)) throw CorruptIndex("implausible string length");
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw CorruptIndex("unexpected end of stream");
    return s;
}

inline void put_u64_vec(std::ostream& os, const std::vector<uint64_t>& v) {
    put_u64(os, v.size());
    for (uint64_t x : v) put_u64(os, x);
}

inline std::vector<uint64_t> get_u64_vec(std::istream& is) {
    const uint64_t n = get_u64(is);
    if (n > (1ULL << 40)) throw CorruptIndex("implausible array length");
    std::vector<uint64_t> v(n);
    for (auto& x : v) x = get_u64(is);
    return v;
}

inline uint64_t fnv1a64_bytes(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a64_bytes(s.data(), s.size(), h);
}

/// Section framing: [name][payload length][payload][fnv64 of payload].
/// Gives deserialize a named unit to blame on corruption.
class SectionWriter {
public:
    SectionWriter(std::ostream& os, std::string name) : os_(os), name_(std::move(name)) {}

    std::ostream& stream() { return buf_; }

    void finish() {
        const std::string payload = buf_.str();
        put_string(os_, name_);
        put_string(os_, payload);
        put_u64(os_, fnv1a64(payload));
    }

private:
    std::ostream& os_;
    std::string name_;
    std::ostringstream buf_;
};

class SectionReader {
public:
    explicit SectionReader(std::istream& is, std::string_view expected) {
        const std::string name = get_string(is);
        if (name != expected)
            throw CorruptIndex("expected section '" + std::string(expected) + "', found '" + name + "'");
        payload_ = get_string(is);
        const uint64_t sum = get_u64(is);
        if (sum != fnv1a64(payload_)) throw CorruptIndex("checksum mismatch in section '" + name + "'");
        stream_.str(payload_);
    }

    std::istream& stream() { return stream_; }

private:
    std::string payload_;
    std::istringstream stream_;
};

/// Streams a file line by line, invoking fn(line_number, line). Line numbers
/// start at 1. Handles trailing newline-less final lines; strips one \r.
inline void for_each_line(const std::string& path,
                          const std::function<void(size_t, std::string_view)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileMissing(path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view v = line;
        if (!v.empty() && v.back() == '\r') v.remove_suffix(1);
        fn(line_no, v);
    }
}

inline uint64_t file_size_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FileMissing(path);
    return static_cast<uint64_t>(in.tellg());
}

}  // namespace thinkdex::io
