#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "thinkdex/errors.hpp"

namespace thinkdex::unicode {

struct NfcDecomp {
    uint32_t cp;
    uint32_t a;
    uint32_t b;  // 0 for singleton decompositions
};
struct NfcCombining {
    uint32_t cp;
    uint8_t ccc;
};
struct NfcComposite {
    uint64_t key;  // (first << 21) | second
    uint32_t composed;
};

#include "thinkdex/detail/nfc_data.inc"

// ---------------------------------------------------------------------------
// UTF-8 codec
// ---------------------------------------------------------------------------

inline void append_utf8(std::string& out, uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

/// Decodes strict UTF-8. Overlong forms, surrogates, and out-of-range values
/// are rejected; index membership depends on byte-exact strings, so silent
/// replacement is not an option here.
inline std::vector<uint32_t> decode_utf8(std::string_view s) {
    std::vector<uint32_t> out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        uint32_t cp = 0;
        size_t len = 0;
        if (b0 < 0x80) {
            cp = b0;
            len = 1;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            len = 2;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            len = 3;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            len = 4;
        } else {
            throw Utf8Error("invalid lead byte at offset " + std::to_string(i));
        }
        if (i + len > s.size()) throw Utf8Error("truncated sequence at offset " + std::to_string(i));
        for (size_t k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) throw Utf8Error("bad continuation byte at offset " + std::to_string(i + k));
            cp = (cp << 6) | (b & 0x3F);
        }
        static constexpr uint32_t kMinByLen[5] = {0, 0, 0x80, 0x800, 0x10000};
        if (cp < kMinByLen[len]) throw Utf8Error("overlong encoding at offset " + std::to_string(i));
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
            throw Utf8Error("invalid scalar value at offset " + std::to_string(i));
        out.push_back(cp);
        i += len;
    }
    return out;
}

inline std::string encode_utf8(const std::vector<uint32_t>& cps) {
    std::string out;
    out.reserve(cps.size());
    for (uint32_t cp : cps) append_utf8(out, cp);
    return out;
}

// ---------------------------------------------------------------------------
// Whitespace classification
//
// The no-break spaces (U+00A0, U+202F) are deliberately not breaking: the
// docid canonical form uses U+00A0 to escape ", " inside entity fields, and
// the tokenizer must keep such fields as single tokens.
// ---------------------------------------------------------------------------

inline bool is_breaking_space(uint32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
        case 0x20: case 0x85: case 0x1680:
        case 0x2028: case 0x2029: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// ---------------------------------------------------------------------------
// NFC normalization (canonical decomposition, canonical ordering, canonical
// composition; Hangul handled algorithmically)
// ---------------------------------------------------------------------------

namespace detail {

constexpr uint32_t kHangulSBase = 0xAC00;
constexpr uint32_t kHangulLBase = 0x1100;
constexpr uint32_t kHangulVBase = 0x1161;
constexpr uint32_t kHangulTBase = 0x11A7;
constexpr uint32_t kHangulLCount = 19;
constexpr uint32_t kHangulVCount = 21;
constexpr uint32_t kHangulTCount = 28;
constexpr uint32_t kHangulNCount = kHangulVCount * kHangulTCount;
constexpr uint32_t kHangulSCount = kHangulLCount * kHangulNCount;

inline uint8_t combining_class(uint32_t cp) {
    const auto* begin = std::begin(kNfcCombining);
    const auto* end = std::end(kNfcCombining);
    const auto* it = std::lower_bound(begin, end, cp,
                                      [](const NfcCombining& e, uint32_t v) { return e.cp < v; });
    return (it != end && it->cp == cp) ? it->ccc : 0;
}

inline const NfcDecomp* find_decomp(uint32_t cp) {
    const auto* begin = std::begin(kNfcDecomp);
    const auto* end = std::end(kNfcDecomp);
    const auto* it = std::lower_bound(begin, end, cp,
                                      [](const NfcDecomp& e, uint32_t v) { return e.cp < v; });
    return (it != end && it->cp == cp) ? it : nullptr;
}

inline uint32_t find_composite(uint32_t a, uint32_t b) {
    // Hangul LV / LVT composition
    if (a >= kHangulLBase && a < kHangulLBase + kHangulLCount && b >= kHangulVBase &&
        b < kHangulVBase + kHangulVCount) {
        return kHangulSBase + ((a - kHangulLBase) * kHangulVCount + (b - kHangulVBase)) * kHangulTCount;
    }
    if (a >= kHangulSBase && a < kHangulSBase + kHangulSCount && (a - kHangulSBase) % kHangulTCount == 0 &&
        b > kHangulTBase && b < kHangulTBase + kHangulTCount) {
        return a + (b - kHangulTBase);
    }
    const uint64_t key = (static_cast<uint64_t>(a) << 21) | b;
    const auto* begin = std::begin(kNfcComposite);
    const auto* end = std::end(kNfcComposite);
    const auto* it = std::lower_bound(begin, end, key,
                                      [](const NfcComposite& e, uint64_t v) { return e.key < v; });
    return (it != end && it->key == key) ? it->composed : 0;
}

inline void decompose_into(uint32_t cp, std::vector<uint32_t>& out) {
    if (cp >= kHangulSBase && cp < kHangulSBase + kHangulSCount) {
        const uint32_t s = cp - kHangulSBase;
        out.push_back(kHangulLBase + s / kHangulNCount);
        out.push_back(kHangulVBase + (s % kHangulNCount) / kHangulTCount);
        const uint32_t t = s % kHangulTCount;
        if (t != 0) out.push_back(kHangulTBase + t);
        return;
    }
    if (const NfcDecomp* d = find_decomp(cp)) {
        decompose_into(d->a, out);
        if (d->b != 0) decompose_into(d->b, out);
        return;
    }
    out.push_back(cp);
}

}  // namespace detail

inline std::vector<uint32_t> nfc(const std::vector<uint32_t>& input) {
    using namespace detail;

    // 1. canonical decomposition
    std::vector<uint32_t> buf;
    buf.reserve(input.size() + 8);
    for (uint32_t cp : input) decompose_into(cp, buf);

    // 2. canonical ordering of combining marks (stable)
    for (size_t i = 1; i < buf.size(); ++i) {
        const uint8_t ccc = combining_class(buf[i]);
        if (ccc == 0) continue;
        size_t j = i;
        while (j > 0) {
            const uint8_t prev = combining_class(buf[j - 1]);
            if (prev == 0 || prev <= ccc) break;
            std::swap(buf[j - 1], buf[j]);
            --j;
        }
    }

    // 3. canonical composition
    if (buf.empty()) return buf;
    std::vector<uint32_t> out;
    out.reserve(buf.size());
    // Index into `out` of the last starter, or npos while none seen.
    size_t starter = std::string::npos;
    uint8_t last_ccc = 0;
    for (uint32_t cp : buf) {
        const uint8_t ccc = combining_class(cp);
        if (starter != std::string::npos) {
            const bool blocked = (last_ccc != 0 && last_ccc >= ccc) || (last_ccc == 0 && ccc == 0 && out.size() > starter + 1);
            if (!blocked) {
                if (uint32_t composed = find_composite(out[starter], cp)) {
                    out[starter] = composed;
                    continue;  // last_ccc unchanged by design: the mark was absorbed
                }
            }
        }
        if (ccc == 0) {
            starter = out.size();
        }
        last_ccc = ccc;
        out.push_back(cp);
    }
    return out;
}

inline std::string nfc(std::string_view utf8) { return encode_utf8(nfc(decode_utf8(utf8))); }

}  // namespace thinkdex::unicode
