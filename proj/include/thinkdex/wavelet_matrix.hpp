#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <utility>
#include <vector>

#include "thinkdex/bitvector.hpp"

namespace thinkdex {

/// Wavelet matrix over an integer sequence: access, rank, and an
/// output-sensitive distinct-symbols-in-range query, all in O(width).
class WaveletMatrix {
public:
    WaveletMatrix() = default;

    WaveletMatrix(const std::vector<uint32_t>& data, uint32_t max_value) {
        n_ = data.size();
        width_ = std::max<uint32_t>(1, std::bit_width(max_value));
        levels_.reserve(width_);
        zeros_.reserve(width_);
        std::vector<uint32_t> cur = data;
        std::vector<uint32_t> nxt(cur.size());
        for (uint32_t level = 0; level < width_; ++level) {
            const uint32_t shift = width_ - 1 - level;
            BitVector bv(n_);
            uint64_t zero_count = 0;
            for (uint64_t i = 0; i < n_; ++i) {
                if ((cur[i] >> shift) & 1)
                    bv.set(i);
                else
                    ++zero_count;
            }
            bv.build_rank();
            uint64_t z = 0, o = zero_count;
            for (uint64_t i = 0; i < n_; ++i) {
                if ((cur[i] >> shift) & 1)
                    nxt[o++] = cur[i];
                else
                    nxt[z++] = cur[i];
            }
            cur.swap(nxt);
            levels_.push_back(std::move(bv));
            zeros_.push_back(zero_count);
        }
    }

    uint64_t size() const { return n_; }
    uint32_t width() const { return width_; }

    uint32_t access(uint64_t i) const {
        uint32_t sym = 0;
        for (uint32_t l = 0; l < width_; ++l) {
            const bool bit = levels_[l].get(i);
            sym = (sym << 1) | static_cast<uint32_t>(bit);
            i = bit ? zeros_[l] + levels_[l].rank1(i) : levels_[l].rank0(i);
        }
        return sym;
    }

    /// Occurrences of c in [0, i).
    uint64_t rank(uint32_t c, uint64_t i) const {
        uint64_t s = 0, e = i;
        for (uint32_t l = 0; l < width_; ++l) {
            if ((c >> (width_ - 1 - l)) & 1) {
                s = zeros_[l] + levels_[l].rank1(s);
                e = zeros_[l] + levels_[l].rank1(e);
            } else {
                s = levels_[l].rank0(s);
                e = levels_[l].rank0(e);
            }
        }
        return e - s;
    }

    /// (rank(c, lo), rank(c, hi)) in one traversal.
    std::pair<uint64_t, uint64_t> rank2(uint32_t c, uint64_t lo, uint64_t hi) const {
        uint64_t s = 0, a = lo, b = hi;
        for (uint32_t l = 0; l < width_; ++l) {
            if ((c >> (width_ - 1 - l)) & 1) {
                s = zeros_[l] + levels_[l].rank1(s);
                a = zeros_[l] + levels_[l].rank1(a);
                b = zeros_[l] + levels_[l].rank1(b);
            } else {
                s = levels_[l].rank0(s);
                a = levels_[l].rank0(a);
                b = levels_[l].rank0(b);
            }
        }
        return {a - s, b - s};
    }

    /// Invokes emit(symbol, count) for every distinct symbol in [lo, hi),
    /// in ascending symbol order. Cost O(distinct * width).
    void range_distinct(uint64_t lo, uint64_t hi, const std::function<void(uint32_t, uint64_t)>& emit) const {
        if (lo < hi) range_distinct_rec(0, lo, hi, 0, emit);
    }

    void serialize(std::ostream& os) const {
        io::put_u64(os, n_);
        io::put_u32(os, width_);
        io::put_u64_vec(os, zeros_);
        for (const auto& bv : levels_) bv.serialize(os);
    }

    static WaveletMatrix deserialize(std::istream& is) {
        WaveletMatrix wm;
        wm.n_ = io::get_u64(is);
        wm.width_ = io::get_u32(is);
        if (wm.width_ == 0 || wm.width_ > 32) throw CorruptIndex("wavelet width out of range");
        wm.zeros_ = io::get_u64_vec(is);
        if (wm.zeros_.size() != wm.width_) throw CorruptIndex("wavelet level count mismatch");
        wm.levels_.reserve(wm.width_);
        for (uint32_t l = 0; l < wm.width_; ++l) wm.levels_.push_back(BitVector::deserialize(is));
        return wm;
    }

    uint64_t byte_footprint() const {
        uint64_t total = zeros_.size() * 8;
        for (const auto& bv : levels_) total += bv.byte_footprint();
        return total;
    }

private:
    void range_distinct_rec(uint32_t level, uint64_t lo, uint64_t hi, uint32_t prefix,
                            const std::function<void(uint32_t, uint64_t)>& emit) const {
        if (level == width_) {
            emit(prefix, hi - lo);
            return;
        }
        const uint64_t lo0 = levels_[level].rank0(lo);
        const uint64_t hi0 = levels_[level].rank0(hi);
        if (hi0 > lo0) range_distinct_rec(level + 1, lo0, hi0, prefix << 1, emit);
        const uint64_t lo1 = zeros_[level] + (lo - lo0);
        const uint64_t hi1 = zeros_[level] + (hi - hi0);
        if (hi1 > lo1) range_distinct_rec(level + 1, lo1, hi1, (prefix << 1) | 1, emit);
    }

    uint64_t n_ = 0;
    uint32_t width_ = 0;
    std::vector<BitVector> levels_;
    std::vector<uint64_t> zeros_;
};

}  // namespace thinkdex
