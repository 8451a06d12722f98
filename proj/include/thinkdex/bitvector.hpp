#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "thinkdex/io.hpp"

namespace thinkdex {

/// Plain bitvector with O(1) rank. 512-bit superblocks carry cumulative
/// counts; 64-bit blocks carry u16 offsets within the superblock.
class BitVector {
public:
    BitVector() = default;

    explicit BitVector(uint64_t n) : n_(n), words_((n + 63) / 64, 0) {}

    void set(uint64_t i) { words_[i >> 6] |= (1ULL << (i & 63)); }

    bool get(uint64_t i) const { return (words_[i >> 6] >> (i & 63)) & 1; }

    uint64_t size() const { return n_; }

    /// Call once after all set() calls; rank is undefined before this.
    void build_rank() {
        const size_t n_words = words_.size();
        super_.assign((n_words + 7) / 8, 0);
        intra_.assign(n_words, 0);
        uint64_t total = 0;
        uint16_t in_super = 0;
        for (size_t w = 0; w < n_words; ++w) {
            if (w % 8 == 0) {
                super_[w / 8] = total;
                in_super = 0;
            }
            intra_[w] = in_super;
            const int pc = std::popcount(words_[w]);
            in_super = static_cast<uint16_t>(in_super + pc);
            total += static_cast<uint64_t>(pc);
        }
        ones_ = total;
    }

    /// Number of set bits in [0, i). i may equal size().
    uint64_t rank1(uint64_t i) const {
        const uint64_t w = i >> 6;
        if (w >= words_.size()) return ones_;
        uint64_t r = super_[w >> 3] + intra_[w];
        const uint64_t rem = i & 63;
        if (rem) r += std::popcount(words_[w] & ((1ULL << rem) - 1));
        return r;
    }

    uint64_t rank0(uint64_t i) const { return i - rank1(i); }

    uint64_t ones() const { return ones_; }

    void serialize(std::ostream& os) const {
        io::put_u64(os, n_);
        io::put_u64(os, words_.size());
        for (uint64_t w : words_) io::put_u64(os, w);
    }

    static BitVector deserialize(std::istream& is) {
        BitVector bv;
        bv.n_ = io::get_u64(is);
        const uint64_t nw = io::get_u64(is);
        if (nw != (bv.n_ + 63) / 64) throw CorruptIndex("bitvector word count mismatch");
        bv.words_.resize(nw);
        for (auto& w : bv.words_) w = io::get_u64(is);
        bv.build_rank();
        return bv;
    }

    uint64_t byte_footprint() const {
        return words_.size() * 8 + super_.size() * 8 + intra_.size() * 2;
    }

private:
    uint64_t n_ = 0;
    uint64_t ones_ = 0;
    std::vector<uint64_t> words_;
    std::vector<uint64_t> super_;
    std::vector<uint16_t> intra_;
};

}  // namespace thinkdex
