#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace thinkdex {

/// Suffix array by prefix doubling with counting sort, O(n log n). Suffix
/// order is plain lexicographic; callers wanting the standard FM-index
/// layout append a unique smallest sentinel first.
inline std::vector<uint32_t> build_suffix_array(const std::vector<uint32_t>& text) {
    const uint32_t n = static_cast<uint32_t>(text.size());
    if (n == 0) return {};
    if (n == 1) return {0};

    uint32_t max_sym = 0;
    for (uint32_t c : text) max_sym = std::max(max_sym, c);
    const uint32_t buckets = std::max(max_sym + 1, n + 1);

    std::vector<uint32_t> sa(n), rnk(n), tmp(n), order(n);
    std::vector<uint32_t> cnt(buckets + 1);

    for (uint32_t i = 0; i < n; ++i) rnk[i] = text[i];
    for (uint32_t i = 0; i < n; ++i) ++cnt[rnk[i] + 1];
    for (uint32_t i = 1; i <= buckets; ++i) cnt[i] += cnt[i - 1];
    for (uint32_t i = 0; i < n; ++i) sa[cnt[rnk[i]]++] = i;

    for (uint32_t k = 1; k < n; k <<= 1) {
        // order[] = indices sorted by second key (rank at i+k, absent = least)
        uint32_t p = 0;
        for (uint32_t i = n - k; i < n; ++i) order[p++] = i;
        for (uint32_t i = 0; i < n; ++i)
            if (sa[i] >= k) order[p++] = sa[i] - k;

        // stable counting sort by first key
        std::fill(cnt.begin(), cnt.end(), 0);
        for (uint32_t i = 0; i < n; ++i) ++cnt[rnk[i] + 1];
        for (uint32_t i = 1; i <= buckets; ++i) cnt[i] += cnt[i - 1];
        for (uint32_t i = 0; i < n; ++i) sa[cnt[rnk[order[i]]]++] = order[i];

        tmp[sa[0]] = 0;
        uint32_t r = 0;
        for (uint32_t i = 1; i < n; ++i) {
            const uint32_t a = sa[i - 1], b = sa[i];
            const uint32_t a2 = a + k < n ? rnk[a + k] + 1 : 0;
            const uint32_t b2 = b + k < n ? rnk[b + k] + 1 : 0;
            if (rnk[a] != rnk[b] || a2 != b2) ++r;
            tmp[b] = r;
        }
        rnk.swap(tmp);
        if (r == n - 1) break;
    }
    return sa;
}

}  // namespace thinkdex
