#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "thinkdex/corpus.hpp"
#include "thinkdex/errors.hpp"
#include "thinkdex/io.hpp"
#include "thinkdex/suffix_array.hpp"
#include "thinkdex/tokenizer.hpp"
#include "thinkdex/wavelet_matrix.hpp"

namespace thinkdex {

/// Half-open row interval of a backward search. hi - lo is the number of
/// occurrences of the consumed prefix.
struct SearchState {
    uint64_t lo = 0;
    uint64_t hi = 0;
    uint32_t depth = 0;

    uint64_t size() const { return hi - lo; }
    bool empty() const { return hi == lo; }
    bool operator==(const SearchState&) const = default;
};

enum class AllowedNextMode : uint32_t {
    /// Distinct-symbol query on the wavelet matrix; output-sensitive, cost
    /// independent of interval size.
    wavelet = 0,
    /// Scan of the BWT interval skipping run-to-run; needs the run-start
    /// table, cost proportional to runs in the interval.
    run_scan = 1,
};

struct FmBuildConfig {
    uint32_t sa_sample_rate = 32;
    AllowedNextMode allowed_mode = AllowedNextMode::wavelet;
};

/// FM-index over the corpus docid token sequences. Each distinct canonical
/// docid is encoded, REVERSED, and separator-terminated before indexing, so
/// forward prefix extension is a native backward-search step. Immutable
/// after build; all queries are const and safe under concurrent readers.
///
/// Internally symbols are token id + 1 with a single 0 sentinel at the end
/// of the text, keeping suffix order well defined. The separator is not
/// extendable through the public interface; it surfaces only through
/// allowed_next as the end-of-docid signal.
class FmIndex {
public:
    FmIndex() = default;

    static FmIndex build(const Corpus& corpus, const Vocabulary& vocab, FmBuildConfig cfg = {}) {
        if (corpus.docids().empty()) throw EmptyCorpus("no docid sequences to index");
        if (vocab.size() >= (1ULL << 31)) throw AlphabetOverflow(std::to_string(vocab.size()));
        if (cfg.sa_sample_rate == 0) cfg.sa_sample_rate = 1;

        FmIndex ix;
        ix.sa_rate_ = cfg.sa_sample_rate;
        ix.allowed_mode_ = cfg.allowed_mode;
        ix.vocab_ = vocab;
        ix.vocab_hash_ = vocab.hash();

        std::vector<uint32_t> text;
        for (std::string_view docid : corpus.docids()) {
            TokenSeq seq = vocab.encode(docid);
            for (TokenId id : seq)
                if (id == kUnknownId)
                    throw InvariantViolation("docid tokenizes to <unk>; vocabulary not built from this corpus");
            ix.starts_.push_back(text.size());
            for (auto it = seq.rbegin(); it != seq.rend(); ++it) text.push_back(*it + 1);
            text.push_back(kSeparatorId + 1);
            ix.docids_.emplace_back(docid);
        }
        ix.text_len_ = text.size();
        text.push_back(0);  // sentinel, unique smallest

        const std::vector<uint32_t> sa = build_suffix_array(text);
        const uint64_t n = text.size();
        std::vector<uint32_t> bwt(n);
        for (uint64_t i = 0; i < n; ++i) bwt[i] = text[(sa[i] + n - 1) % n];

        const uint32_t max_internal = static_cast<uint32_t>(vocab.size());
        ix.bwt_ = WaveletMatrix(bwt, max_internal);

        ix.C_.assign(static_cast<size_t>(max_internal) + 2, 0);
        for (uint32_t c : text) ++ix.C_[c + 1];
        for (size_t i = 1; i < ix.C_.size(); ++i) ix.C_[i] += ix.C_[i - 1];

        ix.sampled_ = BitVector(n);
        for (uint64_t i = 0; i < n; ++i) {
            if (sa[i] % ix.sa_rate_ == 0) ix.sampled_.set(i);
        }
        ix.sampled_.build_rank();
        for (uint64_t i = 0; i < n; ++i)
            if (ix.sampled_.get(i)) ix.samples_.push_back(sa[i]);

        if (ix.allowed_mode_ == AllowedNextMode::run_scan) ix.build_runs(bwt);
        return ix;
    }

    // -- basic queries ------------------------------------------------------

    uint64_t text_length() const { return text_len_; }
    uint64_t docid_count() const { return docids_.size(); }
    const Vocabulary& vocabulary() const { return vocab_; }
    uint64_t vocab_hash() const { return vocab_hash_; }
    uint32_t sa_sample_rate() const { return sa_rate_; }
    AllowedNextMode allowed_mode() const { return allowed_mode_; }
    const std::string& docid_at(uint64_t ordinal) const { return docids_[ordinal]; }

    SearchState start_state() const {
        // Row 0 is always the sentinel suffix; excluding it makes the
        // interval width equal the text length.
        return SearchState{1, text_len_ + 1, 0};
    }

    std::optional<SearchState> extend(const SearchState& s, TokenId t) const {
        if (t >= vocab_.size()) throw InvalidTokenId(std::to_string(t));
        if (t == kSeparatorId) throw InvalidTokenId("separator is not extendable");
        const uint32_t c = t + 1;
        const auto [rlo, rhi] = bwt_.rank2(c, s.lo, s.hi);
        if (rlo == rhi) return std::nullopt;
        return SearchState{C_[c] + rlo, C_[c] + rhi, s.depth + 1};
    }

    /// Exactly the token ids t for which the consumed prefix extends toward
    /// an indexed sequence, ascending. At depth 0 this is the set of first
    /// tokens of indexed sequences (the separator-anchored interval); deeper
    /// states are start-anchored by construction because the start marker
    /// occurs only at sequence heads. The separator id appears when an
    /// indexed sequence ends at this prefix; a state whose only continuation
    /// is the separator has consumed a complete docid.
    std::vector<TokenId> allowed_next(const SearchState& s) const {
        if (s.empty()) throw EmptyState("allowed_next on empty interval");
        const uint64_t lo = s.depth == 0 ? C_[1] : s.lo;
        const uint64_t hi = s.depth == 0 ? C_[2] : s.hi;
        std::vector<TokenId> out;
        if (allowed_mode_ == AllowedNextMode::run_scan && !runs_.empty()) {
            collect_run_scan(lo, hi, out);
        } else {
            bwt_.range_distinct(lo, hi, [&](uint32_t internal, uint64_t) {
                const TokenId t = internal <= 1 ? kSeparatorId : internal - 1;
                if (out.empty() || out.back() != t) out.push_back(t);
            });
        }
        return out;
    }

    bool is_complete_docid(const SearchState& s) const {
        if (s.empty() || s.depth == 0) return false;
        // Complete iff every BWT symbol in the interval is separator or
        // sentinel, i.e. no indexed sequence continues past the prefix.
        bool complete = true;
        bwt_.range_distinct(s.lo, s.hi, [&](uint32_t internal, uint64_t) {
            if (internal > 1) complete = false;
        });
        return complete;
    }

    /// Distinct canonical docid strings whose token sequence matches the
    /// consumed pattern. Requires a completed docid (see is_complete_docid).
    std::set<std::string> locate(const SearchState& s) const {
        if (s.empty()) throw EmptyState("locate on empty interval");
        if (!is_complete_docid(s)) throw IncompleteDocid("state does not cover a complete docid sequence");
        std::set<std::string> out;
        for (uint64_t row = s.lo; row < s.hi; ++row) {
            const uint64_t pos = suffix_position(row);
            const auto it = std::upper_bound(starts_.begin(), starts_.end(), pos);
            const uint64_t ordinal = static_cast<uint64_t>(it - starts_.begin()) - 1;
            const uint64_t seq_len = sequence_token_length(ordinal);
            if (seq_len != s.depth)
                throw IncompleteDocid("pattern is end-anchored but not a full docid sequence");
            out.insert(docids_[ordinal]);
        }
        return out;
    }

    /// Distinct canonical docid strings containing an occurrence covered by
    /// the state, capped at `limit`. Unlike locate this accepts incomplete
    /// prefixes; cost is proportional to the interval size.
    std::vector<std::string> docids_in_state(const SearchState& s, size_t limit = SIZE_MAX) const {
        std::vector<std::string> out;
        std::unordered_set<uint64_t> seen;
        for (uint64_t row = s.lo; row < s.hi && out.size() < limit; ++row) {
            const uint64_t pos = suffix_position(row);
            const auto it = std::upper_bound(starts_.begin(), starts_.end(), pos);
            const uint64_t ordinal = static_cast<uint64_t>(it - starts_.begin()) - 1;
            if (seen.insert(ordinal).second) out.push_back(docids_[ordinal]);
        }
        return out;
    }

    /// Total occurrences of the token pattern as a contiguous substring
    /// across all indexed docid sequences.
    uint64_t count(std::span<const TokenId> pattern) const {
        SearchState s = start_state();
        for (TokenId t : pattern) {
            auto next = extend(s, t);
            if (!next) return 0;
            s = *next;
        }
        return s.size();
    }

    // -- serialization ------------------------------------------------------

    static constexpr uint32_t kMagic = 0x58524754;  // "TGRX" little-endian
    static constexpr uint32_t kVersion = 1;

    void serialize(std::ostream& os) const {
        if (docids_.empty()) throw EmptyCorpus("refusing to serialize an empty index");
        io::put_u32(os, kMagic);
        io::put_u32(os, kVersion);
        {
            io::SectionWriter w(os, "vocab");
            vocab_.serialize(w.stream());
            w.finish();
        }
        {
            io::SectionWriter w(os, "params");
            io::put_u32(w.stream(), sa_rate_);
            io::put_u32(w.stream(), static_cast<uint32_t>(allowed_mode_));
            io::put_u64(w.stream(), text_len_);
            io::put_u64(w.stream(), vocab_hash_);
            w.finish();
        }
        {
            io::SectionWriter w(os, "counts");
            io::put_u64_vec(w.stream(), C_);
            w.finish();
        }
        {
            io::SectionWriter w(os, "bwt");
            bwt_.serialize(w.stream());
            w.finish();
        }
        {
            io::SectionWriter w(os, "samples");
            sampled_.serialize(w.stream());
            io::put_u64_vec(w.stream(), samples_);
            w.finish();
        }
        {
            io::SectionWriter w(os, "runs");
            io::put_u64_vec(w.stream(), runs_);
            w.finish();
        }
        {
            io::SectionWriter w(os, "sequences");
            io::put_u64_vec(w.stream(), starts_);
            io::put_u64(w.stream(), docids_.size());
            for (const auto& d : docids_) io::put_string(w.stream(), d);
            w.finish();
        }
    }

    void serialize(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw FileMissing("cannot open for writing: " + path);
        serialize(out);
        if (!out) throw CorruptIndex("write failure: " + path);
    }

    static FmIndex deserialize(std::istream& is) {
        if (io::get_u32(is) != kMagic) throw CorruptIndex("bad magic; not an index file");
        const uint32_t version = io::get_u32(is);
        if (version != kVersion)
            throw VersionMismatch("index format v" + std::to_string(version) + ", expected v" +
                                  std::to_string(kVersion));
        FmIndex ix;
        {
            io::SectionReader r(is, "vocab");
            ix.vocab_ = Vocabulary::deserialize(r.stream());
        }
        {
            io::SectionReader r(is, "params");
            ix.sa_rate_ = io::get_u32(r.stream());
            const uint32_t mode = io::get_u32(r.stream());
            if (mode > 1) throw CorruptIndex("unknown allowed_next mode");
            ix.allowed_mode_ = static_cast<AllowedNextMode>(mode);
            ix.text_len_ = io::get_u64(r.stream());
            ix.vocab_hash_ = io::get_u64(r.stream());
            if (ix.vocab_hash_ != ix.vocab_.hash()) throw CorruptIndex("vocabulary hash mismatch");
        }
        {
            io::SectionReader r(is, "counts");
            ix.C_ = io::get_u64_vec(r.stream());
        }
        {
            io::SectionReader r(is, "bwt");
            ix.bwt_ = WaveletMatrix::deserialize(r.stream());
            if (ix.bwt_.size() != ix.text_len_ + 1) throw CorruptIndex("bwt length mismatch");
        }
        {
            io::SectionReader r(is, "samples");
            ix.sampled_ = BitVector::deserialize(r.stream());
            ix.samples_ = io::get_u64_vec(r.stream());
        }
        {
            io::SectionReader r(is, "runs");
            ix.runs_ = io::get_u64_vec(r.stream());
        }
        {
            io::SectionReader r(is, "sequences");
            ix.starts_ = io::get_u64_vec(r.stream());
            const uint64_t nd = io::get_u64(r.stream());
            if (nd != ix.starts_.size()) throw CorruptIndex("sequence table mismatch");
            ix.docids_.reserve(nd);
            for (uint64_t i = 0; i < nd; ++i) ix.docids_.push_back(io::get_string(r.stream()));
        }
        return ix;
    }

    static FmIndex deserialize(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FileMissing(path);
        return deserialize(in);
    }

private:
    uint64_t lf(uint64_t row) const {
        const uint32_t c = bwt_.access(row);
        return C_[c] + bwt_.rank(c, row);
    }

    uint64_t suffix_position(uint64_t row) const {
        uint64_t steps = 0;
        while (!sampled_.get(row)) {
            row = lf(row);
            ++steps;
        }
        const uint64_t n = text_len_ + 1;
        return (samples_[sampled_.rank1(row)] + steps) % n;
    }

    void build_runs(const std::vector<uint32_t>& bwt) {
        runs_.reserve(bwt.size() / 2 + 1);
        for (uint64_t i = 0; i < bwt.size(); ++i)
            if (i == 0 || bwt[i] != bwt[i - 1]) runs_.push_back(i);
    }

    uint64_t sequence_token_length(uint64_t ordinal) const {
        const uint64_t end = ordinal + 1 < starts_.size() ? starts_[ordinal + 1] : text_len_;
        return end - starts_[ordinal] - 1;  // minus the trailing separator
    }

    void collect_run_scan(uint64_t lo, uint64_t hi, std::vector<TokenId>& out) const {
        std::set<TokenId> seen;
        uint64_t pos = lo;
        while (pos < hi) {
            const uint32_t internal = bwt_.access(pos);
            seen.insert(internal <= 1 ? kSeparatorId : internal - 1);
            auto it = std::upper_bound(runs_.begin(), runs_.end(), pos);
            if (it == runs_.end()) break;
            pos = *it;
        }
        out.assign(seen.begin(), seen.end());
    }

    uint64_t text_len_ = 0;
    uint32_t sa_rate_ = 32;
    AllowedNextMode allowed_mode_ = AllowedNextMode::wavelet;
    uint64_t vocab_hash_ = 0;
    Vocabulary vocab_;
    WaveletMatrix bwt_;
    std::vector<uint64_t> C_;
    BitVector sampled_;
    std::vector<uint64_t> samples_;
    std::vector<uint64_t> runs_;
    std::vector<uint64_t> starts_;
    std::vector<std::string> docids_;
};

}  // namespace thinkdex
