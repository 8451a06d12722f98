#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "thinkdex/corpus.hpp"
#include "thinkdex/errors.hpp"
#include "thinkdex/io.hpp"

namespace thinkdex {

using TokenId = uint32_t;

inline constexpr TokenId kSeparatorId = 0;
inline constexpr TokenId kStartMarkerId = 1;
inline constexpr TokenId kEndMarkerId = 2;
inline constexpr TokenId kUnknownId = 3;
inline constexpr TokenId kFirstRegularId = 4;

using TokenSeq = std::vector<TokenId>;

/// Corpus-derived whitespace vocabulary. Ids 0..3 are reserved and stable
/// across corpora: separator, start marker, end marker, unknown. Regular ids
/// follow in first-occurrence order over the canonical docid strings.
class Vocabulary {
public:
    static Vocabulary build(const Corpus& corpus) {
        if (corpus.docids().empty()) throw EmptyCorpus("cannot build vocabulary from corpus without docids");
        Vocabulary v;
        for (std::string_view docid : corpus.docids())
            for (const std::string& tok : split_tokens(docid)) v.intern(tok);
        return v;
    }

    Vocabulary() {
        id_to_token_ = {std::string(kSeparatorLiteral), std::string(kStartMarker), std::string(kEndMarker),
                        std::string(kUnknownLiteral)};
        for (TokenId i = 0; i < kFirstRegularId; ++i) token_to_id_.emplace(id_to_token_[i], i);
    }

    size_t size() const { return id_to_token_.size(); }

    const std::string& token(TokenId id) const {
        if (id >= id_to_token_.size()) throw InvalidTokenId(std::to_string(id));
        return id_to_token_[id];
    }

    /// Id for a token string; kUnknownId when out of vocabulary. The
    /// separator literal is index-internal and never reachable from text.
    TokenId id_of(std::string_view tok) const {
        if (tok == kSeparatorLiteral) return kUnknownId;
        auto it = token_to_id_.find(std::string(tok));
        return it == token_to_id_.end() ? kUnknownId : it->second;
    }

    TokenSeq encode(std::string_view text) const {
        TokenSeq out;
        for (const std::string& tok : split_tokens(text)) out.push_back(id_of(tok));
        return out;
    }

    std::string decode(const TokenSeq& seq) const {
        std::string out;
        for (size_t i = 0; i < seq.size(); ++i) {
            if (i) out.push_back(' ');
            out += token(seq[i]);
        }
        return out;
    }

    /// FNV-1a over all token strings in id order; used by the index file and
    /// the decoder to detect vocabulary/index mismatches.
    uint64_t hash() const {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& t : id_to_token_) {
            h = io::fnv1a64(t, h);
            h = io::fnv1a64("\x1e", h);
        }
        return h;
    }

    void serialize(std::ostream& os) const {
        io::put_u64(os, id_to_token_.size());
        for (const auto& t : id_to_token_) io::put_string(os, t);
        io::put_u64(os, hash());
    }

    static Vocabulary deserialize(std::istream& is) {
        const uint64_t n = io::get_u64(is);
        if (n < kFirstRegularId) throw CorruptIndex("vocabulary smaller than reserved region");
        Vocabulary v;
        for (uint64_t i = 0; i < n; ++i) {
            std::string tok = io::get_string(is);
            if (i < kFirstRegularId) {
                if (tok != v.id_to_token_[i]) throw CorruptIndex("reserved token mismatch");
                continue;
            }
            v.intern(tok);
        }
        if (io::get_u64(is) != v.hash()) throw CorruptIndex("vocabulary hash mismatch");
        return v;
    }

    bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

private:
    void intern(const std::string& tok) {
        auto [it, inserted] = token_to_id_.emplace(tok, static_cast<TokenId>(id_to_token_.size()));
        if (inserted) id_to_token_.push_back(tok);
    }

    std::unordered_map<std::string, TokenId> token_to_id_;
    std::vector<std::string> id_to_token_;
};

}  // namespace thinkdex
