#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "thinkdex/corpus.hpp"
#include "thinkdex/errors.hpp"
#include "thinkdex/fm_index.hpp"
#include "thinkdex/scorer.hpp"
#include "thinkdex/tokenizer.hpp"

namespace thinkdex {

enum class DecodePolicy { greedy, sample };

struct DecodeConfig {
    size_t max_total_tokens = 2048;  // generated tokens, prompt excluded
    size_t max_docids = 10;          // cap on retrieved documents and docid spans
    size_t max_hops = 5;             // cap on docid spans
    DecodePolicy policy = DecodePolicy::greedy;
    uint64_t seed = 0;
    std::optional<TokenId> stop_token;  // consumed in thought mode, not emitted
};

enum class DecodeMode { thought, docid };

enum class TruncationReason : uint8_t { none, tokens, docids, hops };

inline const char* to_string(TruncationReason r) {
    switch (r) {
        case TruncationReason::none: return "none";
        case TruncationReason::tokens: return "tokens";
        case TruncationReason::docids: return "docids";
        case TruncationReason::hops: return "hops";
    }
    return "?";
}

struct ThoughtSpan {
    TokenSeq tokens;
};

struct DocidSpan {
    TokenSeq tokens;
    std::string docid;                 // canonical docid string
    std::vector<std::string> doc_ids;  // resolved documents, sorted
};

using Span = std::variant<ThoughtSpan, DocidSpan>;

struct DecodedSequence {
    std::vector<Span> spans;  // alternating, ThoughtSpan first
    bool truncated = false;
    TruncationReason reason = TruncationReason::none;
    size_t generated_tokens = 0;
};

/// Union of resolved documents across docid spans, first-occurrence order,
/// deduplicated.
inline std::vector<std::string> retrieved_docs(const DecodedSequence& d) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const Span& span : d.spans) {
        if (const auto* ds = std::get_if<DocidSpan>(&span)) {
            for (const std::string& id : ds->doc_ids)
                if (seen.insert(id).second) out.push_back(id);
        }
    }
    return out;
}

inline size_t docid_span_count(const DecodedSequence& d) {
    size_t n = 0;
    for (const Span& span : d.spans) n += std::holds_alternative<DocidSpan>(span) ? 1 : 0;
    return n;
}

struct StepOutcome {
    TokenId token = 0;
    DecodeMode mode_after = DecodeMode::thought;
    bool finished = false;
};

/// One hybrid decoding pass: unconstrained thought generation, switching to
/// index-constrained docid generation at the start marker and back at span
/// completion. Sequential by contract; run any number of sessions over one
/// shared index/corpus concurrently.
class DecodeSession {
public:
    DecodeSession(const std::string& query, const FmIndex& ix, const Corpus& corpus,
                  const Vocabulary& vocab, const Scorer& scorer, DecodeConfig cfg)
        : ix_(ix), corpus_(corpus), vocab_(vocab), scorer_(scorer), cfg_(cfg), rng_(cfg.seed) {
        if (ix.vocab_hash() != vocab.hash())
            throw VocabMismatch("index vocabulary hash does not match supplied vocabulary");
        history_ = vocab.encode(query);
        if (history_.empty()) throw EmptyQuery("query encodes to zero tokens");
        prompt_len_ = history_.size();
    }

    DecodeMode mode() const { return mode_; }
    bool finished() const { return finished_; }
    const TokenSeq& history() const { return history_; }
    size_t prompt_length() const { return prompt_len_; }
    size_t generated_tokens() const { return generated_; }
    const std::vector<Span>& spans() const { return spans_; }

    StepOutcome step() {
        if (finished_) throw InvariantViolation("step() on finished session");
        return mode_ == DecodeMode::thought ? step_thought() : step_docid();
    }

    DecodedSequence run() {
        while (!finished_) step();
        return result();
    }

    DecodedSequence result() const {
        if (!finished_) throw InvariantViolation("result() before session finished");
        DecodedSequence out;
        out.spans = spans_;
        if (mode_ == DecodeMode::thought) {
            if (!pending_thought_.empty()) out.spans.push_back(ThoughtSpan{pending_thought_});
        }
        // A docid span cut off by the token budget is not a valid docid and
        // is dropped from spans; its tokens remain in history().
        out.truncated = reason_ != TruncationReason::none;
        out.reason = reason_;
        out.generated_tokens = generated_;
        return out;
    }

private:
    StepOutcome step_thought() {
        const ScoreResponse resp = scorer_.score(ScoreRequest{history_, std::nullopt});
        const TokenId tok = choose(resp, nullptr);
        if (cfg_.stop_token && tok == *cfg_.stop_token) {
            finished_ = true;
            return {tok, mode_, true};
        }
        history_.push_back(tok);
        ++generated_;
        if (tok == kStartMarkerId) {
            spans_.push_back(ThoughtSpan{std::move(pending_thought_)});
            pending_thought_.clear();
            span_tokens_ = {kStartMarkerId};
            auto st = ix_.extend(ix_.start_state(), kStartMarkerId);
            if (!st) throw InvariantViolation("start marker not extendable; empty index?");
            state_ = *st;
            mode_ = DecodeMode::docid;
        } else {
            pending_thought_.push_back(tok);
        }
        check_token_budget();
        return {tok, mode_, finished_};
    }

    StepOutcome step_docid() {
        std::vector<TokenId> mask = ix_.allowed_next(state_);
        mask.erase(std::remove(mask.begin(), mask.end(), kSeparatorId), mask.end());
        if (mask.empty())
            throw InvariantViolation("dead end in constrained mode; docid span cannot continue");

        const ScoreResponse resp = scorer_.score(ScoreRequest{history_, mask});
        const TokenId tok = choose(resp, &mask);
        auto st = ix_.extend(state_, tok);
        if (!st) throw InvariantViolation("masked token not extendable");
        state_ = *st;
        history_.push_back(tok);
        ++generated_;
        span_tokens_.push_back(tok);

        const std::vector<TokenId> cont = ix_.allowed_next(state_);
        if (cont.size() == 1 && cont[0] == kSeparatorId) close_docid_span();
        if (!finished_) check_token_budget();
        return {tok, mode_, finished_};
    }

    void close_docid_span() {
        const std::set<std::string> located = ix_.locate(state_);
        if (located.size() != 1)
            throw InvariantViolation("complete docid resolves to " + std::to_string(located.size()) +
                                     " index entries");
        const std::string& docid = *located.begin();
        const std::set<std::string>& docs = corpus_.resolve_docid(docid);
        if (docs.empty()) throw InvariantViolation("indexed docid missing from corpus map: " + docid);
        spans_.push_back(DocidSpan{std::move(span_tokens_), docid, {docs.begin(), docs.end()}});
        span_tokens_.clear();
        for (const std::string& id : docs) {
            if (retrieved_seen_.insert(id).second) ++retrieved_count_;
        }
        mode_ = DecodeMode::thought;
        state_ = SearchState{};

        const size_t span_cap = std::min(cfg_.max_hops, cfg_.max_docids);
        if (docid_spans() >= span_cap) {
            finished_ = true;
            reason_ = TruncationReason::hops;
        } else if (retrieved_count_ >= cfg_.max_docids) {
            finished_ = true;
            reason_ = TruncationReason::docids;
        }
    }

    size_t docid_spans() const {
        size_t n = 0;
        for (const Span& s : spans_) n += std::holds_alternative<DocidSpan>(s) ? 1 : 0;
        return n;
    }

    void check_token_budget() {
        if (generated_ >= cfg_.max_total_tokens && !finished_) {
            finished_ = true;
            reason_ = TruncationReason::tokens;
        }
    }

    TokenId choose(const ScoreResponse& resp, const std::vector<TokenId>* mask) {
        if (resp.logprobs.empty()) throw EmptySupport("scorer returned empty distribution");
        if (mask) {
            for (const auto& [id, lp] : resp.logprobs) {
                if (std::find(mask->begin(), mask->end(), id) == mask->end())
                    throw InvariantViolation("scorer emitted token " + std::to_string(id) +
                                             " outside candidate mask");
            }
        }
        if (cfg_.policy == DecodePolicy::greedy) {
            // argmax; ties break toward the lowest token id (entries sorted)
            const auto best = std::max_element(
                resp.logprobs.begin(), resp.logprobs.end(),
                [](const auto& a, const auto& b) { return a.second < b.second; });
            return best->first;
        }
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        const double u = uni(rng_);
        double acc = 0.0;
        for (const auto& [id, lp] : resp.logprobs) {
            acc += std::exp(lp);
            if (u < acc) return id;
        }
        return resp.logprobs.back().first;
    }

    const FmIndex& ix_;
    const Corpus& corpus_;
    const Vocabulary& vocab_;
    const Scorer& scorer_;
    DecodeConfig cfg_;
    std::mt19937_64 rng_;

    DecodeMode mode_ = DecodeMode::thought;
    bool finished_ = false;
    TruncationReason reason_ = TruncationReason::none;
    TokenSeq history_;
    size_t prompt_len_ = 0;
    size_t generated_ = 0;
    TokenSeq pending_thought_;
    TokenSeq span_tokens_;
    SearchState state_;
    std::vector<Span> spans_;
    std::unordered_set<std::string> retrieved_seen_;
    size_t retrieved_count_ = 0;
};

inline DecodeSession new_session(const std::string& query, const FmIndex& ix, const Corpus& corpus,
                                 const Vocabulary& vocab, const Scorer& scorer, DecodeConfig cfg = {}) {
    return DecodeSession(query, ix, corpus, vocab, scorer, cfg);
}

}  // namespace thinkdex
