#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "thinkdex/corpus.hpp"
#include "thinkdex/errors.hpp"
#include "thinkdex/fm_index.hpp"
#include "thinkdex/tokenizer.hpp"

namespace thinkdex {

struct ScoreRequest {
    TokenSeq context;  // full history including the encoded query prompt
    std::optional<std::vector<TokenId>> candidate_mask;
};

/// Normalized log-probabilities over the scored support, sorted by token id.
struct ScoreResponse {
    std::vector<std::pair<TokenId, double>> logprobs;
};

inline double logsumexp(const std::vector<std::pair<TokenId, double>>& entries) {
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& [id, lp] : entries) mx = std::max(mx, lp);
    if (!std::isfinite(mx)) return mx;
    double acc = 0.0;
    for (const auto& [id, lp] : entries) acc += std::exp(lp - mx);
    return mx + std::log(acc);
}

/// Sorts by token id and shifts values so the distribution sums to one.
inline ScoreResponse make_response(std::vector<std::pair<TokenId, double>> raw) {
    if (raw.empty()) throw EmptySupport("score response has no support");
    std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    const double lse = logsumexp(raw);
    if (!std::isfinite(lse)) throw EmptySupport("score response has no finite mass");
    for (auto& [id, lp] : raw) lp -= lse;
    return ScoreResponse{std::move(raw)};
}

/// Token scoring contract. Implementations hold no per-session state and
/// must tolerate concurrent score() calls; everything a call needs travels
/// in the request.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual ScoreResponse score(const ScoreRequest& req) const = 0;
};

// ---------------------------------------------------------------------------
// OracleScorer: replays a fixed token script
// ---------------------------------------------------------------------------

/// Deterministic scripted scorer for tests and offline replay. The position
/// in the script is derived from the request (context length minus prompt
/// length), so the scorer itself stays stateless.
class OracleScorer : public Scorer {
public:
    OracleScorer(TokenSeq script, size_t prompt_token_count)
        : script_(std::move(script)), prompt_len_(prompt_token_count) {}

    ScoreResponse score(const ScoreRequest& req) const override {
        if (req.context.size() < prompt_len_)
            throw InvariantViolation("oracle context shorter than prompt");
        const size_t pos = req.context.size() - prompt_len_;
        if (pos >= script_.size())
            throw ScriptExhausted("oracle script consumed after " + std::to_string(script_.size()) +
                                  " tokens");
        const TokenId tok = script_[pos];
        if (req.candidate_mask &&
            std::find(req.candidate_mask->begin(), req.candidate_mask->end(), tok) ==
                req.candidate_mask->end())
            throw InvariantViolation("scripted token " + std::to_string(tok) + " not in candidate mask");
        return make_response({{tok, 0.0}});
    }

private:
    TokenSeq script_;
    size_t prompt_len_;
};

// ---------------------------------------------------------------------------
// LexicalScorer: n-gram overlap baseline
// ---------------------------------------------------------------------------

struct LexicalScorerConfig {
    size_t ngram = 1;
    double temperature = 1.0;
};

/// Scores each candidate continuation by the best query-n-gram overlap of
/// any docid reachable through it, softmax-normalized. In unconstrained mode
/// it always proposes the start marker, so decoding retrieves until a budget
/// ends the session. Exact but not cheap: every candidate enumerates its
/// reachable docids.
class LexicalScorer : public Scorer {
public:
    LexicalScorer(const FmIndex& index, LexicalScorerConfig cfg = {}) : ix_(index), cfg_(cfg) {
        if (cfg_.ngram < 1) cfg_.ngram = 1;
        if (cfg_.temperature <= 0.0) cfg_.temperature = 1.0;
    }

    ScoreResponse score(const ScoreRequest& req) const override {
        if (!req.candidate_mask) return make_response({{kStartMarkerId, 0.0}});
        if (req.candidate_mask->empty()) throw EmptySupport("empty candidate mask");

        // Rebuild the in-progress docid state from the context tail.
        size_t span_start = req.context.size();
        while (span_start > 0 && req.context[span_start - 1] != kStartMarkerId) --span_start;
        if (span_start == 0) throw InvariantViolation("constrained request without open docid span");
        SearchState state = ix_.start_state();
        for (size_t i = span_start - 1; i < req.context.size(); ++i) {
            auto next = ix_.extend(state, req.context[i]);
            if (!next) throw InvariantViolation("context docid span not extendable in index");
            state = *next;
        }

        TokenSeq query(req.context.begin(), req.context.begin() + static_cast<ptrdiff_t>(span_start - 1));
        return lexical_score(query, *req.candidate_mask, state, ix_, cfg_);
    }

    /// Standalone scoring step; exposed for direct use and tests.
    static ScoreResponse lexical_score(const TokenSeq& query, const std::vector<TokenId>& candidates,
                                       const SearchState& state, const FmIndex& ix,
                                       LexicalScorerConfig cfg = {}) {
        if (candidates.empty()) throw EmptySupport("no candidate continuations");
        std::unordered_set<uint64_t> query_grams = token_ngrams(query, ix.vocabulary(), cfg.ngram);

        std::vector<std::pair<TokenId, double>> raw;
        raw.reserve(candidates.size());
        for (TokenId t : candidates) {
            double best = 0.0;
            if (t != kSeparatorId) {
                if (auto st = ix.extend(state, t)) {
                    for (const std::string& docid : ix.docids_in_state(*st)) {
                        const TokenSeq toks = ix.vocabulary().encode(docid);
                        const auto grams = token_ngrams(toks, ix.vocabulary(), cfg.ngram);
                        size_t hits = 0;
                        for (uint64_t g : grams)
                            if (query_grams.count(g)) ++hits;
                        best = std::max(best, static_cast<double>(hits));
                    }
                }
            }
            raw.emplace_back(t, best / cfg.temperature);
        }
        return make_response(std::move(raw));
    }

private:
    static std::unordered_set<uint64_t> token_ngrams(const TokenSeq& toks, const Vocabulary& vocab,
                                                     size_t n) {
        std::unordered_set<uint64_t> grams;
        if (toks.size() < n) return grams;
        for (size_t i = 0; i + n <= toks.size(); ++i) {
            uint64_t h = 0xcbf29ce484222325ULL;
            for (size_t k = 0; k < n; ++k) {
                const std::string& s = vocab.token(toks[i + k]);
                h = io::fnv1a64(s, h);
                h = io::fnv1a64("\x1f", h);
            }
            grams.insert(h);
        }
        return grams;
    }

    const FmIndex& ix_;
    LexicalScorerConfig cfg_;
};

}  // namespace thinkdex
