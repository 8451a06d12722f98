#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "thinkdex/decoder.hpp"
#include "thinkdex/objectives.hpp"

namespace thinkdex {

/// Bigram table policy: one logit row per previous token. Small enough to
/// train with plain gradient descent, expressive enough to learn one
/// thought-retrieval chain end to end.
struct PolicyTable {
    size_t vocab = 0;
    std::vector<double> logits;  // vocab x vocab, row = previous token

    explicit PolicyTable(size_t vocab_size)
        : vocab(vocab_size), logits(vocab_size * vocab_size, 0.0) {}

    double& at(TokenId prev, TokenId tok) { return logits[static_cast<size_t>(prev) * vocab + tok]; }
    double at(TokenId prev, TokenId tok) const {
        return logits[static_cast<size_t>(prev) * vocab + tok];
    }
};

/// Scorer over a policy table. Unconstrained support is the full vocabulary
/// minus the separator, which never appears in generated text.
class TablePolicyScorer : public Scorer {
public:
    explicit TablePolicyScorer(const PolicyTable& table) : table_(table) {}

    ScoreResponse score(const ScoreRequest& req) const override {
        if (req.context.empty()) throw EmptyQuery("table policy needs a non-empty context");
        const TokenId prev = req.context.back();
        std::vector<std::pair<TokenId, double>> raw;
        if (req.candidate_mask) {
            for (TokenId t : *req.candidate_mask) raw.emplace_back(t, table_.at(prev, t));
        } else {
            for (TokenId t = 0; t < table_.vocab; ++t)
                if (t != kSeparatorId) raw.emplace_back(t, table_.at(prev, t));
        }
        return make_response(std::move(raw));
    }

private:
    const PolicyTable& table_;
};

namespace detail {

/// Replays a generated token sequence through the policy table, mirroring
/// the decoder's mode transitions, and reports the sequence log-probability.
/// When grad_out and weight are given, accumulates weight * dlogp/dtheta.
inline double replay_logp(const PolicyTable& table, const FmIndex& ix, const TokenSeq& history,
                          size_t prompt_len, PolicyTable* grad_out = nullptr, double weight = 0.0) {
    double logp = 0.0;
    DecodeMode mode = DecodeMode::thought;
    SearchState state;
    for (size_t pos = prompt_len; pos < history.size(); ++pos) {
        const TokenId prev = history[pos - 1];
        const TokenId tok = history[pos];

        std::vector<TokenId> support;
        if (mode == DecodeMode::thought) {
            support.reserve(table.vocab - 1);
            for (TokenId t = 0; t < table.vocab; ++t)
                if (t != kSeparatorId) support.push_back(t);
        } else {
            support = ix.allowed_next(state);
            support.erase(std::remove(support.begin(), support.end(), kSeparatorId), support.end());
        }

        double mx = -std::numeric_limits<double>::infinity();
        for (TokenId t : support) mx = std::max(mx, table.at(prev, t));
        double z = 0.0;
        for (TokenId t : support) z += std::exp(table.at(prev, t) - mx);
        const double log_z = mx + std::log(z);
        logp += table.at(prev, tok) - log_z;

        if (grad_out) {
            for (TokenId t : support) {
                const double p = std::exp(table.at(prev, t) - log_z);
                grad_out->at(prev, t) += weight * ((t == tok ? 1.0 : 0.0) - p);
            }
        }

        if (mode == DecodeMode::thought) {
            if (tok == kStartMarkerId) {
                state = *ix.extend(ix.start_state(), kStartMarkerId);
                mode = DecodeMode::docid;
            }
        } else {
            state = *ix.extend(state, tok);
            const auto cont = ix.allowed_next(state);
            if (cont.size() == 1 && cont[0] == kSeparatorId) mode = DecodeMode::thought;
        }
    }
    return logp;
}

}  // namespace detail

struct ToyTrainConfig {
    size_t steps = 500;
    size_t batch_size = 8;
    double learning_rate = 0.5;
    uint64_t seed = 7;
    size_t checkpoint_every = 10;
    KtoConfig kto;
    size_t max_total_tokens = 12;
};

struct ToyCheckpoint {
    size_t step = 0;
    double loss = 0.0;
    double mean_batch_acc = 0.0;
    double greedy_acc = 0.0;
};

struct ToyTrainReport {
    std::vector<ToyCheckpoint> curve;
    double final_greedy_acc = 0.0;
    size_t steps_run = 0;
    std::vector<double> final_logits;  // flattened policy table after training
};

struct ToyFixture {
    Corpus corpus;
    Vocabulary vocab;
    FmIndex index;
    std::string query;
    std::set<std::string> gold;
};

/// Five single-triple documents with disjoint token sets; the query's gold
/// document is doc3.
inline ToyFixture make_toy_fixture() {
    std::vector<Corpus::RecordInput> records;
    const char* words[5][3] = {{"amber", "points to", "basalt"},
                               {"cobalt", "points to", "dune"},
                               {"ember", "flows into", "fjord"},
                               {"garnet", "points to", "harbor"},
                               {"indigo", "points to", "jetty"}};
    for (int k = 0; k < 5; ++k) {
        Corpus::RecordInput r;
        r.doc_id = "doc" + std::to_string(k + 1);
        r.title = "toy " + std::to_string(k + 1);
        r.text = std::string(words[k][0]) + " " + words[k][1] + " " + words[k][2];
        r.triples.push_back({words[k][0], words[k][1], words[k][2]});
        records.push_back(std::move(r));
    }
    ToyFixture f{Corpus::from_records(records), {}, {}, "which fact flows", {"doc3"}};
    f.vocab = Vocabulary::build(f.corpus);
    f.index = FmIndex::build(f.corpus, f.vocab);
    return f;
}

inline double greedy_accuracy(const PolicyTable& table, const ToyFixture& f, const ToyTrainConfig& cfg) {
    TablePolicyScorer scorer(table);
    DecodeConfig dc;
    dc.max_total_tokens = cfg.max_total_tokens;
    dc.max_hops = 1;
    dc.policy = DecodePolicy::greedy;
    DecodeSession session(f.query, f.index, f.corpus, f.vocab, scorer, dc);
    const DecodedSequence seq = session.run();
    return acc_r(retrieved_docs(seq), f.gold);
}

/// KTO training loop at desk scale: sample sequences from the current table
/// policy through the real decoder, label them by retrieval accuracy against
/// gold, and descend the KTO loss. The reference policy is the initial
/// (uniform) table.
inline ToyTrainReport train_toy_policy(const ToyFixture& f, ToyTrainConfig cfg = {}) {
    PolicyTable theta(f.vocab.size());
    const PolicyTable theta_ref(f.vocab.size());
    std::mt19937_64 rng(cfg.seed);
    ToyTrainReport report;

    const auto checkpoint = [&](size_t step, double loss, double mean_acc) {
        report.curve.push_back(ToyCheckpoint{step, loss, mean_acc, greedy_accuracy(theta, f, cfg)});
    };
    checkpoint(0, 0.0, 0.0);

    for (size_t step = 1; step <= cfg.steps; ++step) {
        struct Sample {
            TokenSeq history;
            size_t prompt_len = 0;
            double acc = 0.0;
        };
        std::vector<Sample> samples;
        double acc_sum = 0.0;
        TablePolicyScorer scorer(theta);
        for (size_t b = 0; b < cfg.batch_size; ++b) {
            DecodeConfig dc;
            dc.max_total_tokens = cfg.max_total_tokens;
            dc.max_hops = 1;
            dc.policy = DecodePolicy::sample;
            dc.seed = rng();
            DecodeSession session(f.query, f.index, f.corpus, f.vocab, scorer, dc);
            const DecodedSequence seq = session.run();
            const double acc = acc_r(retrieved_docs(seq), f.gold);
            acc_sum += acc;
            samples.push_back(Sample{session.history(), session.prompt_length(), acc});
        }

        std::vector<KtoExample> batch;
        std::vector<size_t> batch_sample;  // sample index per kto example
        for (size_t i = 0; i < samples.size(); ++i) {
            const auto label = label_sample(samples[i].acc, cfg.kto.tau);
            if (!label) continue;
            KtoExample ex;
            ex.label = *label;
            ex.logp_policy = detail::replay_logp(theta, f.index, samples[i].history, samples[i].prompt_len);
            ex.logp_ref = detail::replay_logp(theta_ref, f.index, samples[i].history, samples[i].prompt_len);
            ex.query_id = "toy";
            batch.push_back(ex);
            batch_sample.push_back(i);
        }

        double loss = 0.0;
        if (!batch.empty()) {
            const KtoBatchResult res = kto_loss(batch, cfg.kto);
            loss = res.loss;
            if (!std::isfinite(loss)) throw DivergenceDetected("toy training loss diverged");
            PolicyTable grad(f.vocab.size());
            for (size_t i = 0; i < batch.size(); ++i) {
                const Sample& s = samples[batch_sample[i]];
                detail::replay_logp(theta, f.index, s.history, s.prompt_len, &grad,
                                    res.grad_logp_policy[i]);
            }
            for (size_t i = 0; i < theta.logits.size(); ++i)
                theta.logits[i] -= cfg.learning_rate * grad.logits[i];
        }

        report.steps_run = step;
        if (step % cfg.checkpoint_every == 0 || step == cfg.steps) {
            checkpoint(step, loss, acc_sum / static_cast<double>(cfg.batch_size));
            if (report.curve.back().greedy_acc == 1.0) break;  // converged
        }
    }

    report.final_greedy_acc = greedy_accuracy(theta, f, cfg);
    report.final_logits = theta.logits;
    return report;
}

}  // namespace thinkdex
