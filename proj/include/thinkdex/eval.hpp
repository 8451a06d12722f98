#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "thinkdex/decoder.hpp"
#include "thinkdex/errors.hpp"
#include "thinkdex/objectives.hpp"

namespace thinkdex {

struct QueryRecord {
    std::string query_id;
    std::string question;
    std::vector<std::string> gold_doc_ids;
};

/// One JSON record per line:
/// {"query_id": ..., "question": ..., "gold_doc_ids": [...]}
inline std::vector<QueryRecord> load_queries(const std::string& path) {
    std::vector<QueryRecord> out;
    io::for_each_line(path, [&](size_t line_no, std::string_view line) {
        if (line.empty()) return;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw MalformedRecord("line " + std::to_string(line_no) + ": not a JSON object");
        QueryRecord q;
        try {
            q.query_id = j.at("query_id").get<std::string>();
            q.question = j.at("question").get<std::string>();
            for (const auto& g : j.at("gold_doc_ids")) q.gold_doc_ids.push_back(g.get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecord("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (q.gold_doc_ids.empty())
            throw MalformedRecord("line " + std::to_string(line_no) + ": gold_doc_ids is empty");
        out.push_back(std::move(q));
    });
    return out;
}

/// |retrieved ∩ gold| / |gold|. Same formula as acc_r; this is the
/// evaluation-facing name.
template <typename Container>
inline double recall(const Container& retrieved, const std::set<std::string>& gold) {
    return acc_r(retrieved, gold);
}

struct QueryResult {
    std::string query_id;
    double recall = 0.0;
    double acc_r = 0.0;
    size_t n_retrieved = 0;
    size_t n_docid_spans = 0;
    double latency_ms = 0.0;
    double scorer_ms = 0.0;  // time inside score() calls; the remainder of
                             // latency_ms is decoder-local work
    bool truncated = false;
    bool failed = false;
    std::string error;
    size_t missing_gold = 0;  // gold ids absent from the corpus (warn-and-keep)
};

struct EvalAggregates {
    size_t n_queries = 0;
    double mean_recall = 0.0;
    double mean_retrieved = 0.0;
    double mean_latency_ms = 0.0;
    double truncation_rate = 0.0;
    double failure_rate = 0.0;
};

struct EvalReport {
    std::vector<QueryResult> rows;
    EvalAggregates aggregates;
    size_t missing_gold_total = 0;
};

inline EvalAggregates recompute_aggregates(const std::vector<QueryResult>& rows) {
    EvalAggregates a;
    a.n_queries = rows.size();
    if (rows.empty()) return a;
    for (const auto& r : rows) {
        a.mean_recall += r.recall;
        a.mean_retrieved += static_cast<double>(r.n_retrieved);
        a.mean_latency_ms += r.latency_ms;
        a.truncation_rate += r.truncated ? 1.0 : 0.0;
        a.failure_rate += r.failed ? 1.0 : 0.0;
    }
    const auto n = static_cast<double>(rows.size());
    a.mean_recall /= n;
    a.mean_retrieved /= n;
    a.mean_latency_ms /= n;
    a.truncation_rate /= n;
    a.failure_rate /= n;
    return a;
}

/// Builds a scorer for one query. Oracle scorers are per-query (scripted);
/// lexical and remote scorers ignore the record and prompt length.
using ScorerFactory =
    std::function<std::unique_ptr<Scorer>(const QueryRecord&, size_t prompt_token_count)>;

/// Accumulates wall time spent inside score() so per-query latency can be
/// split into decoder-local and scorer (e.g. remote network) shares.
class TimingScorer : public Scorer {
public:
    explicit TimingScorer(const Scorer& inner) : inner_(inner) {}

    ScoreResponse score(const ScoreRequest& req) const override {
        const auto t0 = std::chrono::steady_clock::now();
        ScoreResponse r = inner_.score(req);
        elapsed_ns_ += std::chrono::duration_cast<std::chrono::nanoseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
        return r;
    }

    double elapsed_ms() const { return static_cast<double>(elapsed_ns_) / 1e6; }

private:
    const Scorer& inner_;
    mutable int64_t elapsed_ns_ = 0;  // one session per instance; sessions are sequential
};

/// Decodes every query and collects per-query metrics. Latency covers run()
/// only (session construction and index load excluded). A query that throws
/// is recorded as failed with recall 0 rather than aborting the run.
inline EvalReport run_eval(const std::vector<QueryRecord>& queries, const FmIndex& ix,
                           const Corpus& corpus, const Vocabulary& vocab, const ScorerFactory& factory,
                           const DecodeConfig& cfg = {}, size_t threads = 1) {
    if (queries.empty()) throw NoQueries("no queries to evaluate");
    EvalReport report;
    report.rows.resize(queries.size());

    const auto eval_one = [&](size_t qi) {
        const QueryRecord& q = queries[qi];
        QueryResult& row = report.rows[qi];
        row.query_id = q.query_id;
        std::set<std::string> gold(q.gold_doc_ids.begin(), q.gold_doc_ids.end());
        for (const auto& g : gold)
            if (!corpus.has_doc(g)) ++row.missing_gold;
        try {
            auto scorer = factory(q, vocab.encode(q.question).size());
            TimingScorer timed(*scorer);
            DecodeSession session(q.question, ix, corpus, vocab, timed, cfg);
            const auto t0 = std::chrono::steady_clock::now();
            const DecodedSequence seq = session.run();
            const auto t1 = std::chrono::steady_clock::now();
            row.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            row.scorer_ms = timed.elapsed_ms();
            const auto docs = retrieved_docs(seq);
            row.recall = recall(docs, gold);
            row.acc_r = row.recall;
            row.n_retrieved = docs.size();
            row.n_docid_spans = docid_span_count(seq);
            row.truncated = seq.truncated;
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
            row.recall = 0.0;
            row.acc_r = 0.0;
        }
    };

    if (threads <= 1) {
        for (size_t i = 0; i < queries.size(); ++i) eval_one(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        for (size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < queries.size(); i = next.fetch_add(1)) eval_one(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    for (const auto& r : report.rows) report.missing_gold_total += r.missing_gold;
    report.aggregates = recompute_aggregates(report.rows);
    return report;
}

struct RetrievedCountStats {
    double mean = 0.0;
    std::map<size_t, size_t> histogram;  // retrieved-count -> queries
};

inline RetrievedCountStats retrieved_count_stats(const EvalReport& report) {
    RetrievedCountStats s;
    if (report.rows.empty()) return s;
    for (const auto& r : report.rows) {
        s.mean += static_cast<double>(r.n_retrieved);
        ++s.histogram[r.n_retrieved];
    }
    s.mean /= static_cast<double>(report.rows.size());
    return s;
}

struct IndexSizeReport {
    uint64_t index_bytes = 0;
    uint64_t corpus_bytes = 0;
    double ratio = 0.0;
};

inline IndexSizeReport index_size_report(const std::string& index_path, const std::string& corpus_path) {
    IndexSizeReport r;
    r.index_bytes = io::file_size_bytes(index_path);
    r.corpus_bytes = io::file_size_bytes(corpus_path);
    r.ratio = r.corpus_bytes ? static_cast<double>(r.index_bytes) / static_cast<double>(r.corpus_bytes)
                             : 0.0;
    return r;
}

struct LatencyReport {
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double per_step_us = 0.0;
    double scorer_per_step_us = 0.0;  // share of per_step_us spent in score()
    uint64_t corpus_tokens = 0;
    uint64_t total_steps = 0;
    size_t repeats = 0;
};

/// Repeats full-eval decoding (single-threaded, one warmup pass excluded)
/// and reports per-query wall times plus the mean per-decoding-step time.
inline LatencyReport bench_latency(const std::vector<QueryRecord>& queries, const FmIndex& ix,
                                   const Corpus& corpus, const Vocabulary& vocab,
                                   const ScorerFactory& factory, const DecodeConfig& cfg,
                                   size_t repeats) {
    if (queries.empty()) throw NoQueries("no queries to benchmark");
    if (repeats < 3) throw NoQueries("bench needs repeats >= 3");

    run_eval(queries, ix, corpus, vocab, factory, cfg, 1);  // warmup

    std::vector<double> per_query_ms;
    uint64_t steps = 0;
    double total_ms = 0.0, total_scorer_ms = 0.0;
    for (size_t rep = 0; rep < repeats; ++rep) {
        for (const auto& q : queries) {
            auto scorer = factory(q, vocab.encode(q.question).size());
            TimingScorer timed(*scorer);
            DecodeSession session(q.question, ix, corpus, vocab, timed, cfg);
            const auto t0 = std::chrono::steady_clock::now();
            const DecodedSequence seq = session.run();
            const auto t1 = std::chrono::steady_clock::now();
            const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            per_query_ms.push_back(ms);
            total_ms += ms;
            total_scorer_ms += timed.elapsed_ms();
            steps += seq.generated_tokens;
        }
    }

    std::sort(per_query_ms.begin(), per_query_ms.end());
    LatencyReport r;
    r.repeats = repeats;
    r.mean_ms = total_ms / static_cast<double>(per_query_ms.size());
    r.p50_ms = per_query_ms[per_query_ms.size() / 2];
    r.p95_ms = per_query_ms[std::min(per_query_ms.size() - 1, per_query_ms.size() * 95 / 100)];
    r.total_steps = steps;
    r.per_step_us = steps ? total_ms * 1000.0 / static_cast<double>(steps) : 0.0;
    r.scorer_per_step_us = steps ? total_scorer_ms * 1000.0 / static_cast<double>(steps) : 0.0;
    r.corpus_tokens = ix.text_length();
    return r;
}

}  // namespace thinkdex
