// thinkdex: corpus indexing, hybrid decoding, evaluation, and training
// objectives behind one multiplexer binary. Data goes to stdout,
// diagnostics to stderr; exit 0 on success, 1 on usage errors, 2 on
// runtime errors.

#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "thinkdex/remote_scorer.hpp"
#include "thinkdex/thinkdex.hpp"

using nlohmann::json;
using namespace thinkdex;

namespace {

enum class OutputFormat { tsv, records };

struct GlobalOpts {
    uint64_t seed = 0;
    size_t threads = std::thread::hardware_concurrency() ? std::thread::hardware_concurrency() : 1;
    std::string log_level = "info";
    OutputFormat format = OutputFormat::tsv;

    bool info_enabled() const { return log_level != "quiet"; }
};

void log_info(const GlobalOpts& g, const std::string& msg) {
    if (g.info_enabled()) std::cerr << "[thinkdex] " << msg << "\n";
}

/// Reproducibility header: every run prints its resolved configuration
/// before any data. Comment-prefixed in tsv mode, a config record otherwise.
void emit_config(const GlobalOpts& g, const std::string& subcommand,
                 const std::map<std::string, std::string>& opts) {
    if (g.format == OutputFormat::tsv) {
        std::cout << "# thinkdex " << subcommand;
        for (const auto& [k, v] : opts) std::cout << ' ' << k << '=' << v;
        std::cout << " seed=" << g.seed << " threads=" << g.threads << "\n";
    } else {
        json rec{{"type", "config"}, {"subcommand", subcommand}, {"seed", g.seed}, {"threads", g.threads}};
        for (const auto& [k, v] : opts) rec[k] = v;
        std::cout << rec.dump() << "\n";
    }
}

struct LoadedStack {
    Corpus corpus;
    FmIndex index;
    Vocabulary vocab;
};

LoadedStack load_stack(const GlobalOpts& g, const std::string& index_path, const std::string& corpus_path) {
    LoadedStack s{ingest_corpus(corpus_path), FmIndex::deserialize(index_path), {}};
    s.vocab = s.index.vocabulary();
    if (s.corpus.non_indexable_count() > 0)
        std::cerr << "[thinkdex] warning: " << s.corpus.non_indexable_count()
                  << " documents have no triples and are not indexable\n";
    log_info(g, "loaded corpus (" + std::to_string(s.corpus.size()) + " docs) and index (" +
                    std::to_string(s.index.docid_count()) + " docids, " +
                    std::to_string(s.index.text_length()) + " tokens)");
    return s;
}

// --scorer oracle:<path> | lexical | remote[:<url>]
struct ScorerSpec {
    std::string kind;
    std::string arg;
};

ScorerSpec parse_scorer_spec(const std::string& raw) {
    const auto colon = raw.find(':');
    ScorerSpec spec;
    spec.kind = colon == std::string::npos ? raw : raw.substr(0, colon);
    spec.arg = colon == std::string::npos ? "" : raw.substr(colon + 1);
    if (spec.kind == "remote" && spec.arg.empty()) {
        if (const char* env = std::getenv("THINKDEX_SCORER_URL")) spec.arg = env;
        if (spec.arg.empty())
            throw CLI::ValidationError("--scorer", "remote scorer needs a url (or THINKDEX_SCORER_URL)");
    }
    if (spec.kind != "oracle" && spec.kind != "lexical" && spec.kind != "remote")
        throw CLI::ValidationError("--scorer", "expected oracle:<path>, lexical, or remote:<url>");
    if (spec.kind == "oracle" && spec.arg.empty())
        throw CLI::ValidationError("--scorer", "oracle scorer needs a script path");
    return spec;
}

/// Oracle scripts: either JSONL records {"query_id":..., "script":...} or a
/// plain text file holding one script applied to every query.
std::map<std::string, std::string> load_oracle_scripts(const std::string& path) {
    std::map<std::string, std::string> scripts;
    std::string fallback;
    io::for_each_line(path, [&](size_t, std::string_view line) {
        if (line.empty()) return;
        json j = json::parse(line, nullptr, false);
        if (j.is_object() && j.contains("script")) {
            scripts[j.value("query_id", std::string("*"))] = j["script"].get<std::string>();
        } else {
            fallback += fallback.empty() ? std::string(line) : "\n" + std::string(line);
        }
    });
    if (!fallback.empty()) scripts["*"] = fallback;
    if (scripts.empty()) throw MalformedRecord("oracle script file is empty: " + path);
    return scripts;
}

ScorerFactory make_scorer_factory(const ScorerSpec& spec, const LoadedStack& stack,
                                  std::shared_ptr<std::map<std::string, std::string>> scripts) {
    if (spec.kind == "oracle") {
        const Vocabulary* vocab = &stack.vocab;
        return [scripts, vocab](const QueryRecord& q, size_t prompt_len) -> std::unique_ptr<Scorer> {
            auto it = scripts->find(q.query_id);
            if (it == scripts->end()) it = scripts->find("*");
            if (it == scripts->end())
                throw MalformedRecord("no oracle script for query '" + q.query_id + "'");
            return std::make_unique<OracleScorer>(vocab->encode(it->second), prompt_len);
        };
    }
    if (spec.kind == "lexical") {
        const FmIndex* ix = &stack.index;
        return [ix](const QueryRecord&, size_t) -> std::unique_ptr<Scorer> {
            return std::make_unique<LexicalScorer>(*ix);
        };
    }
    const std::string url = spec.arg;
    return [url](const QueryRecord&, size_t) -> std::unique_ptr<Scorer> {
        return std::make_unique<RemoteScorer>(url);
    };
}

json sequence_to_json(const DecodedSequence& seq, const Vocabulary& vocab) {
    json spans = json::array();
    for (const auto& span : seq.spans) {
        if (const auto* t = std::get_if<ThoughtSpan>(&span)) {
            spans.push_back({{"type", "thought"}, {"text", vocab.decode(t->tokens)}});
        } else {
            const auto& d = std::get<DocidSpan>(span);
            spans.push_back({{"type", "docid"}, {"docid", d.docid}, {"doc_ids", d.doc_ids}});
        }
    }
    return json{{"spans", std::move(spans)},
                {"retrieved", retrieved_docs(seq)},
                {"truncated", seq.truncated},
                {"truncation_reason", to_string(seq.reason)},
                {"generated_tokens", seq.generated_tokens}};
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_build_index(const GlobalOpts& g, const std::string& corpus_path, const std::string& out_path,
                    uint32_t sa_rate, bool run_scan) {
    emit_config(g, "build-index",
                {{"corpus", corpus_path}, {"out", out_path}, {"sa-rate", std::to_string(sa_rate)},
                 {"allowed-mode", run_scan ? "run-scan" : "wavelet"}});
    Corpus corpus = ingest_corpus(corpus_path);
    if (corpus.non_indexable_count() > 0)
        std::cerr << "[thinkdex] warning: " << corpus.non_indexable_count()
                  << " documents have no triples and are not indexable\n";
    Vocabulary vocab = Vocabulary::build(corpus);
    FmBuildConfig cfg;
    cfg.sa_sample_rate = sa_rate;
    cfg.allowed_mode = run_scan ? AllowedNextMode::run_scan : AllowedNextMode::wavelet;
    FmIndex ix = FmIndex::build(corpus, vocab, cfg);
    ix.serialize(out_path);
    const auto bytes = io::file_size_bytes(out_path);
    if (g.format == OutputFormat::tsv) {
        std::cout << "docids\ttokens\tvocab\tbytes\n";
        std::cout << ix.docid_count() << '\t' << ix.text_length() << '\t' << vocab.size() << '\t'
                  << bytes << "\n";
    } else {
        std::cout << json{{"type", "index"},
                          {"docids", ix.docid_count()},
                          {"tokens", ix.text_length()},
                          {"vocab", vocab.size()},
                          {"bytes", bytes}}
                         .dump()
                  << "\n";
    }
    return 0;
}

DecodeConfig decode_config_from(const GlobalOpts& g, size_t max_docids, size_t max_hops,
                                size_t max_tokens, bool sample, std::optional<std::string> stop_word,
                                const Vocabulary& vocab) {
    DecodeConfig cfg;
    cfg.max_docids = max_docids;
    cfg.max_hops = max_hops;
    cfg.max_total_tokens = max_tokens;
    cfg.policy = sample ? DecodePolicy::sample : DecodePolicy::greedy;
    cfg.seed = g.seed;
    if (stop_word) {
        const TokenId id = vocab.id_of(*stop_word);
        if (id == kUnknownId && *stop_word != std::string(kUnknownLiteral))
            throw CLI::ValidationError("--stop-token", "token not in vocabulary: " + *stop_word);
        cfg.stop_token = id;
    }
    return cfg;
}

int cmd_decode(const GlobalOpts& g, const std::string& index_path, const std::string& corpus_path,
               const std::string& scorer_raw, const std::string& query, size_t max_docids,
               size_t max_hops, size_t max_tokens, bool sample, std::optional<std::string> stop_word) {
    emit_config(g, "decode",
                {{"index", index_path}, {"corpus", corpus_path}, {"scorer", scorer_raw}, {"query", query}});
    const ScorerSpec spec = parse_scorer_spec(scorer_raw);
    LoadedStack stack = load_stack(g, index_path, corpus_path);
    auto scripts = std::make_shared<std::map<std::string, std::string>>();
    if (spec.kind == "oracle") *scripts = load_oracle_scripts(spec.arg);
    const ScorerFactory factory = make_scorer_factory(spec, stack, scripts);

    const DecodeConfig cfg =
        decode_config_from(g, max_docids, max_hops, max_tokens, sample, stop_word, stack.vocab);
    QueryRecord rec{"cli", query, {"-"}};
    auto scorer = factory(rec, stack.vocab.encode(query).size());
    DecodeSession session(query, stack.index, stack.corpus, stack.vocab, *scorer, cfg);
    const DecodedSequence seq = session.run();

    json out = sequence_to_json(seq, stack.vocab);
    out["type"] = "decode";
    out["query"] = query;
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& index_path, const std::string& corpus_path,
             const std::string& queries_path, const std::string& scorer_raw, const std::string& out_path,
             size_t max_docids, size_t max_hops, size_t max_tokens, bool no_timing) {
    emit_config(g, "eval",
                {{"index", index_path},
                 {"corpus", corpus_path},
                 {"queries", queries_path},
                 {"scorer", scorer_raw},
                 {"out", out_path.empty() ? "-" : out_path}});
    const ScorerSpec spec = parse_scorer_spec(scorer_raw);
    LoadedStack stack = load_stack(g, index_path, corpus_path);
    auto scripts = std::make_shared<std::map<std::string, std::string>>();
    if (spec.kind == "oracle") *scripts = load_oracle_scripts(spec.arg);
    const ScorerFactory factory = make_scorer_factory(spec, stack, scripts);
    const auto queries = load_queries(queries_path);

    DecodeConfig cfg;
    cfg.max_docids = max_docids;
    cfg.max_hops = max_hops;
    cfg.max_total_tokens = max_tokens;
    cfg.seed = g.seed;
    EvalReport report = run_eval(queries, stack.index, stack.corpus, stack.vocab, factory, cfg, g.threads);
    if (report.missing_gold_total > 0)
        std::cerr << "[thinkdex] warning: " << report.missing_gold_total
                  << " gold doc ids missing from corpus (kept)\n";
    if (no_timing)
        for (auto& row : report.rows) row.latency_ms = row.scorer_ms = 0.0;

    std::ostringstream body;
    body << "query_id\trecall\tacc_r\tn_retrieved\tn_docid_spans\tlatency_ms\tscorer_ms\ttruncated\t"
            "failed\n";
    for (const auto& r : report.rows) {
        body << r.query_id << '\t' << r.recall << '\t' << r.acc_r << '\t' << r.n_retrieved << '\t'
             << r.n_docid_spans << '\t' << r.latency_ms << '\t' << r.scorer_ms << '\t'
             << (r.truncated ? 1 : 0) << '\t' << (r.failed ? 1 : 0) << "\n";
    }
    const EvalAggregates agg = no_timing ? recompute_aggregates(report.rows) : report.aggregates;
    const json summary{{"type", "summary"},
                       {"n_queries", agg.n_queries},
                       {"mean_recall", agg.mean_recall},
                       {"mean_retrieved", agg.mean_retrieved},
                       {"mean_latency_ms", no_timing ? 0.0 : agg.mean_latency_ms},
                       {"truncation_rate", agg.truncation_rate},
                       {"failure_rate", agg.failure_rate},
                       {"missing_gold", report.missing_gold_total}};
    body << summary.dump() << "\n";

    if (out_path.empty() || out_path == "-") {
        std::cout << body.str();
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw FileMissing("cannot open for writing: " + out_path);
        out << body.str();
        std::cout << summary.dump() << "\n";
    }
    return 0;
}

int cmd_bench(const GlobalOpts& g, const std::string& index_path, const std::string& corpus_path,
              const std::string& queries_path, const std::string& scorer_raw, size_t repeats) {
    emit_config(g, "bench",
                {{"index", index_path},
                 {"corpus", corpus_path},
                 {"queries", queries_path},
                 {"scorer", scorer_raw},
                 {"repeats", std::to_string(repeats)}});
    const ScorerSpec spec = parse_scorer_spec(scorer_raw);
    LoadedStack stack = load_stack(g, index_path, corpus_path);
    auto scripts = std::make_shared<std::map<std::string, std::string>>();
    if (spec.kind == "oracle") *scripts = load_oracle_scripts(spec.arg);
    const ScorerFactory factory = make_scorer_factory(spec, stack, scripts);
    const auto queries = load_queries(queries_path);

    DecodeConfig cfg;
    cfg.seed = g.seed;
    // bench is single-threaded regardless of --threads
    const LatencyReport r =
        bench_latency(queries, stack.index, stack.corpus, stack.vocab, factory, cfg, repeats);
    const json rec{{"type", "bench"},         {"mean_ms", r.mean_ms},
                   {"p50_ms", r.p50_ms},      {"p95_ms", r.p95_ms},
                   {"per_step_us", r.per_step_us}, {"scorer_per_step_us", r.scorer_per_step_us},
                   {"total_steps", r.total_steps}, {"corpus_tokens", r.corpus_tokens},
                   {"repeats", r.repeats}};
    std::cout << rec.dump() << "\n";
    return 0;
}

int cmd_index_size(const GlobalOpts& g, const std::string& index_path, const std::string& corpus_path) {
    emit_config(g, "index-size", {{"index", index_path}, {"corpus", corpus_path}});
    const auto r = index_size_report(index_path, corpus_path);
    if (g.format == OutputFormat::tsv) {
        std::cout << "index_bytes\tcorpus_bytes\tratio\n";
        std::cout << r.index_bytes << '\t' << r.corpus_bytes << '\t' << r.ratio << "\n";
    } else {
        std::cout << json{{"type", "index-size"},
                          {"index_bytes", r.index_bytes},
                          {"corpus_bytes", r.corpus_bytes},
                          {"ratio", r.ratio}}
                         .dump()
                  << "\n";
    }
    return 0;
}

int cmd_analyze_overlap(const GlobalOpts& g, const std::string& corpus_path,
                        const std::string& queries_path, const std::string& range) {
    emit_config(g, "analyze overlap",
                {{"corpus", corpus_path}, {"queries", queries_path}, {"n", range}});
    size_t n_lo = 4, n_hi = 4;
    const auto dots = range.find("..");
    if (dots == std::string::npos) {
        n_lo = n_hi = std::stoul(range);
    } else {
        n_lo = std::stoul(range.substr(0, dots));
        n_hi = std::stoul(range.substr(dots + 2));
    }
    if (n_lo < 1 || n_hi < n_lo) throw CLI::ValidationError("--n", "bad n-gram range: " + range);

    Corpus corpus = ingest_corpus(corpus_path);
    const auto queries = load_queries(queries_path);
    if (queries.empty()) throw NoQueries(queries_path);

    std::cout << "n\tmean_overlap\tqueries_counted\n";
    for (size_t n = n_lo; n <= n_hi; ++n) {
        double sum = 0.0;
        size_t counted = 0;
        for (const auto& q : queries) {
            std::vector<const Document*> gold;
            for (const auto& id : q.gold_doc_ids)
                if (const Document* d = corpus.find(id)) gold.push_back(d);
            try {
                sum += ngram_overlap(q.question, gold, n);
                ++counted;
            } catch (const QuestionTooShort&) {
                // short questions are skipped for this n, matching the metric's domain
            }
        }
        std::cout << n << '\t' << (counted ? sum / static_cast<double>(counted) : 0.0) << '\t' << counted
                  << "\n";
    }
    return 0;
}

int cmd_analyze_collisions(const GlobalOpts& g, const std::string& corpus_path) {
    emit_config(g, "analyze collisions", {{"corpus", corpus_path}});
    Corpus corpus = ingest_corpus(corpus_path);
    const auto s = corpus.collision_stats();
    if (g.format == OutputFormat::tsv) {
        std::cout << "distinct_docids\tge2\tge3\tfrac_ge2\tfrac_ge3\n";
        std::cout << s.distinct_docids << '\t' << s.ge2 << '\t' << s.ge3 << '\t' << s.frac_ge2 << '\t'
                  << s.frac_ge3 << "\n";
    } else {
        std::cout << json{{"type", "collisions"},
                          {"distinct_docids", s.distinct_docids},
                          {"ge2", s.ge2},
                          {"ge3", s.ge3},
                          {"frac_ge2", s.frac_ge2},
                          {"frac_ge3", s.frac_ge3}}
                         .dump()
                  << "\n";
    }
    return 0;
}

int cmd_kto_loss(const GlobalOpts& g, const std::string& batch_path, double beta, double tau,
                 const std::string& value_fn, bool lambda_auto, double lambda_d, double lambda_u) {
    emit_config(g, "kto-loss",
                {{"batch", batch_path},
                 {"beta", std::to_string(beta)},
                 {"tau", std::to_string(tau)},
                 {"value-fn", value_fn},
                 {"lambda-auto", lambda_auto ? "1" : "0"}});
    KtoConfig cfg;
    cfg.beta = beta;
    cfg.tau = tau;
    cfg.lambda_d = lambda_d;
    cfg.lambda_u = lambda_u;
    cfg.lambda_auto = lambda_auto;
    if (value_fn == "logistic")
        cfg.value_fn = KtoConfig::ValueFn::logistic;
    else if (value_fn != "linear")
        throw CLI::ValidationError("--value-fn", "expected linear or logistic");

    // batch records: {"query_id":..., "logp_policy":..., "logp_ref":..., "acc_r":...}
    std::vector<KtoExample> batch;
    size_t discarded = 0;
    io::for_each_line(batch_path, [&](size_t line_no, std::string_view line) {
        if (line.empty()) return;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw MalformedRecord("line " + std::to_string(line_no) + ": not a JSON object");
        try {
            const double acc = j.at("acc_r").get<double>();
            const auto label = label_sample(acc, cfg.tau);
            if (!label) {
                ++discarded;
                return;
            }
            KtoExample ex;
            ex.query_id = j.value("query_id", std::string{});
            ex.logp_policy = j.at("logp_policy").get<double>();
            ex.logp_ref = j.at("logp_ref").get<double>();
            ex.label = *label;
            batch.push_back(std::move(ex));
        } catch (const json::exception& e) {
            throw MalformedRecord("line " + std::to_string(line_no) + ": " + e.what());
        }
    });
    if (batch.empty()) throw NoLabeledExamples("no desirable or undesirable examples after partitioning");
    const KtoBatchResult res = kto_loss(batch, cfg);

    json per = json::array();
    for (size_t i = 0; i < batch.size(); ++i) {
        per.push_back({{"query_id", batch[i].query_id},
                       {"label", batch[i].label == Desirability::desirable ? "desirable" : "undesirable"},
                       {"v", res.per_example_v[i]},
                       {"grad_logp_policy", res.grad_logp_policy[i]}});
    }
    std::cout << json{{"type", "kto-loss"},
                      {"loss", res.loss},
                      {"z0", res.z0},
                      {"lambda_d", res.lambda_d},
                      {"lambda_u", res.lambda_u},
                      {"n_desirable", res.n_desirable},
                      {"n_undesirable", res.n_undesirable},
                      {"n_discarded", discarded},
                      {"per_example", std::move(per)}}
                     .dump()
              << "\n";
    return 0;
}

int cmd_train_toy(const GlobalOpts& g, size_t steps, double lr, double beta, double tau,
                  size_t batch_size) {
    emit_config(g, "train-toy",
                {{"steps", std::to_string(steps)},
                 {"lr", std::to_string(lr)},
                 {"beta", std::to_string(beta)},
                 {"tau", std::to_string(tau)},
                 {"batch-size", std::to_string(batch_size)}});
    const ToyFixture fixture = make_toy_fixture();
    ToyTrainConfig cfg;
    cfg.steps = steps;
    cfg.learning_rate = lr;
    cfg.batch_size = batch_size;
    cfg.seed = g.seed ? g.seed : 7;
    cfg.kto.beta = beta;
    cfg.kto.tau = tau;
    const ToyTrainReport report = train_toy_policy(fixture, cfg);

    std::cout << "step\tloss\tmean_batch_acc\tgreedy_acc\n";
    for (const auto& cp : report.curve)
        std::cout << cp.step << '\t' << cp.loss << '\t' << cp.mean_batch_acc << '\t' << cp.greedy_acc
                  << "\n";
    std::cout << json{{"type", "train-toy"},
                      {"steps_run", report.steps_run},
                      {"final_greedy_acc", report.final_greedy_acc}}
                     .dump()
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"thinkdex: triple-docid indexing, hybrid decoding, and retrieval evaluation"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "RNG seed for sampling policies");
    app.add_option("--threads", g.threads, "parallel evaluation workers");
    app.add_option("--log-level", g.log_level, "quiet|info|debug")
        ->check(CLI::IsMember({"quiet", "info", "debug"}));
    std::string format = "tsv";
    app.add_option("--format", format, "tsv|records")->check(CLI::IsMember({"tsv", "records"}));

    // build-index
    auto* build = app.add_subcommand("build-index", "ingest a corpus and build the docid index");
    std::string b_corpus, b_out;
    uint32_t b_sa_rate = 32;
    bool b_run_scan = false, b_wavelet = false;
    build->add_option("--corpus", b_corpus, "corpus jsonl")->required();
    build->add_option("--out", b_out, "output index path")->required();
    build->add_option("--sa-rate", b_sa_rate, "suffix-array sampling rate");
    build->add_flag("--wavelet", b_wavelet, "wavelet allowed-next queries (default)");
    build->add_flag("--run-scan", b_run_scan, "run-boundary allowed-next scan");

    // decode
    auto* dec = app.add_subcommand("decode", "run one hybrid decoding session");
    std::string d_index, d_corpus, d_scorer, d_query;
    size_t d_max_docids = 10, d_max_hops = 5, d_max_tokens = 2048;
    bool d_sample = false;
    std::string d_stop;
    dec->add_option("--index", d_index)->required();
    dec->add_option("--corpus", d_corpus)->required();
    dec->add_option("--scorer", d_scorer, "oracle:<path>|lexical|remote:<url>")->required();
    dec->add_option("--query", d_query)->required();
    dec->add_option("--max-docids", d_max_docids);
    dec->add_option("--max-hops", d_max_hops);
    dec->add_option("--max-tokens", d_max_tokens);
    dec->add_flag("--sample", d_sample, "temperature sampling instead of greedy");
    dec->add_option("--stop-token", d_stop, "vocabulary token ending the session");

    // eval
    auto* ev = app.add_subcommand("eval", "decode a query set and report metrics");
    std::string e_index, e_corpus, e_queries, e_scorer, e_out;
    size_t e_max_docids = 10, e_max_hops = 5, e_max_tokens = 2048;
    bool e_no_timing = false;
    ev->add_option("--index", e_index)->required();
    ev->add_option("--corpus", e_corpus)->required();
    ev->add_option("--queries", e_queries)->required();
    ev->add_option("--scorer", e_scorer)->required();
    ev->add_option("--out", e_out, "report path (default stdout)");
    ev->add_option("--max-docids", e_max_docids);
    ev->add_option("--max-hops", e_max_hops);
    ev->add_option("--max-tokens", e_max_tokens);
    ev->add_flag("--no-timing", e_no_timing, "zero latency columns for byte-stable output");

    // bench
    auto* bench = app.add_subcommand("bench", "latency benchmark (single-threaded)");
    std::string n_index, n_corpus, n_queries, n_scorer;
    size_t n_repeats = 3;
    bench->add_option("--index", n_index)->required();
    bench->add_option("--corpus", n_corpus)->required();
    bench->add_option("--queries", n_queries)->required();
    bench->add_option("--scorer", n_scorer)->required();
    bench->add_option("--repeats", n_repeats);

    // index-size
    auto* size = app.add_subcommand("index-size", "on-disk footprint of index vs corpus");
    std::string s_index, s_corpus;
    size->add_option("--index", s_index)->required();
    size->add_option("--corpus", s_corpus)->required();

    // analyze
    auto* analyze = app.add_subcommand("analyze", "corpus analyses");
    analyze->require_subcommand(1);
    auto* overlap = analyze->add_subcommand("overlap", "question/document n-gram overlap");
    std::string o_corpus, o_queries, o_range = "4..12";
    overlap->add_option("--corpus", o_corpus)->required();
    overlap->add_option("--queries", o_queries)->required();
    overlap->add_option("--n", o_range, "n or lo..hi");
    auto* collisions = analyze->add_subcommand("collisions", "triple docid collision stats");
    std::string c_corpus;
    collisions->add_option("--corpus", c_corpus)->required();

    // kto-loss
    auto* kto = app.add_subcommand("kto-loss", "KTO loss over a batch of log-probabilities");
    std::string k_batch, k_value_fn = "linear";
    double k_beta = 0.1, k_tau = 0.5, k_lambda_d = 1.0, k_lambda_u = 1.0;
    bool k_lambda_auto = false;
    kto->add_option("--batch", k_batch)->required();
    kto->add_option("--beta", k_beta);
    kto->add_option("--tau", k_tau);
    kto->add_option("--value-fn", k_value_fn)->check(CLI::IsMember({"linear", "logistic"}));
    kto->add_flag("--lambda-auto", k_lambda_auto, "derive lambda_u from class imbalance");
    kto->add_option("--lambda-d", k_lambda_d);
    kto->add_option("--lambda-u", k_lambda_u);

    // train-toy
    auto* toy = app.add_subcommand("train-toy", "KTO training loop on the built-in fixture");
    size_t t_steps = 500, t_batch = 8;
    double t_lr = 0.5, t_beta = 0.1, t_tau = 0.5;
    toy->add_option("--steps", t_steps);
    toy->add_option("--lr", t_lr);
    toy->add_option("--beta", t_beta);
    toy->add_option("--tau", t_tau);
    toy->add_option("--batch-size", t_batch);

    if (argc <= 1) {
        std::cerr << app.help() << "\n";
        return 1;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    g.format = format == "records" ? OutputFormat::records : OutputFormat::tsv;

    try {
        if (build->parsed()) return cmd_build_index(g, b_corpus, b_out, b_sa_rate, b_run_scan);
        if (dec->parsed())
            return cmd_decode(g, d_index, d_corpus, d_scorer, d_query, d_max_docids, d_max_hops,
                              d_max_tokens, d_sample,
                              d_stop.empty() ? std::nullopt : std::optional<std::string>(d_stop));
        if (ev->parsed())
            return cmd_eval(g, e_index, e_corpus, e_queries, e_scorer, e_out, e_max_docids, e_max_hops,
                            e_max_tokens, e_no_timing);
        if (bench->parsed()) return cmd_bench(g, n_index, n_corpus, n_queries, n_scorer, n_repeats);
        if (size->parsed()) return cmd_index_size(g, s_index, s_corpus);
        if (analyze->parsed()) {
            if (overlap->parsed()) return cmd_analyze_overlap(g, o_corpus, o_queries, o_range);
            return cmd_analyze_collisions(g, c_corpus);
        }
        if (kto->parsed())
            return cmd_kto_loss(g, k_batch, k_beta, k_tau, k_value_fn, k_lambda_auto, k_lambda_d,
                                k_lambda_u);
        if (toy->parsed()) return cmd_train_toy(g, t_steps, t_lr, t_beta, t_tau, t_batch);
        std::cerr << app.help() << "\n";
        return 1;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
