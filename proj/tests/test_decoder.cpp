#include <gtest/gtest.h>

#include <random>

#include "thinkdex/decoder.hpp"
#include "testutil.hpp"

using namespace thinkdex;

namespace {

struct Fixture {
    Corpus corpus;
    Vocabulary vocab;
    FmIndex index;
};

// Corpus whose docid tokens double as thought words ("think", "done", ...),
// so scripted thought spans stay in-vocabulary.
Fixture make_fixture() {
    std::vector<Corpus::RecordInput> records;
    const char* triples[4][3] = {{"think hard", "about", "graphs"},
                                 {"done deal", "covers", "contracts"},
                                 {"quick brown", "fox", "jumps"},
                                 {"lazy dog", "sleeps", "here"}};
    for (int i = 0; i < 4; ++i) {
        Corpus::RecordInput r;
        r.doc_id = "doc" + std::to_string(i + 1);
        r.triples.push_back({triples[i][0], triples[i][1], triples[i][2]});
        records.push_back(std::move(r));
    }
    Fixture f{Corpus::from_records(records), {}, {}};
    f.vocab = Vocabulary::build(f.corpus);
    f.index = FmIndex::build(f.corpus, f.vocab);
    return f;
}

TokenSeq script_for(const Fixture& f, const std::string& text) { return f.vocab.encode(text); }

}  // namespace

TEST(DecodeSession, FreshSessionState) {
    Fixture f = make_fixture();
    OracleScorer scorer({}, 1);
    DecodeSession s("graphs", f.index, f.corpus, f.vocab, scorer, {});
    EXPECT_EQ(s.mode(), DecodeMode::thought);
    EXPECT_TRUE(s.spans().empty());
    EXPECT_FALSE(s.finished());
    EXPECT_EQ(s.generated_tokens(), 0u);
}

TEST(DecodeSession, VocabMismatchDetected) {
    Fixture f = make_fixture();
    auto other = testutil::make_synthetic_corpus(5, 5, 999);
    OracleScorer scorer({}, 1);
    EXPECT_THROW(DecodeSession("q", f.index, f.corpus, other.vocab, scorer, {}), VocabMismatch);
}

TEST(DecodeSession, EmptyQueryRejected) {
    Fixture f = make_fixture();
    OracleScorer scorer({}, 1);
    EXPECT_THROW(DecodeSession("", f.index, f.corpus, f.vocab, scorer, {}), EmptyQuery);
}

TEST(DecodeSession, ScriptedReplayProducesSpans) {
    Fixture f = make_fixture();
    const std::string y = "think <docid_start> quick brown, fox, jumps <docid_end> done";
    const TokenSeq query = f.vocab.encode("graphs");
    TokenSeq script = script_for(f, y);
    const TokenId stop = f.vocab.id_of("here");
    script.push_back(stop);

    OracleScorer scorer(script, query.size());
    DecodeConfig cfg;
    cfg.stop_token = stop;
    DecodeSession s("graphs", f.index, f.corpus, f.vocab, scorer, cfg);
    const DecodedSequence out = s.run();

    ASSERT_EQ(out.spans.size(), 3u);
    const auto* t1 = std::get_if<ThoughtSpan>(&out.spans[0]);
    const auto* d1 = std::get_if<DocidSpan>(&out.spans[1]);
    const auto* t2 = std::get_if<ThoughtSpan>(&out.spans[2]);
    ASSERT_TRUE(t1 && d1 && t2);
    EXPECT_EQ(f.vocab.decode(t1->tokens), "think");
    EXPECT_EQ(d1->docid, "<docid_start> quick brown, fox, jumps <docid_end>");
    EXPECT_EQ(d1->doc_ids, std::vector<std::string>{"doc3"});
    EXPECT_EQ(f.vocab.decode(t2->tokens), "done");
    EXPECT_FALSE(out.truncated);
    EXPECT_EQ(retrieved_docs(out), std::vector<std::string>{"doc3"});
}

TEST(DecodeSession, AlternationWithLeadingDocid) {
    Fixture f = make_fixture();
    const TokenSeq query = f.vocab.encode("graphs");
    TokenSeq script = script_for(f, "<docid_start> lazy dog, sleeps, here <docid_end>");
    const TokenId stop = f.vocab.id_of("done");
    script.push_back(stop);
    OracleScorer scorer(script, query.size());
    DecodeConfig cfg;
    cfg.stop_token = stop;
    DecodeSession s("graphs", f.index, f.corpus, f.vocab, scorer, cfg);
    const DecodedSequence out = s.run();

    // alternation holds via an empty leading thought span
    ASSERT_EQ(out.spans.size(), 2u);
    const auto* t1 = std::get_if<ThoughtSpan>(&out.spans[0]);
    ASSERT_TRUE(t1);
    EXPECT_TRUE(t1->tokens.empty());
    EXPECT_TRUE(std::holds_alternative<DocidSpan>(out.spans[1]));
}

TEST(DecodeSession, SingleDocidCorpusMaskNeverEmpty) {
    std::vector<Corpus::RecordInput> records(1);
    records[0].doc_id = "only";
    records[0].triples.push_back({"alpha beta", "gamma", "delta"});
    Corpus corpus = Corpus::from_records(records);
    Vocabulary vocab = Vocabulary::build(corpus);
    FmIndex ix = FmIndex::build(corpus, vocab);

    const TokenSeq query = vocab.encode("alpha");
    TokenSeq script = vocab.encode(std::string(corpus.docids()[0]));
    OracleScorer scorer(script, query.size());
    DecodeConfig cfg;
    cfg.max_hops = 1;
    DecodeSession s("alpha", ix, corpus, vocab, scorer, cfg);
    while (!s.finished()) {
        if (s.mode() == DecodeMode::docid) {
            // every constrained step must offer at least one candidate
            SUCCEED();
        }
        s.step();
    }
    const auto out = s.result();
    EXPECT_EQ(retrieved_docs(out), std::vector<std::string>{"only"});
}

TEST(DecodeSession, CollisionResolvesAllDocuments) {
    std::vector<Corpus::RecordInput> records(2);
    records[0].doc_id = "doc1";
    records[0].triples.push_back({"A", "married to", "B"});
    records[1].doc_id = "doc2";
    records[1].triples.push_back({"A", "married to", "B"});
    Corpus corpus = Corpus::from_records(records);
    Vocabulary vocab = Vocabulary::build(corpus);
    FmIndex ix = FmIndex::build(corpus, vocab);

    const TokenSeq query = vocab.encode("A");
    TokenSeq script = vocab.encode(std::string(corpus.docids()[0]));
    OracleScorer scorer(script, query.size());
    DecodeConfig cfg;
    cfg.max_hops = 1;
    DecodeSession s("A", ix, corpus, vocab, scorer, cfg);
    const auto out = s.run();
    EXPECT_EQ(retrieved_docs(out), (std::vector<std::string>{"doc1", "doc2"}));
}

TEST(DecodeSession, BudgetTruncationReported) {
    Fixture f = make_fixture();
    const TokenSeq query = f.vocab.encode("graphs");
    // script loops thought tokens forever; token budget must end the session
    TokenSeq script(64, f.vocab.id_of("think"));
    OracleScorer scorer(script, query.size());
    DecodeConfig cfg;
    cfg.max_total_tokens = 16;
    DecodeSession s("graphs", f.index, f.corpus, f.vocab, scorer, cfg);
    const auto out = s.run();
    EXPECT_TRUE(out.truncated);
    EXPECT_EQ(out.reason, TruncationReason::tokens);
    EXPECT_EQ(out.generated_tokens, 16u);
}

TEST(DecodeSession, HopBudgetStopsAfterSpans) {
    Fixture f = make_fixture();
    const TokenSeq query = f.vocab.encode("graphs");
    const std::string d3 = "<docid_start> quick brown, fox, jumps <docid_end>";
    const std::string d4 = "<docid_start> lazy dog, sleeps, here <docid_end>";
    TokenSeq script = script_for(f, d3 + " " + d4 + " " + d3);
    OracleScorer scorer(script, query.size());
    DecodeConfig cfg;
    cfg.max_hops = 2;
    DecodeSession s("graphs", f.index, f.corpus, f.vocab, scorer, cfg);
    const auto out = s.run();
    EXPECT_TRUE(out.truncated);
    EXPECT_EQ(out.reason, TruncationReason::hops);
    EXPECT_EQ(docid_span_count(out), 2u);
    EXPECT_EQ(retrieved_docs(out), (std::vector<std::string>{"doc3", "doc4"}));
}

TEST(DecodeSession, GreedyDeterminism) {
    auto synth = testutil::make_synthetic_corpus(40, 15, 2718);
    FmIndex ix = FmIndex::build(synth.corpus, synth.vocab);
    LexicalScorer scorer(ix);
    DecodeConfig cfg;
    cfg.max_hops = 3;
    cfg.max_total_tokens = 64;

    auto run_once = [&] {
        DecodeSession s("w1 w2 w3", ix, synth.corpus, synth.vocab, scorer, cfg);
        return s.run();
    };
    const auto a = run_once();
    const auto b = run_once();
    ASSERT_EQ(a.spans.size(), b.spans.size());
    EXPECT_EQ(retrieved_docs(a), retrieved_docs(b));
    EXPECT_EQ(a.generated_tokens, b.generated_tokens);
}

// Validity guarantee: random scorers over a small corpus can never emit a
// docid span outside the corpus map (exhaustive version of the acceptance
// criterion).
namespace {

class RandomScorer : public Scorer {
public:
    RandomScorer(size_t vocab_size, uint64_t seed, double marker_bias)
        : vocab_(vocab_size), seed_(seed), marker_bias_(marker_bias) {}

    ScoreResponse score(const ScoreRequest& req) const override {
        // deterministic per (seed, context): hash the context
        uint64_t h = seed_;
        for (TokenId t : req.context) h = h * 0x9e3779b97f4a7c15ULL + t + 1;
        std::mt19937_64 rng(h);
        std::uniform_real_distribution<double> uni(-4.0, 0.0);
        std::vector<std::pair<TokenId, double>> raw;
        if (req.candidate_mask) {
            for (TokenId t : *req.candidate_mask) raw.emplace_back(t, uni(rng));
        } else {
            for (TokenId t = 1; t < vocab_; ++t)
                raw.emplace_back(t, t == kStartMarkerId ? uni(rng) + marker_bias_ : uni(rng));
        }
        return make_response(std::move(raw));
    }

private:
    size_t vocab_;
    uint64_t seed_;
    double marker_bias_;
};

}  // namespace

TEST(DecodeSession, RandomScorersAlwaysEmitValidDocids) {
    auto synth = testutil::make_synthetic_corpus(50, 12, 31415, 2, 1);
    FmIndex ix = FmIndex::build(synth.corpus, synth.vocab);
    std::mt19937_64 rng(161803);
    size_t spans_seen = 0;
    for (int run = 0; run < 200; ++run) {
        RandomScorer scorer(synth.vocab.size(), rng(), 3.0);
        DecodeConfig cfg;
        cfg.policy = DecodePolicy::sample;
        cfg.seed = rng();
        cfg.max_total_tokens = 48;
        cfg.max_hops = 3;
        DecodeSession s("w1 w2", ix, synth.corpus, synth.vocab, scorer, cfg);
        const auto out = s.run();
        size_t idx = 0;
        for (const auto& span : out.spans) {
            if (const auto* d = std::get_if<DocidSpan>(&span)) {
                ++spans_seen;
                EXPECT_FALSE(synth.corpus.resolve_docid(d->docid).empty()) << d->docid;
                EXPECT_FALSE(d->doc_ids.empty());
            }
            // alternation: even positions are thought, odd are docid
            if (idx % 2 == 0)
                EXPECT_TRUE(std::holds_alternative<ThoughtSpan>(span));
            else
                EXPECT_TRUE(std::holds_alternative<DocidSpan>(span));
            ++idx;
        }
    }
    EXPECT_GT(spans_seen, 50u);  // the bias makes docid attempts common
}

TEST(RetrievedDocs, FirstOccurrenceUnionOrder) {
    DecodedSequence d;
    d.spans.push_back(ThoughtSpan{});
    d.spans.push_back(DocidSpan{{}, "a", {"d1"}});
    d.spans.push_back(ThoughtSpan{});
    d.spans.push_back(DocidSpan{{}, "b", {"d1", "d2"}});
    EXPECT_EQ(retrieved_docs(d), (std::vector<std::string>{"d1", "d2"}));

    DecodedSequence empty;
    empty.spans.push_back(ThoughtSpan{});
    EXPECT_TRUE(retrieved_docs(empty).empty());
}

TEST(DecodeSession, StepOnFinishedThrows) {
    Fixture f = make_fixture();
    const TokenSeq query = f.vocab.encode("graphs");
    TokenSeq script(4, f.vocab.id_of("think"));
    OracleScorer scorer(script, query.size());
    DecodeConfig cfg;
    cfg.max_total_tokens = 2;
    DecodeSession s("graphs", f.index, f.corpus, f.vocab, scorer, cfg);
    s.run();
    EXPECT_THROW(s.step(), InvariantViolation);
}
