#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "thinkdex/errors.hpp"
#include "thinkdex/io.hpp"
#include "thinkdex/unicode.hpp"

namespace thinkdex {

inline constexpr std::string_view kStartMarker = "<docid_start>";
inline constexpr std::string_view kEndMarker = "<docid_end>";
inline constexpr std::string_view kSeparatorLiteral = "<sep>";
inline constexpr std::string_view kUnknownLiteral = "<unk>";

/// Splits on breaking whitespace (see unicode::is_breaking_space). No-break
/// spaces stay inside tokens, which keeps escaped commas in one piece.
inline std::vector<std::string> split_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (uint32_t cp : unicode::decode_utf8(text)) {
        if (unicode::is_breaking_space(cp)) {
            if (!cur.empty()) {
                out.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            unicode::append_utf8(cur, cp);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

namespace detail {

constexpr uint32_t kNbsp = 0xA0;

inline bool is_reserved_literal(std::string_view tok) {
    return tok == kStartMarker || tok == kEndMarker || tok == kSeparatorLiteral || tok == kUnknownLiteral;
}

/// NFC, collapse breaking whitespace to single spaces, trim, then rewrite
/// every non-final "," so it is followed by exactly one NBSP. The NBSP form
/// keeps entity-internal commas distinct from the ", " field joiner, making
/// the flat docid format unambiguous. Idempotent.
inline std::string canonicalize_field(std::string_view raw, const std::string& doc_id, size_t triple_index) {
    std::vector<uint32_t> cps = unicode::nfc(unicode::decode_utf8(raw));

    std::vector<uint32_t> collapsed;
    collapsed.reserve(cps.size());
    bool pending_space = false;
    for (uint32_t cp : cps) {
        if (unicode::is_breaking_space(cp)) {
            pending_space = !collapsed.empty();
            continue;
        }
        if (pending_space) {
            collapsed.push_back(0x20);
            pending_space = false;
        }
        collapsed.push_back(cp);
    }

    std::vector<uint32_t> out;
    out.reserve(collapsed.size());
    for (size_t i = 0; i < collapsed.size(); ++i) {
        out.push_back(collapsed[i]);
        if (collapsed[i] != ',') continue;
        if (i + 1 >= collapsed.size()) continue;  // field-final comma stays bare
        if (collapsed[i + 1] == 0x20) {
            out.push_back(kNbsp);
            ++i;
        } else if (collapsed[i + 1] != kNbsp && collapsed[i + 1] != ',') {
            out.push_back(kNbsp);
        }
    }

    if (out.empty())
        throw EmptyTripleField("doc '" + doc_id + "', triple #" + std::to_string(triple_index));

    std::string field = unicode::encode_utf8(out);
    for (const std::string& tok : split_tokens(field)) {
        if (is_reserved_literal(tok))
            throw ReservedTokenInField("'" + tok + "' in doc '" + doc_id + "', triple #" +
                                       std::to_string(triple_index));
    }
    return field;
}

}  // namespace detail

/// A knowledge triple in canonical form: NFC, collapsed whitespace, internal
/// commas escaped with NBSP.
struct Triple {
    std::string head;
    std::string relation;
    std::string tail;

    static Triple canonical(std::string_view head, std::string_view relation, std::string_view tail,
                            const std::string& doc_id = "", size_t triple_index = 0) {
        return Triple{detail::canonicalize_field(head, doc_id, triple_index),
                      detail::canonicalize_field(relation, doc_id, triple_index),
                      detail::canonicalize_field(tail, doc_id, triple_index)};
    }

    bool operator==(const Triple&) const = default;
};

/// "<docid_start> head, relation, tail <docid_end>" over canonical fields.
inline std::string canonical_docid(const Triple& t) {
    std::string s;
    s.reserve(t.head.size() + t.relation.size() + t.tail.size() + 32);
    s.append(kStartMarker);
    s.push_back(' ');
    s.append(t.head);
    s.append(", ");
    s.append(t.relation);
    s.append(", ");
    s.append(t.tail);
    s.push_back(' ');
    s.append(kEndMarker);
    return s;
}

/// Display form of a canonical field: escaped commas rendered back as ", ".
inline std::string display_field(std::string_view canonical_field) {
    std::string out;
    const auto cps = unicode::decode_utf8(canonical_field);
    for (size_t i = 0; i < cps.size(); ++i) {
        if (cps[i] == ',' && i + 1 < cps.size() && cps[i + 1] == detail::kNbsp) {
            out += ", ";
            ++i;
            continue;
        }
        unicode::append_utf8(out, cps[i]);
    }
    return out;
}

struct Document {
    std::string doc_id;
    std::string title;
    std::string text;
    std::vector<Triple> triples;  // canonical, deduplicated, order preserved

    bool indexable() const { return !triples.empty(); }
};

/// Immutable after ingestion; safe to share across readers.
class Corpus {
public:
    struct RecordInput {
        std::string doc_id;
        std::string title;
        std::string text;
        std::vector<std::array<std::string, 3>> triples;
    };

    static Corpus from_records(const std::vector<RecordInput>& records) {
        Corpus c;
        for (const auto& r : records) c.add_record(r);
        return c;
    }

    Corpus() = default;
    Corpus(Corpus&&) = default;
    Corpus& operator=(Corpus&&) = default;
    // docid_order_ holds views into docid_map_ keys; copying would dangle.
    Corpus(const Corpus&) = delete;
    Corpus& operator=(const Corpus&) = delete;

    void add_record(const RecordInput& r) {
        if (r.doc_id.empty()) throw MalformedRecord("empty doc_id");
        if (doc_index_.count(r.doc_id)) throw DuplicateDocId(r.doc_id);
        Document doc{r.doc_id, r.title, r.text, {}};
        std::vector<std::string> docids;
        std::unordered_set<std::string> seen;
        for (size_t i = 0; i < r.triples.size(); ++i) {
            Triple t = Triple::canonical(r.triples[i][0], r.triples[i][1], r.triples[i][2], r.doc_id, i);
            std::string docid = canonical_docid(t);
            if (!seen.insert(docid).second) continue;  // within-document duplicate
            doc.triples.push_back(std::move(t));
            docids.push_back(std::move(docid));
        }
        doc_index_.emplace(r.doc_id, documents_.size());
        for (auto& docid : docids) {
            auto [it, inserted] = docid_map_.try_emplace(std::move(docid));
            if (inserted) docid_order_.push_back(it->first);
            it->second.insert(r.doc_id);
        }
        if (doc.triples.empty()) ++non_indexable_count_;
        documents_.push_back(std::move(doc));
    }

    const std::vector<Document>& documents() const { return documents_; }
    size_t size() const { return documents_.size(); }
    size_t non_indexable_count() const { return non_indexable_count_; }

    const Document* find(const std::string& doc_id) const {
        auto it = doc_index_.find(doc_id);
        return it == doc_index_.end() ? nullptr : &documents_[it->second];
    }

    bool has_doc(const std::string& doc_id) const { return doc_index_.count(doc_id) != 0; }

    /// Distinct canonical docid strings in first-occurrence order (document
    /// order, then triple order). This is the indexing order.
    const std::vector<std::string_view>& docids() const { return docid_order_; }

    /// All documents containing the triple behind `docid`; empty set if the
    /// docid is not in the corpus. Collisions are preserved.
    const std::set<std::string>& resolve_docid(const std::string& docid) const {
        static const std::set<std::string> kEmpty;
        auto it = docid_map_.find(docid);
        return it == docid_map_.end() ? kEmpty : it->second;
    }

    struct CollisionStats {
        double frac_ge2 = 0.0;
        double frac_ge3 = 0.0;
        size_t distinct_docids = 0;
        size_t ge2 = 0;
        size_t ge3 = 0;
    };

    CollisionStats collision_stats() const {
        if (docid_map_.empty()) throw EmptyCorpus("no docids in corpus");
        CollisionStats s;
        s.distinct_docids = docid_map_.size();
        for (const auto& [docid, docs] : docid_map_) {
            if (docs.size() >= 2) ++s.ge2;
            if (docs.size() >= 3) ++s.ge3;
        }
        s.frac_ge2 = static_cast<double>(s.ge2) / static_cast<double>(s.distinct_docids);
        s.frac_ge3 = static_cast<double>(s.ge3) / static_cast<double>(s.distinct_docids);
        return s;
    }

    void save_jsonl(std::ostream& os) const {
        for (const auto& d : documents_) {
            nlohmann::json rec;
            rec["doc_id"] = d.doc_id;
            rec["title"] = d.title;
            rec["text"] = d.text;
            auto arr = nlohmann::json::array();
            for (const auto& t : d.triples) arr.push_back({t.head, t.relation, t.tail});
            rec["triples"] = std::move(arr);
            os << rec.dump() << '\n';
        }
    }

    void save_jsonl(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw FileMissing("cannot open for writing: " + path);
        save_jsonl(out);
    }

private:
    std::vector<Document> documents_;
    std::unordered_map<std::string, size_t> doc_index_;
    // node-based map: string_views in docid_order_ stay valid across inserts
    std::map<std::string, std::set<std::string>> docid_map_;
    std::vector<std::string_view> docid_order_;
    size_t non_indexable_count_ = 0;
};

/// One JSON record per line:
/// {"doc_id": ..., "title": ..., "text": ..., "triples": [[h, r, t], ...]}
inline Corpus ingest_corpus(const std::string& path) {
    Corpus corpus;
    io::for_each_line(path, [&](size_t line_no, std::string_view line) {
        if (line.empty()) return;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw MalformedRecord("line " + std::to_string(line_no) + ": not a JSON object");
        Corpus::RecordInput rec;
        try {
            rec.doc_id = j.at("doc_id").get<std::string>();
            rec.title = j.value("title", std::string{});
            rec.text = j.value("text", std::string{});
            for (const auto& t : j.value("triples", nlohmann::json::array())) {
                if (!t.is_array() || t.size() != 3)
                    throw MalformedRecord("line " + std::to_string(line_no) + ": triple is not a 3-array");
                rec.triples.push_back({t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>()});
            }
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecord("line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            corpus.add_record(rec);
        } catch (const EmptyTripleField& e) {
            throw EmptyTripleField("line " + std::to_string(line_no) + ": " + e.what());
        }
    });
    return corpus;
}

// ---------------------------------------------------------------------------
// N-gram overlap between a question and a set of documents
// ---------------------------------------------------------------------------

namespace detail {

inline uint64_t ngram_hash(const std::vector<std::string>& toks, size_t begin, size_t n) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t k = 0; k < n; ++k) {
        h = io::fnv1a64(toks[begin + k], h);
        h = io::fnv1a64("\x1f", h);
    }
    return h;
}

}  // namespace detail

/// Fraction of the question's token n-grams that appear verbatim in any of
/// the documents' texts. Tokenization is the shared breaking-space split.
inline double ngram_overlap(std::string_view question, const std::vector<const Document*>& docs, size_t n) {
    if (n < 1) throw QuestionTooShort("n must be >= 1");
    const std::vector<std::string> q = split_tokens(question);
    if (q.size() < n)
        throw QuestionTooShort("n=" + std::to_string(n) + ", question has " + std::to_string(q.size()) +
                               " tokens");

    std::unordered_set<uint64_t> doc_grams;
    for (const Document* d : docs) {
        if (d == nullptr) continue;
        const std::vector<std::string> toks = split_tokens(d->text);
        if (toks.size() < n) continue;
        for (size_t i = 0; i + n <= toks.size(); ++i) doc_grams.insert(detail::ngram_hash(toks, i, n));
    }

    const size_t total = q.size() - n + 1;
    size_t hits = 0;
    for (size_t i = 0; i + n <= q.size(); ++i)
        if (doc_grams.count(detail::ngram_hash(q, i, n))) ++hits;
    return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace thinkdex
