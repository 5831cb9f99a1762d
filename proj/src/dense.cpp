#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "agentqpp/error.hpp"
#include "agentqpp/retrieval.hpp"

namespace agentqpp {

namespace {

std::vector<double> parse_vector(std::string_view s, const std::string& where) {
    std::vector<double> out;
    while (!s.empty()) {
        const auto comma = s.find(',');
        auto field = s.substr(0, comma);
        while (!field.empty() && (field.front() == ' ')) field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc{} || ptr != field.data() + field.size()) {
            throw ParseError(where + ": bad number '" + std::string(field) + "'");
        }
        out.push_back(v);
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

// Shared reader for the `dim=<D>` + `key<TAB>vector` layout. The key is
// everything before the last tab.
template <typename Fn>
std::size_t read_vector_tsv(const std::string& path, Fn&& on_row) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": missing dim header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("dim=", 0) != 0) throw ParseError(path + ": line 1: expected dim=<D>");
    std::size_t dim = 0;
    const auto [ptr, ec] = std::from_chars(line.data() + 4, line.data() + line.size(), dim);
    if (ec != std::errc{} || ptr != line.data() + line.size() || dim == 0) {
        throw ParseError(path + ": line 1: bad dimension");
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto where = path + ": line " + std::to_string(lineno);
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos || tab == 0) throw ParseError(where + ": expected key<TAB>vector");
        auto vec = parse_vector(std::string_view(line).substr(tab + 1), where);
        if (vec.size() != dim) {
            throw ParseError(where + ": dimension mismatch (" + std::to_string(vec.size()) + " != " +
                             std::to_string(dim) + ")");
        }
        on_row(line.substr(0, tab), std::move(vec), where);
    }
    return dim;
}

}  // namespace

EmbeddingStore read_embeddings_tsv(const std::string& path) {
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    const auto dim = read_vector_tsv(path, [&](std::string key, std::vector<double> v, const std::string&) {
        rows.emplace_back(std::move(key), std::move(v));
    });
    EmbeddingStore store(dim);
    for (auto& [k, v] : rows) {
        try {
            store.add(k, std::move(v));
        } catch (const ArgumentError& e) {
            throw ParseError(path + ": " + e.what());
        }
    }
    return store;
}

void write_embeddings_tsv(const EmbeddingStore& store, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << "dim=" << store.dim() << '\n';
    for (const auto& [docno, vec] : store.vectors()) {
        out << docno << '\t';
        for (std::size_t i = 0; i < vec.size(); ++i) {
            char buf[32];
            const auto res = std::to_chars(buf, buf + sizeof buf, vec[i]);
            if (i) out << ',';
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
}

LookupEmbedder::LookupEmbedder(std::size_t dim, std::map<std::string, std::vector<double>> table)
    : dim_(dim), table_(std::move(table)) {
    if (dim_ == 0) throw ConfigError("embedder dimension must be >= 1");
}

LookupEmbedder LookupEmbedder::from_tsv(const std::string& path) {
    std::map<std::string, std::vector<double>> table;
    const auto dim = read_vector_tsv(path, [&](std::string key, std::vector<double> v, const std::string&) {
        table[std::move(key)] = std::move(v);
    });
    return LookupEmbedder(dim, std::move(table));
}

std::vector<std::vector<double>> LookupEmbedder::embed(std::span<const std::string> texts) const {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto it = table_.find(t);
        if (it == table_.end()) throw ConfigError("lookup embedder has no vector for text '" + t + "'");
        out.push_back(it->second);
    }
    return out;
}

std::vector<double> embed_query(const Embedder& embedder, const std::string& text) {
    const std::string texts[] = {text};
    auto vecs = embedder.embed(texts);
    if (vecs.size() != 1) throw ConfigError("embedder returned " + std::to_string(vecs.size()) + " vectors for 1 text");
    auto& v = vecs.front();
    if (v.size() != embedder.dim()) {
        throw ConfigError("embedder returned dimension " + std::to_string(v.size()) + ", expected " +
                          std::to_string(embedder.dim()));
    }
    if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
        throw ConfigError("embedder returned non-finite values");
    }
    return std::move(v);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return -std::numeric_limits<double>::infinity();
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

RankedList search_dense(const EmbeddingStore& store, std::span<const double> query_vec, std::size_t k,
                        std::vector<std::string>* warnings, const std::string& query_text) {
    if (k < 1) throw ArgumentError("search depth k must be >= 1");
    if (query_vec.size() != store.dim()) {
        throw ArgumentError("query vector has dimension " + std::to_string(query_vec.size()) + ", store has " +
                            std::to_string(store.dim()));
    }
    const bool zero_query = std::all_of(query_vec.begin(), query_vec.end(), [](double x) { return x == 0.0; });
    if (zero_query && warnings) warnings->push_back("zero-norm query vector; all documents score -inf");

    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(store.size());
    for (const auto& [docno, vec] : store.vectors()) {
        const double s = cosine_similarity(query_vec, vec);
        if (!zero_query && std::isinf(s) && warnings) {
            warnings->push_back("zero-norm document vector " + docno + " scored -inf");
        }
        scored.emplace_back(docno, s);
    }
    auto list = make_ranked_list(query_text, std::move(scored));
    if (list.entries.size() > k) list.entries.resize(k);
    return list;
}

TableScorer::TableScorer(std::map<std::string, double> by_docno, std::map<std::string, double> by_query_docno)
    : by_docno_(std::move(by_docno)), by_query_docno_(std::move(by_query_docno)) {}

TableScorer TableScorer::from_tsv(const std::string& path) {
    // Rows are `docno<TAB>score` or `query<TAB>docno<TAB>score`.
    std::ifstream in(path);
    if (!in) throw IoError("cannot open score table " + path);
    std::map<std::string, double> by_docno, by_pair;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto where = path + ": line " + std::to_string(lineno);
        const auto last = line.rfind('\t');
        if (last == std::string::npos) throw ParseError(where + ": expected tab-separated fields");
        const auto v = parse_vector(std::string_view(line).substr(last + 1), where);
        if (v.size() != 1) throw ParseError(where + ": expected one score");
        const auto key = line.substr(0, last);
        if (key.find('\t') == std::string::npos) {
            by_docno[key] = v[0];
        } else {
            by_pair[key] = v[0];
        }
    }
    return TableScorer(std::move(by_docno), std::move(by_pair));
}

std::vector<double> TableScorer::score(const std::string& query, std::span<const Document> docs) const {
    std::vector<double> out;
    out.reserve(docs.size());
    for (const auto& d : docs) {
        if (auto it = by_query_docno_.find(query + "\t" + d.docno); it != by_query_docno_.end()) {
            out.push_back(it->second);
        } else if (auto it2 = by_docno_.find(d.docno); it2 != by_docno_.end()) {
            out.push_back(it2->second);
        } else {
            throw RerankError("score table has no entry for " + d.docno);
        }
    }
    return out;
}

EmbeddingCosineScorer::EmbeddingCosineScorer(std::shared_ptr<const Embedder> embedder,
                                             std::shared_ptr<const EmbeddingStore> store)
    : embedder_(std::move(embedder)), store_(std::move(store)) {
    if (!embedder_ || !store_) throw ConfigError("embedding scorer needs an embedder and an embedding store");
    if (embedder_->dim() != store_->dim()) throw ConfigError("embedder and embedding store dimensions differ");
}

std::vector<double> EmbeddingCosineScorer::score(const std::string& query, std::span<const Document> docs) const {
    const auto q = embed_query(*embedder_, query);
    std::vector<double> out;
    out.reserve(docs.size());
    for (const auto& d : docs) {
        const auto* v = store_->find(d.docno);
        if (!v) throw RerankError("no embedding for " + d.docno);
        out.push_back(cosine_similarity(q, *v));
    }
    return out;
}

std::vector<double> FunctionScorer::score(const std::string& query, std::span<const Document> docs) const {
    std::vector<double> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.push_back(fn_(query, d));
    return out;
}

RankedList rerank(const Scorer& scorer, const RankedList& list, std::size_t depth, const DocumentStore& docs) {
    if (depth < 1) throw ArgumentError("rerank depth must be >= 1");
    const std::size_t m = std::min(depth, list.size());
    std::vector<Document> batch;
    batch.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto* d = docs.find(list.entries[i].docno);
        if (!d) throw RerankError("document " + list.entries[i].docno + " not in corpus");
        batch.push_back(*d);
    }
    std::vector<double> scores;
    try {
        scores = scorer.score(list.query_text, batch);
    } catch (const RerankError&) {
        throw;
    } catch (const std::exception& e) {
        throw RerankError(std::string("scorer failed: ") + e.what());
    }
    if (scores.size() != m) {
        throw RerankError("scorer returned " + std::to_string(scores.size()) + " scores for " + std::to_string(m) +
                          " documents");
    }
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (std::isnan(scores[i])) throw RerankError("scorer returned NaN for " + batch[i].docno);
        scored.emplace_back(batch[i].docno, scores[i]);
    }
    return make_ranked_list(list.query_text, std::move(scored));
}

}  // namespace agentqpp
