#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "agentqpp/error.hpp"
#include "agentqpp/retrieval.hpp"

namespace agentqpp {

using json = nlohmann::json;

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c >= 0x80 || std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

DocumentStore::DocumentStore(std::vector<Document> docs) : docs_(std::move(docs)) {
    by_docno_.reserve(docs_.size());
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        const auto& d = docs_[i];
        if (d.docno.empty()) throw ArgumentError("document " + std::to_string(i + 1) + " has an empty docno");
        if (d.text.empty()) throw ArgumentError("document " + d.docno + " has empty text");
        if (!by_docno_.emplace(d.docno, i).second) throw ArgumentError("duplicate docno " + d.docno);
    }
}

const Document* DocumentStore::find(const std::string& docno) const {
    auto it = by_docno_.find(docno);
    return it == by_docno_.end() ? nullptr : &docs_[it->second];
}

const Document& DocumentStore::at(const std::string& docno) const {
    if (const auto* d = find(docno)) return *d;
    throw NotFoundError("unknown docno " + docno);
}

std::vector<Document> read_corpus_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus " + path);
    std::vector<Document> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto obj = json::parse(line);
            Document d;
            d.docno = obj.at("docno").get<std::string>();
            d.title = obj.value("title", std::string{});
            d.text = obj.at("text").get<std::string>();
            if (d.docno.empty()) throw ParseError("empty docno");
            if (d.text.empty()) throw ParseError("empty text");
            docs.push_back(std::move(d));
        } catch (const std::exception& e) {
            throw ParseError(path + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return docs;
}

LexicalIndex LexicalIndex::build(std::shared_ptr<const DocumentStore> docs) {
    if (!docs) throw ArgumentError("null document store");
    LexicalIndex idx;
    idx.docs_ = std::move(docs);
    const auto& all = idx.docs_->documents();
    idx.doc_lengths_.reserve(all.size());
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto tokens = tokenize(all[i].title + " " + all[i].text);
        std::map<std::string, std::uint32_t> tf;
        for (const auto& t : tokens) ++tf[t];
        for (auto& [term, count] : tf) {
            idx.postings_[term].push_back({static_cast<std::uint32_t>(i), count});
        }
        idx.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total += tokens.size();
    }
    idx.avg_doc_length_ = all.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(all.size());
    return idx;
}

std::uint32_t LexicalIndex::doc_length(const std::string& docno) const {
    const auto* d = docs_->find(docno);
    if (!d) throw NotFoundError("unknown docno " + docno);
    return doc_lengths_[static_cast<std::size_t>(d - docs_->documents().data())];
}

std::vector<std::pair<std::string, std::uint32_t>> LexicalIndex::postings(const std::string& term) const {
    std::vector<std::pair<std::string, std::uint32_t>> out;
    auto it = postings_.find(term);
    if (it == postings_.end()) return out;
    for (const auto& p : it->second) out.emplace_back(docs_->documents()[p.doc].docno, p.tf);
    return out;
}

std::size_t LexicalIndex::document_frequency(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

double LexicalIndex::idf(const std::string& term) const {
    const double n = static_cast<double>(doc_count());
    const double nt = static_cast<double>(document_frequency(term));
    return std::log(1.0 + (n - nt + 0.5) / (nt + 0.5));
}

RankedList LexicalIndex::search(const std::string& query, std::size_t k, const Bm25Params& params) const {
    if (k < 1) throw ArgumentError("search depth k must be >= 1");
    std::unordered_map<std::uint32_t, double> acc;
    // Repeated query terms contribute once per occurrence.
    for (const auto& term : tokenize(query)) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double w = idf(term);
        for (const auto& p : it->second) {
            const double tf = p.tf;
            const double norm = 1.0 - params.b + params.b * doc_lengths_[p.doc] / avg_doc_length_;
            acc[p.doc] += w * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
        }
    }
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(acc.size());
    for (const auto& [doc, s] : acc) scored.emplace_back(docs_->documents()[doc].docno, s);
    auto list = make_ranked_list(query, std::move(scored));
    if (list.entries.size() > k) list.entries.resize(k);
    return list;
}

double LexicalIndex::corpus_score(const std::string& query, const Bm25Params& params) const {
    double s = 0.0;
    for (const auto& term : tokenize(query)) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        double cf = 0.0;
        for (const auto& p : it->second) cf += p.tf;
        s += idf(term) * cf * (params.k1 + 1.0) / (cf + params.k1);
    }
    return s;
}

namespace {
constexpr const char* kIndexFormat = "agentqpp-lexical-index";
constexpr int kIndexVersion = 1;
}  // namespace

void LexicalIndex::save(const std::string& path) const {
    json j;
    j["format"] = kIndexFormat;
    j["version"] = kIndexVersion;
    auto& docs = j["documents"] = json::array();
    for (std::size_t i = 0; i < docs_->size(); ++i) {
        const auto& d = docs_->documents()[i];
        docs.push_back({{"docno", d.docno}, {"title", d.title}, {"text", d.text}, {"length", doc_lengths_[i]}});
    }
    auto& post = j["postings"] = json::object();
    for (const auto& [term, plist] : postings_) {
        auto arr = json::array();
        for (const auto& p : plist) arr.push_back({p.doc, p.tf});
        post[term] = std::move(arr);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write index " + path);
    out << j.dump() << '\n';
    if (!out) throw IoError("write failed for index " + path);
}

LexicalIndex LexicalIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open index " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (j.value("format", std::string{}) != kIndexFormat || j.value("version", 0) != kIndexVersion) {
        throw ParseError(path + ": not an agentqpp lexical index (version " + std::to_string(kIndexVersion) + ")");
    }
    try {
        std::vector<Document> docs;
        LexicalIndex idx;
        std::uint64_t total = 0;
        for (const auto& d : j.at("documents")) {
            docs.push_back({d.at("docno").get<std::string>(), d.at("title").get<std::string>(),
                            d.at("text").get<std::string>()});
            idx.doc_lengths_.push_back(d.at("length").get<std::uint32_t>());
            total += idx.doc_lengths_.back();
        }
        idx.docs_ = std::make_shared<const DocumentStore>(std::move(docs));
        for (const auto& [term, arr] : j.at("postings").items()) {
            auto& plist = idx.postings_[term];
            for (const auto& p : arr) {
                const auto doc = p.at(0).get<std::uint32_t>();
                if (doc >= idx.doc_lengths_.size()) throw ParseError("posting for term " + term + " out of range");
                plist.push_back({doc, p.at(1).get<std::uint32_t>()});
            }
        }
        idx.avg_doc_length_ = idx.doc_lengths_.empty()
                                  ? 0.0
                                  : static_cast<double>(total) / static_cast<double>(idx.doc_lengths_.size());
        return idx;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

RankedList search_lexical(const LexicalIndex& index, const std::string& query, std::size_t k) {
    return index.search(query, k);
}

}  // namespace agentqpp
