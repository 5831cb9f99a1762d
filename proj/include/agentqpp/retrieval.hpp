#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "agentqpp/types.hpp"

namespace agentqpp {

/// Lowercases ASCII letters and splits on every ASCII character that is not a
/// letter or digit. Bytes >= 0x80 are kept inside tokens so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

// ---------------------------------------------------------------------------
// Corpus

class DocumentStore {
public:
    DocumentStore() = default;
    /// Throws ArgumentError naming the docno on duplicates or empty fields.
    explicit DocumentStore(std::vector<Document> docs);

    std::size_t size() const noexcept { return docs_.size(); }
    const std::vector<Document>& documents() const noexcept { return docs_; }
    const Document* find(const std::string& docno) const;
    const Document& at(const std::string& docno) const;  // NotFoundError

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> by_docno_;
};

/// Reads corpus JSONL ({"docno","title","text"} per line). Errors carry the
/// 1-based line number.
std::vector<Document> read_corpus_jsonl(const std::string& path);

/// Reads `dim=<D>` followed by `docno<TAB>v1,...,vD` lines.
EmbeddingStore read_embeddings_tsv(const std::string& path);
void write_embeddings_tsv(const EmbeddingStore& store, const std::string& path);

// ---------------------------------------------------------------------------
// Lexical

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::uint32_t doc = 0;  // index into the document store
    std::uint32_t tf = 0;
};

class LexicalIndex {
public:
    /// Title and text are indexed together (joined with one space).
    static LexicalIndex build(std::shared_ptr<const DocumentStore> docs);

    std::size_t doc_count() const noexcept { return doc_lengths_.size(); }
    double avg_doc_length() const noexcept { return avg_doc_length_; }
    std::uint32_t doc_length(const std::string& docno) const;
    /// (docno, tf) pairs for a term; empty when the term is unseen.
    std::vector<std::pair<std::string, std::uint32_t>> postings(const std::string& term) const;
    std::size_t document_frequency(const std::string& term) const;
    double idf(const std::string& term) const;

    /// Top-min(k, matching) documents by BM25. Throws ArgumentError if k < 1.
    RankedList search(const std::string& query, std::size_t k, const Bm25Params& params = {}) const;

    /// BM25 score of the query against the whole collection treated as one
    /// document whose length equals the average length. Used as the optional
    /// NQC normalizer.
    double corpus_score(const std::string& query, const Bm25Params& params = {}) const;

    const DocumentStore& documents() const noexcept { return *docs_; }
    std::shared_ptr<const DocumentStore> shared_documents() const noexcept { return docs_; }

    void save(const std::string& path) const;
    static LexicalIndex load(const std::string& path);

private:
    std::shared_ptr<const DocumentStore> docs_;
    std::map<std::string, std::vector<Posting>> postings_;
    std::vector<std::uint32_t> doc_lengths_;
    double avg_doc_length_ = 0.0;
};

RankedList search_lexical(const LexicalIndex& index, const std::string& query, std::size_t k);

// ---------------------------------------------------------------------------
// Dense

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const = 0;
    virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) const = 0;
};

/// Exact-text lookup table; unknown text is a ConfigError.
class LookupEmbedder final : public Embedder {
public:
    LookupEmbedder(std::size_t dim, std::map<std::string, std::vector<double>> table);
    /// Same layout as the embeddings TSV, with the query text in the first column.
    static LookupEmbedder from_tsv(const std::string& path);

    std::size_t dim() const override { return dim_; }
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) const override;

private:
    std::size_t dim_;
    std::map<std::string, std::vector<double>> table_;
};

/// Length and finiteness checked against embedder.dim(); mismatch is a ConfigError.
std::vector<double> embed_query(const Embedder& embedder, const std::string& text);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Brute-force cosine top-k. Zero-norm vectors score -inf and are reported
/// through `warnings` when given.
RankedList search_dense(const EmbeddingStore& store, std::span<const double> query_vec, std::size_t k,
                        std::vector<std::string>* warnings = nullptr,
                        const std::string& query_text = {});

// ---------------------------------------------------------------------------
// Reranking

class Scorer {
public:
    virtual ~Scorer() = default;
    /// One score per document, aligned by position.
    virtual std::vector<double> score(const std::string& query, std::span<const Document> docs) const = 0;
};

/// Fixed docno -> score table. Query-specific entries ("query\tdocno") take
/// precedence over docno-only entries.
class TableScorer final : public Scorer {
public:
    explicit TableScorer(std::map<std::string, double> by_docno,
                         std::map<std::string, double> by_query_docno = {});
    static TableScorer from_tsv(const std::string& path);
    std::vector<double> score(const std::string& query, std::span<const Document> docs) const override;

private:
    std::map<std::string, double> by_docno_;
    std::map<std::string, double> by_query_docno_;
};

/// Cosine between the embedded query and the stored document vector.
class EmbeddingCosineScorer final : public Scorer {
public:
    EmbeddingCosineScorer(std::shared_ptr<const Embedder> embedder, std::shared_ptr<const EmbeddingStore> store);
    std::vector<double> score(const std::string& query, std::span<const Document> docs) const override;

private:
    std::shared_ptr<const Embedder> embedder_;
    std::shared_ptr<const EmbeddingStore> store_;
};

class FunctionScorer final : public Scorer {
public:
    using Fn = std::function<double(const std::string& query, const Document& doc)>;
    explicit FunctionScorer(Fn fn) : fn_(std::move(fn)) {}
    std::vector<double> score(const std::string& query, std::span<const Document> docs) const override;

private:
    Fn fn_;
};

/// Rescores the first min(depth, size) entries and drops the rest. Any scorer
/// failure fails the whole call with RerankError.
RankedList rerank(const Scorer& scorer, const RankedList& list, std::size_t depth, const DocumentStore& docs);

// ---------------------------------------------------------------------------
// Pipelines

namespace stage {
struct LexicalSearch {
    Bm25Params params;
};
struct DenseSearch {};
struct Cutoff {
    std::size_t k = 0;
};
struct Rerank {
    std::shared_ptr<const Scorer> scorer;
    std::size_t depth = 20;
};
}  // namespace stage

using PipelineStage = std::variant<stage::LexicalSearch, stage::DenseSearch, stage::Cutoff, stage::Rerank>;

std::string describe(const PipelineStage& s);

struct RetrievalResources {
    std::shared_ptr<const DocumentStore> docs;
    std::shared_ptr<const LexicalIndex> lexical;
    std::shared_ptr<const EmbeddingStore> embeddings;
    std::shared_ptr<const Embedder> embedder;
};

/// Which QPP predictors make sense for a pipeline's output.
enum class RetrieverClass { lexical, reranked, dense };

const char* to_string(RetrieverClass c);

struct PipelineOutput {
    RankedList list;
    // Set when a stage embedded the query.
    std::optional<std::vector<double>> query_vec;
};

class Pipeline {
public:
    /// Throws ConfigError when the stage sequence or resources are inconsistent.
    Pipeline(std::vector<PipelineStage> stages, std::size_t context_k, RetrievalResources resources);

    /// Applies the stages left to right. Stage failures are rethrown with
    /// the stage index prepended, keeping their error kind.
    PipelineOutput execute(const std::string& query, std::vector<std::string>* warnings = nullptr) const;

    const std::vector<PipelineStage>& stages() const noexcept { return stages_; }
    std::size_t context_k() const noexcept { return context_k_; }
    const RetrievalResources& resources() const noexcept { return resources_; }
    RetrieverClass retriever_class() const noexcept;
    /// Bound on output length when a cutoff/rerank stage fixes one.
    std::optional<std::size_t> max_output_depth() const noexcept;

private:
    std::vector<PipelineStage> stages_;
    std::size_t context_k_;
    RetrievalResources resources_;
};

RankedList run_pipeline(const Pipeline& p, const std::string& query);

/// Parses expressions such as "lexical %20 >> rerank(20)" or "dense %100".
/// `>>` and `≫` both compose; `%k` is a cutoff; `rerank` uses `reranker`.
/// Named presets "lexical", "lexical%20>>rerank" and "dense" resolve to
/// their canonical expressions (see preset_expression).
Pipeline parse_pipeline(std::string_view expr, std::size_t context_k, RetrievalResources resources,
                        std::shared_ptr<const Scorer> reranker = nullptr, std::size_t qpp_depth = 100);

/// Expression for a named preset, or nullopt if `name` is not a preset.
std::optional<std::string> preset_expression(std::string_view name, std::size_t qpp_depth = 100);

}  // namespace agentqpp
