#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace agentqpp {

struct Document {
    std::string docno;
    std::string title;
    std::string text;

    bool operator==(const Document&) const = default;
};

struct RankedEntry {
    std::string docno;
    int rank = 0;
    double score = 0.0;

    bool operator==(const RankedEntry&) const = default;
};

/// Rank-ordered retrieval output for one query. Ranks run 1..n, scores are
/// non-increasing and docnos are distinct; use make_ranked_list() to build one
/// from unordered (docno, score) pairs.
struct RankedList {
    std::string query_text;
    std::vector<RankedEntry> entries;

    std::size_t size() const noexcept { return entries.size(); }
    bool empty() const noexcept { return entries.empty(); }
    std::vector<double> scores() const;
    /// Copy of the first min(k, size()) entries.
    RankedList prefix(std::size_t k) const;

    bool operator==(const RankedList&) const = default;
};

/// Sorts by score descending, ties by docno ascending, and assigns ranks.
RankedList make_ranked_list(std::string query_text,
                            std::vector<std::pair<std::string, double>> scored);

/// Returns a description of the first violated invariant, or nullopt.
std::optional<std::string> validate_ranked_list(const RankedList& list);

/// Fixed-dimension document vectors keyed by docno.
class EmbeddingStore {
public:
    explicit EmbeddingStore(std::size_t dim);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return vectors_.size(); }

    /// Throws ArgumentError on wrong length, non-finite entries or a duplicate docno.
    void add(const std::string& docno, std::vector<double> vec);
    const std::vector<double>* find(const std::string& docno) const;
    const std::map<std::string, std::vector<double>>& vectors() const noexcept { return vectors_; }

private:
    std::size_t dim_;
    std::map<std::string, std::vector<double>> vectors_;
};

/// A document as it was shown to the reasoner.
struct ContextDoc {
    RankedEntry entry;
    std::string title;
    std::string text;

    bool operator==(const ContextDoc&) const = default;
};

struct IterationRecord {
    int index = 0;
    std::string think_text;
    std::string generated_query;
    // Raw completion for this turn, including the closing </search> tag.
    std::string generated_text;
    std::vector<ContextDoc> context_docs;
    RankedList deep_list;
    std::map<std::string, double> qpp_estimates;
    std::map<std::string, std::string> qpp_errors;

    bool operator==(const IterationRecord&) const = default;
};

enum class Termination { answered, budget_exhausted, malformed_output };

const char* to_string(Termination t);
std::optional<Termination> termination_from_string(const std::string& s);

struct ReasoningTrace {
    std::string question_id;
    std::string input_question;
    std::vector<IterationRecord> iterations;
    std::optional<std::string> final_answer;
    // Completion text of the turn that ended the episode (empty if none).
    std::string final_text;
    Termination termination = Termination::malformed_output;
    int iter_count = 0;
    // Why the episode ended, when that is not obvious from `termination`.
    std::string note;
    std::vector<std::string> warnings;

    bool operator==(const ReasoningTrace&) const = default;
};

/// Checks the trace-level invariants (iteration count and indices, context
/// prefix, answered <=> non-blank answer). Returns the first violation.
std::optional<std::string> validate_trace(const ReasoningTrace& trace);

struct GoldAnswers {
    std::string question_id;
    std::vector<std::string> answers;

    bool operator==(const GoldAnswers&) const = default;
};

struct EvalRecord {
    std::string question_id;
    int em = 0;
    double f1 = 0.0;
    int iter_count = 0;
    std::map<std::string, double> first_iter_qpp;

    bool operator==(const EvalRecord&) const = default;
};

}  // namespace agentqpp
