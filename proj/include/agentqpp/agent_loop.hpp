#pragma once

#include <chrono>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "agentqpp/qpp.hpp"
#include "agentqpp/retrieval.hpp"
#include "agentqpp/types.hpp"

namespace agentqpp {

inline constexpr const char* kSearchOpen = "<search>";
inline constexpr const char* kSearchClose = "</search>";
inline constexpr const char* kAnswerOpen = "<answer>";
inline constexpr const char* kAnswerClose = "</answer>";

struct CompletionRequest {
    std::string context;
    std::vector<std::string> stop_sequences;
    int max_tokens = 512;
};

enum class FinishKind { stop_sequence_hit, length, end_of_text };

struct FinishReason {
    FinishKind kind = FinishKind::end_of_text;
    // The stop sequence that was hit; empty otherwise.
    std::string which;

    static FinishReason stop(std::string seq) { return {FinishKind::stop_sequence_hit, std::move(seq)}; }
    static FinishReason length() { return {FinishKind::length, {}}; }
    static FinishReason end_of_text() { return {FinishKind::end_of_text, {}}; }
    bool hit(std::string_view seq) const { return kind == FinishKind::stop_sequence_hit && which == seq; }
};

struct CompletionResult {
    std::string text;
    FinishReason finish;
};

/// Text generator driven by the episode loop. Throw TransportError for
/// failures worth retrying.
class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual CompletionResult complete(const CompletionRequest& request) = 0;
};

/// Truncates `raw` at the earliest stop sequence, the way completion servers
/// do, and reports which one was hit.
CompletionResult apply_stop_sequences(std::string_view raw, std::span<const std::string> stops);

/// Replays fixed completions in order; once exhausted it returns empty text.
class ScriptedBackend final : public CompletionBackend {
public:
    explicit ScriptedBackend(std::vector<std::string> steps) : steps_(std::move(steps)) {}
    CompletionResult complete(const CompletionRequest& request) override;

    /// Contexts received so far, in call order.
    const std::vector<std::string>& received() const noexcept { return received_; }

private:
    std::vector<std::string> steps_;
    std::size_t next_ = 0;
    std::vector<std::string> received_;
};

/// Deterministic stand-in for a trained search agent. Answers with the first
/// gold string found (case-insensitively) inside an <information> block of the
/// context, otherwise searches with the next reformulation, cycling.
class RuleBasedReasoner final : public CompletionBackend {
public:
    RuleBasedReasoner(std::vector<std::string> gold_substrings, std::vector<std::string> reformulations);
    CompletionResult complete(const CompletionRequest& request) override;

private:
    std::vector<std::string> gold_;
    std::vector<std::string> reformulations_;
};

std::unique_ptr<CompletionBackend> rule_based_reasoner(std::vector<std::string> gold_substrings,
                                                       std::vector<std::string> reformulations);

struct SearchAction {
    std::string query;
    bool operator==(const SearchAction&) const = default;
};
struct AnswerAction {
    std::string text;
    bool operator==(const AnswerAction&) const = default;
};
struct MalformedAction {
    std::string reason;
    bool operator==(const MalformedAction&) const = default;
};

struct ParsedAction {
    std::string think_text;
    std::variant<SearchAction, AnswerAction, MalformedAction> action;
};

struct EpisodeBudget {
    int max_iterations = 5;
    int max_total_tokens = 4096;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
};

struct EpisodeOptions {
    EpisodeBudget budget;
    RetryPolicy retry;
    PredictorConfig qpp;
    int max_tokens_per_turn = 512;
};

std::string render_prompt(const std::string& question, std::vector<std::string>* warnings = nullptr);

ParsedAction parse_model_output(std::string_view text, const FinishReason& finish);

std::string format_information(std::span<const ContextDoc> docs);

/// Approximate token count used for the episode token budget: the number of
/// whitespace-separated pieces.
int count_tokens(std::string_view text);

/// Rebuilds the exact context the backend saw, plus the final turn.
std::string render_transcript(const ReasoningTrace& trace);

ReasoningTrace run_episode(CompletionBackend& llm, const Pipeline& pipeline, const std::string& question_id,
                           const std::string& question, const EpisodeOptions& options = {});

}  // namespace agentqpp
