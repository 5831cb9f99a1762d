#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agentqpp/types.hpp"

namespace agentqpp {

struct QaItem {
    std::string id;
    std::string question;
    std::vector<std::string> answers;

    GoldAnswers gold() const { return {id, answers}; }
};

/// QA JSONL: {"id","question","answers":[...]} per line. Rejects duplicate
/// ids, blank questions and answer lists that normalise to nothing.
std::vector<QaItem> read_qa_jsonl(const std::filesystem::path& path);

/// One traces.jsonl line (no trailing newline). em/f1 come from `eval` when
/// given; timing_ms is only written when present.
std::string serialize_trace(const ReasoningTrace& trace, const EvalRecord* eval = nullptr,
                            std::optional<std::int64_t> timing_ms = std::nullopt);
ReasoningTrace parse_trace(std::string_view line);

std::string serialize_eval(const EvalRecord& eval);
EvalRecord parse_eval(std::string_view line);

std::vector<ReasoningTrace> read_traces_jsonl(const std::filesystem::path& path);
std::vector<EvalRecord> read_evals_jsonl(const std::filesystem::path& path);

}  // namespace agentqpp
