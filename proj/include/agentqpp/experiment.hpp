#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "agentqpp/agent_loop.hpp"
#include "agentqpp/evaluation.hpp"
#include "agentqpp/qpp.hpp"
#include "agentqpp/trace_io.hpp"

namespace agentqpp {

enum class BackendKind { http, scripted, rule_based };
enum class RerankerKind { none, http, embedding, table };
enum class EmbedderKind { none, http, table };

struct BackendSpec {
    BackendKind kind = BackendKind::rule_based;
    std::string url;
    double temperature = 0.0;
    std::filesystem::path script_path;
    // "{question}" is replaced by the input question.
    std::vector<std::string> reformulations{"{question}"};
};

struct RerankerSpec {
    RerankerKind kind = RerankerKind::none;
    std::string url;
    std::filesystem::path table_path;
};

struct EmbedderSpec {
    EmbedderKind kind = EmbedderKind::none;
    std::string url;
    std::size_t dim = 0;
    std::filesystem::path table_path;
};

/// Experiment configuration. Loaded from TOML; relative paths resolve against
/// the config file's directory.
struct RunConfig {
    std::filesystem::path corpus_path;
    std::optional<std::filesystem::path> index_path;
    std::optional<std::filesystem::path> embeddings_path;
    std::filesystem::path qa_path;
    std::filesystem::path output_dir;
    std::string pipeline = "lexical";
    std::size_t context_k = 3;
    PredictorConfig qpp;
    BackendSpec backend;
    RerankerSpec reranker;
    EmbedderSpec embedder;
    EpisodeBudget budget;
    RetryPolicy retry;
    int max_tokens_per_turn = 512;
    std::size_t workers = 1;
    std::uint64_t seed = 0;
    bool record_timing = false;

    /// Static consistency checks (ConfigError). File existence is checked at run time.
    void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(std::string_view toml_text, const std::filesystem::path& base_dir);

struct RunSummary {
    std::size_t episodes = 0;
    std::size_t answered = 0;
    std::size_t budget_exhausted = 0;
    std::size_t malformed = 0;
    double em_mean = 0.0;
    double f1_mean = 0.0;
    std::filesystem::path traces_path;
    std::filesystem::path evals_path;
};

/// Writes traces.jsonl and evals.jsonl (sorted by question id) to output_dir.
/// Config inconsistencies abort before any episode runs.
RunSummary cmd_run(const RunConfig& config);
RunSummary cmd_run(const std::filesystem::path& config_path);

/// Builds and persists a lexical index; returns the document count.
std::size_t cmd_index(const std::filesystem::path& corpus_path, const std::filesystem::path& out_path);

struct LoadedRun {
    std::string name;
    std::vector<ReasoningTrace> traces;
    std::vector<EvalRecord> evals;
};

LoadedRun load_run_dir(const std::filesystem::path& dir);

/// Report file names written by cmd_analyze.
namespace report {
inline constexpr const char* table1 = "table1.csv";
inline constexpr const char* table2 = "table2.csv";
inline constexpr const char* table3 = "table3.csv";
inline constexpr const char* qpp_by_iteration = "qpp_by_iteration.csv";
inline constexpr const char* qpp_by_iteration_svg = "qpp_by_iteration.svg";
inline constexpr const char* iter_histogram = "iter_histogram.csv";
inline constexpr const char* iter_histogram_svg = "iter_histogram.svg";
inline constexpr const char* repetition = "repetition.csv";
}  // namespace report

/// Analyses each run directory and writes the CSV/SVG reports into out_dir.
/// Returns the written paths.
std::vector<std::filesystem::path> cmd_analyze(const std::vector<std::filesystem::path>& run_dirs,
                                               const std::filesystem::path& out_dir);

std::string format_trace(const ReasoningTrace& trace);
std::string cmd_trace_show(const std::filesystem::path& traces_path, const std::string& question_id);

/// Minimal RFC 4180 CSV reading, used to check report round-trips.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace agentqpp
