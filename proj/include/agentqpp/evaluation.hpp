#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agentqpp/types.hpp"

namespace agentqpp {

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
std::string normalize_answer(std::string_view text);

int exact_match(std::string_view pred, const GoldAnswers& golds);

/// Multiset token-overlap F1 against each gold, maximised over golds.
double token_f1(std::string_view pred, const GoldAnswers& golds);

/// Average ranks for ties, 1-based.
std::vector<double> average_ranks(std::span<const double> xs);

/// Spearman's rho as the Pearson correlation of average ranks. Absent when
/// either side is constant. Throws ArgumentError on length mismatch or n < 2.
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

EvalRecord evaluate_trace(const ReasoningTrace& trace, const GoldAnswers& gold);

/// NotFoundError naming the first trace without a gold entry.
std::vector<EvalRecord> evaluate_traces(std::span<const ReasoningTrace> traces,
                                        const std::map<std::string, GoldAnswers>& gold);

struct IterationBucket {
    int correct = 0;
    int incorrect = 0;
};

struct IterationMean {
    int iteration = 0;
    double mean_z = 0.0;
    std::size_t count = 0;
};

struct RepetitionReport {
    std::size_t count = 0;
    std::vector<std::string> question_ids;
};

struct RunAnalysis {
    std::size_t questions = 0;
    double em_mean = 0.0;
    double f1_mean = 0.0;
    double iter_mean = 0.0;
    std::map<int, IterationBucket> iter_histogram;
    std::optional<double> rho_iter_f1;
    // z-scored per-iteration means, keyed by predictor name.
    std::map<std::string, std::vector<IterationMean>> qpp_by_iteration;
    // Spearman of first-iteration estimate vs F1; absent predictors are missing
    // keys, undefined correlations are nullopt.
    std::map<std::string, std::optional<double>> rho_qpp_f1;
    RepetitionReport repetition;
};

/// Traces whose generated queries repeat after whitespace collapse and case fold.
RepetitionReport repetition_report(std::span<const ReasoningTrace> traces);

/// NotFoundError naming any trace without an eval record.
RunAnalysis analyze_run(std::span<const ReasoningTrace> traces, std::span<const EvalRecord> evals);

}  // namespace agentqpp
