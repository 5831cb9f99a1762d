#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agentqpp/retrieval.hpp"
#include "agentqpp/types.hpp"

namespace agentqpp {

/// Post-retrieval query performance predictors.
namespace predictor {
inline constexpr const char* nqc = "nqc";
inline constexpr const char* max_score = "max_score";
inline constexpr const char* a_pair_ratio = "a_pair_ratio";
inline constexpr const char* dense_qpp = "dense_qpp";
/// Stable column order used by reports.
inline constexpr const char* all[] = {nqc, max_score, a_pair_ratio, dense_qpp};
}  // namespace predictor

struct PredictorConfig {
    std::size_t nqc_depth = 100;
    std::size_t apr_head = 5;
    std::size_t apr_tail = 5;
    std::size_t apr_depth = 50;
    std::size_t dense_qpp_k = 3;
    double epsilon = 1e-9;
    // Divide NQC by the corpus-as-one-document score (lexical pipelines only).
    bool nqc_normalize = false;

    /// Throws ConfigError when a depth is zero or head + tail > depth.
    void validate() const;
    /// Deepest list any predictor looks at.
    std::size_t max_depth() const noexcept;
};

/// Population standard deviation of the first min(depth, n) scores.
double nqc(const RankedList& list, std::size_t depth);

double max_score(const RankedList& list);

struct APairRatio {
    double value = 0.0;
    // List shorter than head + tail; head/tail split in halves instead.
    bool degraded = false;
    // Tail coherence fell below epsilon.
    bool clamped = false;
};

/// Mean pairwise cosine of the head documents over that of the tail documents
/// within the top apr_depth. A one-element group has coherence 1.
APairRatio a_pair_ratio(const RankedList& list, const EmbeddingStore& store, const PredictorConfig& cfg);

/// -ln(side + epsilon), where side is the edge of the smallest axis-aligned
/// hypercube holding the query and the top dense_qpp_k document vectors.
double dense_qpp(std::span<const double> query_vec, const RankedList& list, const EmbeddingStore& store,
                 const PredictorConfig& cfg);

/// (x - mean) / population sd; all zeros when the sd is zero.
std::vector<double> zscore(std::span<const double> values);

struct QppInputs {
    RetrieverClass retriever = RetrieverClass::lexical;
    const std::vector<double>* query_vec = nullptr;
    const EmbeddingStore* store = nullptr;
    std::optional<double> nqc_normalizer;
};

struct QppEstimates {
    std::map<std::string, double> values;
    std::map<std::string, std::string> errors;
    std::vector<std::string> flags;
};

/// Runs every predictor applicable to the retriever class. Inapplicable
/// predictors are absent; failing ones land in `errors`.
QppEstimates estimate_all(const RankedList& list, const QppInputs& inputs, const PredictorConfig& cfg);

/// Names estimate_all would try for this retriever class / embedding availability.
std::vector<std::string> applicable_predictors(RetrieverClass retriever, bool embeddings_available);

}  // namespace agentqpp
