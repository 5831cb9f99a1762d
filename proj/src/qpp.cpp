#include "agentqpp/qpp.hpp"

#include <algorithm>
#include <cmath>

#include "agentqpp/error.hpp"

namespace agentqpp {

void PredictorConfig::validate() const {
    if (nqc_depth < 1 || apr_head < 1 || apr_tail < 1 || apr_depth < 1 || dense_qpp_k < 1) {
        throw ConfigError("predictor depths must be >= 1");
    }
    if (apr_head + apr_tail > apr_depth) throw ConfigError("apr_head + apr_tail must not exceed apr_depth");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

std::size_t PredictorConfig::max_depth() const noexcept { return std::max({nqc_depth, apr_depth, dense_qpp_k}); }

double nqc(const RankedList& list, std::size_t depth) {
    if (list.empty()) throw PredictorUndefined("nqc: empty ranked list");
    if (depth < 1) throw ArgumentError("nqc: depth must be >= 1");
    const std::size_t m = std::min(depth, list.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += list.entries[i].score;
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double d = list.entries[i].score - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(m));
}

double max_score(const RankedList& list) {
    if (list.empty()) throw PredictorUndefined("max_score: empty ranked list");
    return list.entries.front().score;
}

namespace {

const std::vector<double>& embedding_of(const EmbeddingStore& store, const std::string& docno, const char* who) {
    const auto* v = store.find(docno);
    if (!v) throw PredictorInputError(std::string(who) + ": no embedding for docno " + docno);
    return *v;
}

// Zero-norm vectors have cosine 0 with everything.
double pair_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double coherence(const std::vector<const std::vector<double>*>& group) {
    if (group.size() < 2) return 1.0;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < group.size(); ++i) {
        for (std::size_t j = i + 1; j < group.size(); ++j) {
            sum += pair_cosine(*group[i], *group[j]);
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

}  // namespace

APairRatio a_pair_ratio(const RankedList& list, const EmbeddingStore& store, const PredictorConfig& cfg) {
    if (list.size() < 2) throw PredictorUndefined("a_pair_ratio: needs at least 2 documents");
    const std::size_t n = std::min(cfg.apr_depth, list.size());
    std::vector<const std::vector<double>*> view;
    view.reserve(n);
    for (std::size_t i = 0; i < n; ++i) view.push_back(&embedding_of(store, list.entries[i].docno, "a_pair_ratio"));

    APairRatio out;
    std::size_t head = cfg.apr_head;
    std::size_t tail = cfg.apr_tail;
    if (n < head + tail) {
        head = (n + 1) / 2;
        tail = n - head;
        out.degraded = true;
    }
    const std::vector<const std::vector<double>*> head_group(view.begin(), view.begin() + static_cast<std::ptrdiff_t>(head));
    const std::vector<const std::vector<double>*> tail_group(view.end() - static_cast<std::ptrdiff_t>(tail), view.end());
    const double tail_coh = coherence(tail_group);
    if (tail_coh < cfg.epsilon) out.clamped = true;
    out.value = coherence(head_group) / std::max(tail_coh, cfg.epsilon);
    return out;
}

double dense_qpp(std::span<const double> query_vec, const RankedList& list, const EmbeddingStore& store,
                 const PredictorConfig& cfg) {
    if (list.empty()) throw PredictorUndefined("dense_qpp: empty ranked list");
    if (query_vec.size() != store.dim()) {
        throw PredictorInputError("dense_qpp: query dimension " + std::to_string(query_vec.size()) +
                                  " != store dimension " + std::to_string(store.dim()));
    }
    std::vector<double> lo(query_vec.begin(), query_vec.end());
    std::vector<double> hi = lo;
    const std::size_t k = std::min(cfg.dense_qpp_k, list.size());
    for (std::size_t i = 0; i < k; ++i) {
        const auto& v = embedding_of(store, list.entries[i].docno, "dense_qpp");
        for (std::size_t d = 0; d < v.size(); ++d) {
            lo[d] = std::min(lo[d], v[d]);
            hi[d] = std::max(hi[d], v[d]);
        }
    }
    double side = 0.0;
    for (std::size_t d = 0; d < lo.size(); ++d) side = std::max(side, hi[d] - lo[d]);
    return -std::log(side + cfg.epsilon);
}

std::vector<double> zscore(std::span<const double> values) {
    std::vector<double> out(values.size(), 0.0);
    if (values.empty()) return out;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size()));
    if (sd == 0.0) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
    return out;
}

std::vector<std::string> applicable_predictors(RetrieverClass retriever, bool embeddings_available) {
    std::vector<std::string> names{predictor::nqc};
    if (retriever == RetrieverClass::lexical) return names;
    names.emplace_back(predictor::max_score);
    if (embeddings_available) {
        names.emplace_back(predictor::a_pair_ratio);
        names.emplace_back(predictor::dense_qpp);
    }
    return names;
}

QppEstimates estimate_all(const RankedList& list, const QppInputs& inputs, const PredictorConfig& cfg) {
    QppEstimates est;
    const bool have_embeddings = inputs.store != nullptr && inputs.query_vec != nullptr;
    for (const auto& name : applicable_predictors(inputs.retriever, have_embeddings)) {
        try {
            double v = 0.0;
            if (name == predictor::nqc) {
                v = nqc(list, cfg.nqc_depth);
                if (cfg.nqc_normalize && inputs.nqc_normalizer) {
                    v /= std::max(std::abs(*inputs.nqc_normalizer), cfg.epsilon);
                }
            } else if (name == predictor::max_score) {
                v = max_score(list);
            } else if (name == predictor::a_pair_ratio) {
                const auto r = a_pair_ratio(list, *inputs.store, cfg);
                if (r.degraded) est.flags.push_back("a_pair_ratio: degraded (short list)");
                if (r.clamped) est.flags.push_back("a_pair_ratio: tail coherence clamped to epsilon");
                v = r.value;
            } else {
                v = dense_qpp(*inputs.query_vec, list, *inputs.store, cfg);
            }
            if (!std::isfinite(v)) throw PredictorUndefined(name + ": non-finite value");
            est.values[name] = v;
        } catch (const Error& e) {
            est.errors[name] = e.what();
        }
    }
    return est;
}

}  // namespace agentqpp
