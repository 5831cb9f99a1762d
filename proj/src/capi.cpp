#include "agentqpp/agentqpp.h"

#include <cstdlib>
#include <cstring>
#include <new>

#include "agentqpp/error.hpp"
#include "agentqpp/evaluation.hpp"
#include "agentqpp/experiment.hpp"
#include "agentqpp/qpp.hpp"
#include "agentqpp/retrieval.hpp"

struct aqpp_index {
    agentqpp::LexicalIndex index;
};

struct aqpp_ranked_list {
    agentqpp::RankedList list;
};

namespace {

thread_local std::string g_last_error;

aqpp_status to_status(agentqpp::ErrorKind kind) {
    using K = agentqpp::ErrorKind;
    switch (kind) {
        case K::argument: return AQPP_ERR_ARGUMENT;
        case K::config: return AQPP_ERR_CONFIG;
        case K::io: return AQPP_ERR_IO;
        case K::parse: return AQPP_ERR_PARSE;
        case K::not_found: return AQPP_ERR_NOT_FOUND;
        case K::transport: return AQPP_ERR_TRANSPORT;
        case K::predictor_undefined: return AQPP_ERR_PREDICTOR_UNDEFINED;
        case K::predictor_input: return AQPP_ERR_PREDICTOR_INPUT;
        case K::rerank: return AQPP_ERR_RERANK;
        case K::internal: return AQPP_ERR_INTERNAL;
    }
    return AQPP_ERR_INTERNAL;
}

template <typename F>
aqpp_status guarded(F&& f) {
    g_last_error.clear();
    try {
        f();
        return AQPP_OK;
    } catch (const agentqpp::Error& e) {
        g_last_error = e.what();
        return to_status(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
    } catch (const std::exception& e) {
        g_last_error = e.what();
    } catch (...) {
        g_last_error = "unknown error";
    }
    return AQPP_ERR_INTERNAL;
}

void require(const void* p, const char* name) {
    if (!p) throw agentqpp::ArgumentError(std::string(name) + " must not be NULL");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

agentqpp::GoldAnswers golds_from(const char* const* golds, size_t n) {
    if (n > 0) require(golds, "golds");
    agentqpp::GoldAnswers g;
    for (size_t i = 0; i < n; ++i) {
        require(golds[i], "gold answer");
        g.answers.emplace_back(golds[i]);
    }
    return g;
}

}  // namespace

extern "C" {

const char* aqpp_version(void) { return "0.1.0"; }

const char* aqpp_last_error(void) { return g_last_error.c_str(); }

const char* aqpp_status_name(aqpp_status status) {
    switch (status) {
        case AQPP_OK: return "ok";
        case AQPP_ERR_ARGUMENT: return "argument";
        case AQPP_ERR_CONFIG: return "config";
        case AQPP_ERR_IO: return "io";
        case AQPP_ERR_PARSE: return "parse";
        case AQPP_ERR_NOT_FOUND: return "not_found";
        case AQPP_ERR_TRANSPORT: return "transport";
        case AQPP_ERR_PREDICTOR_UNDEFINED: return "predictor_undefined";
        case AQPP_ERR_PREDICTOR_INPUT: return "predictor_input";
        case AQPP_ERR_RERANK: return "rerank";
        case AQPP_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

void aqpp_string_free(char* s) { std::free(s); }

aqpp_status aqpp_index_build(const char* corpus_jsonl_path, aqpp_index** out) {
    return guarded([&] {
        require(corpus_jsonl_path, "corpus path");
        require(out, "out");
        auto docs = std::make_shared<const agentqpp::DocumentStore>(agentqpp::read_corpus_jsonl(corpus_jsonl_path));
        *out = new aqpp_index{agentqpp::LexicalIndex::build(std::move(docs))};
    });
}

aqpp_status aqpp_index_load(const char* index_path, aqpp_index** out) {
    return guarded([&] {
        require(index_path, "index path");
        require(out, "out");
        *out = new aqpp_index{agentqpp::LexicalIndex::load(index_path)};
    });
}

aqpp_status aqpp_index_save(const aqpp_index* index, const char* path) {
    return guarded([&] {
        require(index, "index");
        require(path, "path");
        index->index.save(path);
    });
}

aqpp_status aqpp_index_doc_count(const aqpp_index* index, size_t* out) {
    return guarded([&] {
        require(index, "index");
        require(out, "out");
        *out = index->index.doc_count();
    });
}

aqpp_status aqpp_index_search(const aqpp_index* index, const char* query, size_t k, aqpp_ranked_list** out) {
    return guarded([&] {
        require(index, "index");
        require(query, "query");
        require(out, "out");
        *out = new aqpp_ranked_list{index->index.search(query, k)};
    });
}

void aqpp_index_free(aqpp_index* index) { delete index; }

size_t aqpp_ranked_list_size(const aqpp_ranked_list* list) { return list ? list->list.size() : 0; }

aqpp_status aqpp_ranked_list_entry(const aqpp_ranked_list* list, size_t i, const char** docno, double* score) {
    return guarded([&] {
        require(list, "list");
        if (i >= list->list.size()) throw agentqpp::ArgumentError("entry index out of range");
        const auto& e = list->list.entries[i];
        if (docno) *docno = e.docno.c_str();
        if (score) *score = e.score;
    });
}

aqpp_status aqpp_ranked_list_nqc(const aqpp_ranked_list* list, size_t depth, double* out) {
    return guarded([&] {
        require(list, "list");
        require(out, "out");
        *out = agentqpp::nqc(list->list, depth);
    });
}

void aqpp_ranked_list_free(aqpp_ranked_list* list) { delete list; }

aqpp_status aqpp_token_f1(const char* prediction, const char* const* golds, size_t n_golds, double* out) {
    return guarded([&] {
        require(prediction, "prediction");
        require(out, "out");
        *out = agentqpp::token_f1(prediction, golds_from(golds, n_golds));
    });
}

aqpp_status aqpp_exact_match(const char* prediction, const char* const* golds, size_t n_golds, int* out) {
    return guarded([&] {
        require(prediction, "prediction");
        require(out, "out");
        *out = agentqpp::exact_match(prediction, golds_from(golds, n_golds));
    });
}

aqpp_status aqpp_spearman(const double* xs, const double* ys, size_t n, double* out, int* defined) {
    return guarded([&] {
        require(xs, "xs");
        require(ys, "ys");
        require(out, "out");
        require(defined, "defined");
        const auto rho = agentqpp::spearman(std::span<const double>(xs, n), std::span<const double>(ys, n));
        *defined = rho.has_value() ? 1 : 0;
        *out = rho.value_or(0.0);
    });
}

aqpp_status aqpp_cmd_index(const char* corpus_jsonl_path, const char* out_path, size_t* doc_count) {
    return guarded([&] {
        require(corpus_jsonl_path, "corpus path");
        require(out_path, "output path");
        const auto n = agentqpp::cmd_index(corpus_jsonl_path, out_path);
        if (doc_count) *doc_count = n;
    });
}

aqpp_status aqpp_cmd_run(const char* config_path, aqpp_run_summary* out) {
    return guarded([&] {
        require(config_path, "config path");
        const auto s = agentqpp::cmd_run(std::filesystem::path(config_path));
        if (out) *out = {s.episodes, s.answered, s.budget_exhausted, s.malformed, s.em_mean, s.f1_mean};
    });
}

aqpp_status aqpp_cmd_analyze(const char* const* run_dirs, size_t n_dirs, const char* out_dir, char** written) {
    return guarded([&] {
        require(out_dir, "output directory");
        if (n_dirs > 0) require(run_dirs, "run dirs");
        std::vector<std::filesystem::path> dirs;
        for (size_t i = 0; i < n_dirs; ++i) {
            require(run_dirs[i], "run dir");
            dirs.emplace_back(run_dirs[i]);
        }
        const auto paths = agentqpp::cmd_analyze(dirs, out_dir);
        if (written) {
            std::string joined;
            for (const auto& p : paths) joined += p.string() + "\n";
            *written = dup_string(joined);
        }
    });
}

aqpp_status aqpp_cmd_trace_show(const char* traces_path, const char* question_id, char** out) {
    return guarded([&] {
        require(traces_path, "traces path");
        require(question_id, "question id");
        require(out, "out");
        *out = dup_string(agentqpp::cmd_trace_show(traces_path, question_id));
    });
}

}  // extern "C"
