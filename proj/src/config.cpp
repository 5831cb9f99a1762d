#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "agentqpp/error.hpp"
#include "agentqpp/experiment.hpp"

namespace agentqpp {

namespace fs = std::filesystem;

namespace {

void check_keys(const toml::table& tbl, const std::string& where, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, _] : tbl) {
        if (std::find(allowed.begin(), allowed.end(), key.str()) == allowed.end()) {
            throw ConfigError("unknown key '" + std::string(key.str()) + "' in " + where);
        }
    }
}

template <typename T>
std::optional<T> get(const toml::table& tbl, std::string_view key, const std::string& where) {
    const auto* node = tbl.get(key);
    if (!node) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
        if (auto v = node->value<double>()) return *v;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (auto v = node->value<bool>()) return *v;
    } else if constexpr (std::is_integral_v<T>) {
        if (auto v = node->value<std::int64_t>()) {
            if (*v < 0) throw ConfigError(where + "." + std::string(key) + " must be non-negative");
            return static_cast<T>(*v);
        }
    } else {
        if (auto v = node->value<std::string>()) return *v;
    }
    throw ConfigError(where + "." + std::string(key) + " has the wrong type");
}

const toml::table* subtable(const toml::table& root, std::string_view key) {
    const auto* node = root.get(key);
    if (!node) return nullptr;
    if (!node->is_table()) throw ConfigError("'" + std::string(key) + "' must be a table");
    return node->as_table();
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

void RunConfig::validate() const {
    if (corpus_path.empty() && !index_path) throw ConfigError("config needs 'corpus' or 'index'");
    if (qa_path.empty()) throw ConfigError("config needs 'qa'");
    if (output_dir.empty()) throw ConfigError("config needs 'output_dir'");
    if (context_k < 1) throw ConfigError("pipeline.context_k must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (budget.max_iterations < 1 || budget.max_total_tokens < 1) throw ConfigError("budget values must be >= 1");
    if (max_tokens_per_turn < 1) throw ConfigError("backend.max_tokens_per_turn must be >= 1");
    if (retry.attempts < 1) throw ConfigError("retry.attempts must be >= 1");
    qpp.validate();

    std::string expr = preset_expression(pipeline, qpp.max_depth()).value_or(pipeline);
    std::transform(expr.begin(), expr.end(), expr.begin(), [](unsigned char c) { return std::tolower(c); });
    const bool dense = expr.find("dense") != std::string::npos;
    const bool reranks = expr.find("rerank") != std::string::npos;
    if (dense && (!embeddings_path || embedder.kind == EmbedderKind::none)) {
        throw ConfigError("dense pipeline needs 'embeddings' and an [embedder]");
    }
    if (reranks && reranker.kind == RerankerKind::none) throw ConfigError("pipeline reranks but no [reranker] is set");
    if (reranker.kind == RerankerKind::embedding && (!embeddings_path || embedder.kind == EmbedderKind::none)) {
        throw ConfigError("embedding reranker needs 'embeddings' and an [embedder]");
    }
    if (reranker.kind == RerankerKind::http && reranker.url.empty()) throw ConfigError("reranker.url is required");
    if (reranker.kind == RerankerKind::table && reranker.table_path.empty()) throw ConfigError("reranker.table is required");
    if (embedder.kind == EmbedderKind::http && (embedder.url.empty() || embedder.dim == 0)) {
        throw ConfigError("http embedder needs url and dim");
    }
    if (embedder.kind == EmbedderKind::table && embedder.table_path.empty()) throw ConfigError("embedder.table is required");
    if (backend.kind == BackendKind::http && backend.url.empty()) throw ConfigError("backend.url is required");
    if (backend.kind == BackendKind::scripted && backend.script_path.empty()) throw ConfigError("backend.script is required");
    if (backend.kind == BackendKind::rule_based && backend.reformulations.empty()) {
        throw ConfigError("backend.reformulations must not be empty");
    }
}

RunConfig parse_run_config(std::string_view toml_text, const fs::path& base_dir) {
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config: " << e.description() << " at line " << e.source().begin.line;
        throw ConfigError(msg.str());
    }
    check_keys(root, "config",
               {"corpus", "index", "embeddings", "qa", "output_dir", "workers", "seed", "record_timing", "pipeline",
                "reranker", "embedder", "qpp", "backend", "budget", "retry"});

    RunConfig c;
    if (auto v = get<std::string>(root, "corpus", "config")) c.corpus_path = resolve(base_dir, *v);
    if (auto v = get<std::string>(root, "index", "config")) c.index_path = resolve(base_dir, *v);
    if (auto v = get<std::string>(root, "embeddings", "config")) c.embeddings_path = resolve(base_dir, *v);
    if (auto v = get<std::string>(root, "qa", "config")) c.qa_path = resolve(base_dir, *v);
    if (auto v = get<std::string>(root, "output_dir", "config")) c.output_dir = resolve(base_dir, *v);
    if (auto v = get<std::size_t>(root, "workers", "config")) c.workers = *v;
    if (auto v = get<std::uint64_t>(root, "seed", "config")) c.seed = *v;
    if (auto v = get<bool>(root, "record_timing", "config")) c.record_timing = *v;

    if (const auto* t = subtable(root, "pipeline")) {
        check_keys(*t, "[pipeline]", {"expr", "context_k"});
        if (auto v = get<std::string>(*t, "expr", "pipeline")) c.pipeline = *v;
        if (auto v = get<std::size_t>(*t, "context_k", "pipeline")) c.context_k = *v;
    }
    if (const auto* t = subtable(root, "reranker")) {
        check_keys(*t, "[reranker]", {"kind", "url", "table"});
        const auto kind = get<std::string>(*t, "kind", "reranker").value_or("none");
        if (kind == "http") c.reranker.kind = RerankerKind::http;
        else if (kind == "embedding") c.reranker.kind = RerankerKind::embedding;
        else if (kind == "table") c.reranker.kind = RerankerKind::table;
        else if (kind != "none") throw ConfigError("reranker.kind must be http, embedding, table or none");
        c.reranker.url = get<std::string>(*t, "url", "reranker").value_or("");
        if (auto v = get<std::string>(*t, "table", "reranker")) c.reranker.table_path = resolve(base_dir, *v);
    }
    if (const auto* t = subtable(root, "embedder")) {
        check_keys(*t, "[embedder]", {"kind", "url", "dim", "table"});
        const auto kind = get<std::string>(*t, "kind", "embedder").value_or("none");
        if (kind == "http") c.embedder.kind = EmbedderKind::http;
        else if (kind == "table") c.embedder.kind = EmbedderKind::table;
        else if (kind != "none") throw ConfigError("embedder.kind must be http, table or none");
        c.embedder.url = get<std::string>(*t, "url", "embedder").value_or("");
        c.embedder.dim = get<std::size_t>(*t, "dim", "embedder").value_or(0);
        if (auto v = get<std::string>(*t, "table", "embedder")) c.embedder.table_path = resolve(base_dir, *v);
    }
    if (const auto* t = subtable(root, "qpp")) {
        check_keys(*t, "[qpp]",
                   {"nqc_depth", "apr_head", "apr_tail", "apr_depth", "dense_qpp_k", "epsilon", "nqc_normalize"});
        if (auto v = get<std::size_t>(*t, "nqc_depth", "qpp")) c.qpp.nqc_depth = *v;
        if (auto v = get<std::size_t>(*t, "apr_head", "qpp")) c.qpp.apr_head = *v;
        if (auto v = get<std::size_t>(*t, "apr_tail", "qpp")) c.qpp.apr_tail = *v;
        if (auto v = get<std::size_t>(*t, "apr_depth", "qpp")) c.qpp.apr_depth = *v;
        if (auto v = get<std::size_t>(*t, "dense_qpp_k", "qpp")) c.qpp.dense_qpp_k = *v;
        if (auto v = get<double>(*t, "epsilon", "qpp")) c.qpp.epsilon = *v;
        if (auto v = get<bool>(*t, "nqc_normalize", "qpp")) c.qpp.nqc_normalize = *v;
    }
    if (const auto* t = subtable(root, "backend")) {
        check_keys(*t, "[backend]", {"kind", "url", "temperature", "script", "reformulations", "max_tokens_per_turn"});
        const auto kind = get<std::string>(*t, "kind", "backend").value_or("rule_based");
        if (kind == "http") c.backend.kind = BackendKind::http;
        else if (kind == "scripted") c.backend.kind = BackendKind::scripted;
        else if (kind == "rule_based") c.backend.kind = BackendKind::rule_based;
        else throw ConfigError("backend.kind must be http, scripted or rule_based");
        c.backend.url = get<std::string>(*t, "url", "backend").value_or("");
        if (auto v = get<double>(*t, "temperature", "backend")) c.backend.temperature = *v;
        if (auto v = get<std::string>(*t, "script", "backend")) c.backend.script_path = resolve(base_dir, *v);
        if (auto v = get<std::size_t>(*t, "max_tokens_per_turn", "backend")) c.max_tokens_per_turn = static_cast<int>(*v);
        if (const auto* node = t->get("reformulations")) {
            const auto* arr = node->as_array();
            if (!arr) throw ConfigError("backend.reformulations must be an array of strings");
            c.backend.reformulations.clear();
            for (const auto& el : *arr) {
                auto s = el.value<std::string>();
                if (!s) throw ConfigError("backend.reformulations must be an array of strings");
                c.backend.reformulations.push_back(*s);
            }
        }
    }
    if (const auto* t = subtable(root, "budget")) {
        check_keys(*t, "[budget]", {"max_iterations", "max_total_tokens"});
        if (auto v = get<std::size_t>(*t, "max_iterations", "budget")) c.budget.max_iterations = static_cast<int>(*v);
        if (auto v = get<std::size_t>(*t, "max_total_tokens", "budget")) c.budget.max_total_tokens = static_cast<int>(*v);
    }
    if (const auto* t = subtable(root, "retry")) {
        check_keys(*t, "[retry]", {"attempts", "initial_backoff_ms"});
        if (auto v = get<std::size_t>(*t, "attempts", "retry")) c.retry.attempts = static_cast<int>(*v);
        if (auto v = get<std::size_t>(*t, "initial_backoff_ms", "retry")) {
            c.retry.initial_backoff = std::chrono::milliseconds(static_cast<std::int64_t>(*v));
        }
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), fs::absolute(path).parent_path());
}

}  // namespace agentqpp
