#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "agentqpp/error.hpp"
#include "agentqpp/experiment.hpp"
#include "agentqpp/http_backends.hpp"

namespace agentqpp {

namespace fs = std::filesystem;

namespace {

struct Script {
    std::vector<std::string> shared;  // steps without a question_id
    std::map<std::string, std::vector<std::string>> per_question;
};

// Scripted backend file: JSONL {"step": int, "text": str[, "question_id": str]}.
Script read_script(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open script " + path.string());
    std::map<std::string, std::map<long, std::string>> groups;  // "" = shared
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto step = j.at("step").get<long>();
            const auto qid = j.value("question_id", std::string{});
            if (!groups[qid].emplace(step, j.at("text").get<std::string>()).second) {
                throw ParseError("duplicate step " + std::to_string(step));
            }
        } catch (const std::exception& e) {
            throw ParseError(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    Script s;
    for (auto& [qid, steps] : groups) {
        std::vector<std::string> texts;
        for (auto& [_, t] : steps) texts.push_back(std::move(t));
        if (qid.empty()) {
            s.shared = std::move(texts);
        } else {
            s.per_question[qid] = std::move(texts);
        }
    }
    return s;
}

std::string substitute_question(std::string tmpl, const std::string& question) {
    constexpr std::string_view key = "{question}";
    for (std::size_t pos = 0; (pos = tmpl.find(key, pos)) != std::string::npos;) {
        tmpl.replace(pos, key.size(), question);
        pos += question.size();
    }
    return tmpl;
}

struct Resources {
    RetrievalResources retrieval;
    std::shared_ptr<const Scorer> reranker;
};

Resources load_resources(const RunConfig& cfg) {
    Resources r;
    std::shared_ptr<const LexicalIndex> index;
    if (cfg.index_path) {
        index = std::make_shared<const LexicalIndex>(LexicalIndex::load(cfg.index_path->string()));
    } else {
        auto docs = std::make_shared<const DocumentStore>(read_corpus_jsonl(cfg.corpus_path.string()));
        index = std::make_shared<const LexicalIndex>(LexicalIndex::build(docs));
    }
    r.retrieval.docs = index->shared_documents();
    r.retrieval.lexical = index;
    if (cfg.embeddings_path) {
        r.retrieval.embeddings = std::make_shared<const EmbeddingStore>(read_embeddings_tsv(cfg.embeddings_path->string()));
    }
    switch (cfg.embedder.kind) {
        case EmbedderKind::http:
            r.retrieval.embedder = std::make_shared<const HttpEmbedder>(cfg.embedder.url, cfg.embedder.dim);
            break;
        case EmbedderKind::table:
            r.retrieval.embedder = std::make_shared<const LookupEmbedder>(LookupEmbedder::from_tsv(cfg.embedder.table_path.string()));
            break;
        case EmbedderKind::none: break;
    }
    if (r.retrieval.embedder && r.retrieval.embeddings && r.retrieval.embedder->dim() != r.retrieval.embeddings->dim()) {
        throw ConfigError("embedder dimension " + std::to_string(r.retrieval.embedder->dim()) +
                          " differs from embeddings dimension " + std::to_string(r.retrieval.embeddings->dim()));
    }
    switch (cfg.reranker.kind) {
        case RerankerKind::http: r.reranker = std::make_shared<const HttpScorer>(cfg.reranker.url); break;
        case RerankerKind::embedding:
            r.reranker = std::make_shared<const EmbeddingCosineScorer>(r.retrieval.embedder, r.retrieval.embeddings);
            break;
        case RerankerKind::table:
            r.reranker = std::make_shared<const TableScorer>(TableScorer::from_tsv(cfg.reranker.table_path.string()));
            break;
        case RerankerKind::none: break;
    }
    return r;
}

struct EpisodeResult {
    std::string question_id;
    std::string trace_line;
    std::string eval_line;
    Termination termination = Termination::malformed_output;
    int em = 0;
    double f1 = 0.0;
};

}  // namespace

RunSummary cmd_run(const fs::path& config_path) { return cmd_run(load_run_config(config_path)); }

RunSummary cmd_run(const RunConfig& cfg) {
    cfg.validate();
    // Everything that can fail on configuration happens before the first episode.
    const auto res = load_resources(cfg);
    const Pipeline pipeline = parse_pipeline(cfg.pipeline, cfg.context_k, res.retrieval, res.reranker, cfg.qpp.max_depth());
    const auto qa = read_qa_jsonl(cfg.qa_path);
    Script script;
    if (cfg.backend.kind == BackendKind::scripted) script = read_script(cfg.backend.script_path);

    auto make_backend = [&](const QaItem& item) -> std::unique_ptr<CompletionBackend> {
        switch (cfg.backend.kind) {
            case BackendKind::http:
                return std::make_unique<HttpCompletionBackend>(cfg.backend.url, cfg.backend.temperature, HttpOptions{},
                                                               cfg.seed ? std::optional(cfg.seed) : std::nullopt);
            case BackendKind::scripted: {
                auto it = script.per_question.find(item.id);
                return std::make_unique<ScriptedBackend>(it != script.per_question.end() ? it->second : script.shared);
            }
            case BackendKind::rule_based: {
                std::vector<std::string> refs;
                for (const auto& r : cfg.backend.reformulations) refs.push_back(substitute_question(r, item.question));
                return rule_based_reasoner(item.answers, std::move(refs));
            }
        }
        throw Error(ErrorKind::internal, "unknown backend kind");
    };
    // Fail fast on an unusable backend config, such as a bad URL.
    if (!qa.empty()) make_backend(qa.front());

    EpisodeOptions opts;
    opts.budget = cfg.budget;
    opts.retry = cfg.retry;
    opts.qpp = cfg.qpp;
    opts.max_tokens_per_turn = cfg.max_tokens_per_turn;

    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());
    const auto traces_path = cfg.output_dir / "traces.jsonl";
    const auto evals_path = cfg.output_dir / "evals.jsonl";
    const auto partial_path = cfg.output_dir / "traces.jsonl.partial";

    std::mutex mu;
    std::condition_variable cv;
    std::deque<EpisodeResult> queue;
    std::size_t finished_workers = 0;
    std::exception_ptr failure;
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= qa.size()) break;
            const auto& item = qa[i];
            EpisodeResult out;
            try {
                const auto t0 = std::chrono::steady_clock::now();
                auto backend = make_backend(item);
                auto trace = run_episode(*backend, pipeline, item.id, item.question, opts);
                const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
                const auto eval = evaluate_trace(trace, item.gold());
                out.question_id = item.id;
                out.trace_line = serialize_trace(trace, &eval, cfg.record_timing ? std::optional(ms.count()) : std::nullopt);
                out.eval_line = serialize_eval(eval);
                out.termination = trace.termination;
                out.em = eval.em;
                out.f1 = eval.f1;
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                next = qa.size();
                break;
            }
            {
                std::lock_guard lock(mu);
                queue.push_back(std::move(out));
            }
            cv.notify_one();
        }
        {
            std::lock_guard lock(mu);
            ++finished_workers;
        }
        cv.notify_one();
    };

    const std::size_t n_workers = std::max<std::size_t>(1, std::min(cfg.workers, std::max<std::size_t>(qa.size(), 1)));
    std::vector<EpisodeResult> results;
    results.reserve(qa.size());
    {
        std::ofstream partial(partial_path, std::ios::trunc);
        if (!partial) throw IoError("cannot write " + partial_path.string());
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);

        // Single writer: append each finished episode as it arrives.
        std::unique_lock lock(mu);
        for (;;) {
            cv.wait(lock, [&] { return !queue.empty() || finished_workers == n_workers; });
            while (!queue.empty()) {
                auto r = std::move(queue.front());
                queue.pop_front();
                lock.unlock();
                partial << r.trace_line << '\n';
                partial.flush();
                results.push_back(std::move(r));
                lock.lock();
            }
            if (finished_workers == n_workers) break;
        }
    }
    if (failure) std::rethrow_exception(failure);

    std::sort(results.begin(), results.end(),
              [](const EpisodeResult& a, const EpisodeResult& b) { return a.question_id < b.question_id; });
    {
        std::ofstream traces(traces_path, std::ios::trunc | std::ios::binary);
        std::ofstream evals(evals_path, std::ios::trunc | std::ios::binary);
        if (!traces || !evals) throw IoError("cannot write results into " + cfg.output_dir.string());
        for (const auto& r : results) {
            traces << r.trace_line << '\n';
            evals << r.eval_line << '\n';
        }
        if (!traces || !evals) throw IoError("write failed in " + cfg.output_dir.string());
    }
    fs::remove(partial_path, ec);

    RunSummary s;
    s.episodes = results.size();
    s.traces_path = traces_path;
    s.evals_path = evals_path;
    for (const auto& r : results) {
        switch (r.termination) {
            case Termination::answered: ++s.answered; break;
            case Termination::budget_exhausted: ++s.budget_exhausted; break;
            case Termination::malformed_output: ++s.malformed; break;
        }
        s.em_mean += r.em;
        s.f1_mean += r.f1;
    }
    if (!results.empty()) {
        s.em_mean /= static_cast<double>(results.size());
        s.f1_mean /= static_cast<double>(results.size());
    }
    return s;
}

std::size_t cmd_index(const fs::path& corpus_path, const fs::path& out_path) {
    auto docs = read_corpus_jsonl(corpus_path.string());
    std::shared_ptr<const DocumentStore> store;
    try {
        store = std::make_shared<const DocumentStore>(std::move(docs));
    } catch (const ArgumentError& e) {
        throw ParseError(corpus_path.string() + ": " + e.what());
    }
    const auto index = LexicalIndex::build(store);
    index.save(out_path.string());
    return index.doc_count();
}

}  // namespace agentqpp
