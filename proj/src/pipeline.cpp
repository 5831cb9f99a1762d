#include <algorithm>
#include <charconv>
#include <cctype>

#include "agentqpp/error.hpp"
#include "agentqpp/retrieval.hpp"

namespace agentqpp {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

bool is_search(const PipelineStage& s) {
    return std::holds_alternative<stage::LexicalSearch>(s) || std::holds_alternative<stage::DenseSearch>(s);
}

std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

std::size_t parse_count(std::string_view s, std::string_view what) {
    const auto t = trim(s);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size() || v < 1) {
        throw ConfigError("pipeline: " + std::string(what) + " must be a positive integer, got '" + t + "'");
    }
    return v;
}

}  // namespace

std::string describe(const PipelineStage& s) {
    return std::visit(overloaded{
                          [](const stage::LexicalSearch&) { return std::string("lexical"); },
                          [](const stage::DenseSearch&) { return std::string("dense"); },
                          [](const stage::Cutoff& c) { return "%" + std::to_string(c.k); },
                          [](const stage::Rerank& r) { return "rerank(" + std::to_string(r.depth) + ")"; },
                      },
                      s);
}

const char* to_string(RetrieverClass c) {
    switch (c) {
        case RetrieverClass::lexical: return "lexical";
        case RetrieverClass::reranked: return "reranked";
        case RetrieverClass::dense: return "dense";
    }
    return "lexical";
}

Pipeline::Pipeline(std::vector<PipelineStage> stages, std::size_t context_k, RetrievalResources resources)
    : stages_(std::move(stages)), context_k_(context_k), resources_(std::move(resources)) {
    if (stages_.empty()) throw ConfigError("pipeline has no stages");
    if (!is_search(stages_.front())) throw ConfigError("pipeline must start with a search stage");
    if (context_k_ < 1) throw ConfigError("context_k must be >= 1");
    if (!resources_.docs) throw ConfigError("pipeline needs a document store");
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        const auto& s = stages_[i];
        const auto where = "pipeline stage " + std::to_string(i + 1) + " (" + describe(s) + "): ";
        if (i > 0 && is_search(s)) throw ConfigError(where + "search stages may only appear first");
        std::visit(overloaded{
                       [&](const stage::LexicalSearch&) {
                           if (!resources_.lexical) throw ConfigError(where + "no lexical index configured");
                       },
                       [&](const stage::DenseSearch&) {
                           if (!resources_.embeddings || !resources_.embedder) {
                               throw ConfigError(where + "needs an embedding store and an embedder");
                           }
                           if (resources_.embedder->dim() != resources_.embeddings->dim()) {
                               throw ConfigError(where + "embedder and embedding store dimensions differ");
                           }
                       },
                       [&](const stage::Cutoff& c) {
                           if (c.k < 1) throw ConfigError(where + "cutoff must be >= 1");
                       },
                       [&](const stage::Rerank& r) {
                           if (!r.scorer) throw ConfigError(where + "no reranker configured");
                           if (r.depth < 1) throw ConfigError(where + "rerank depth must be >= 1");
                       },
                   },
                   s);
    }
    if (auto d = max_output_depth(); d && context_k_ > *d) {
        throw ConfigError("context_k " + std::to_string(context_k_) + " exceeds pipeline output depth " +
                          std::to_string(*d));
    }
}

RetrieverClass Pipeline::retriever_class() const noexcept {
    if (std::holds_alternative<stage::DenseSearch>(stages_.front())) return RetrieverClass::dense;
    for (const auto& s : stages_) {
        if (std::holds_alternative<stage::Rerank>(s)) return RetrieverClass::reranked;
    }
    return RetrieverClass::lexical;
}

std::optional<std::size_t> Pipeline::max_output_depth() const noexcept {
    std::optional<std::size_t> depth;
    for (const auto& s : stages_) {
        if (const auto* c = std::get_if<stage::Cutoff>(&s)) {
            depth = depth ? std::min(*depth, c->k) : c->k;
        } else if (const auto* r = std::get_if<stage::Rerank>(&s)) {
            depth = depth ? std::min(*depth, r->depth) : r->depth;
        }
    }
    return depth;
}

PipelineOutput Pipeline::execute(const std::string& query, std::vector<std::string>* warnings) const {
    PipelineOutput out;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        const auto& s = stages_[i];
        try {
            std::visit(overloaded{
                           [&](const stage::LexicalSearch& ls) {
                               const auto n = std::max<std::size_t>(resources_.lexical->doc_count(), 1);
                               out.list = resources_.lexical->search(query, n, ls.params);
                           },
                           [&](const stage::DenseSearch&) {
                               out.query_vec = embed_query(*resources_.embedder, query);
                               const auto n = std::max<std::size_t>(resources_.embeddings->size(), 1);
                               out.list = search_dense(*resources_.embeddings, *out.query_vec, n, warnings, query);
                           },
                           [&](const stage::Cutoff& c) {
                               if (out.list.entries.size() > c.k) out.list.entries.resize(c.k);
                           },
                           [&](const stage::Rerank& r) {
                               out.list = rerank(*r.scorer, out.list, r.depth, *resources_.docs);
                           },
                       },
                       s);
        } catch (const Error& e) {
            throw Error(e.kind(), "pipeline stage " + std::to_string(i + 1) + " (" + describe(s) + "): " + e.what());
        } catch (const std::exception& e) {
            throw Error(ErrorKind::internal,
                        "pipeline stage " + std::to_string(i + 1) + " (" + describe(s) + "): " + e.what());
        }
    }
    return out;
}

RankedList run_pipeline(const Pipeline& p, const std::string& query) { return p.execute(query).list; }

std::optional<std::string> preset_expression(std::string_view name, std::size_t qpp_depth) {
    std::string compact;
    for (char c : name) {
        if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
    }
    const auto depth = std::to_string(qpp_depth);
    if (compact == "lexical" || compact == "bm25") return "lexical %" + depth;
    if (compact == "dense" || compact == "e5") return "dense %" + depth;
    if (compact == "lexical%20>>rerank" || compact == "lexical%20≫rerank" || compact == "bm25%20>>rerank" ||
        compact == "monot5") {
        return std::string("lexical %20 >> rerank(20)");
    }
    return std::nullopt;
}

Pipeline parse_pipeline(std::string_view expr, std::size_t context_k, RetrievalResources resources,
                        std::shared_ptr<const Scorer> reranker, std::size_t qpp_depth) {
    std::string text(expr);
    if (auto preset = preset_expression(text, qpp_depth)) text = *preset;
    // Normalise the unicode composition operator to ">>".
    for (std::size_t pos; (pos = text.find("≫")) != std::string::npos;) text.replace(pos, std::string("≫").size(), ">>");

    std::vector<PipelineStage> stages;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto sep = text.find(">>", start);
        auto part = trim(std::string_view(text).substr(start, sep == std::string::npos ? std::string::npos : sep - start));
        if (part.empty()) throw ConfigError("pipeline '" + std::string(expr) + "': empty stage");

        std::optional<std::size_t> cutoff;
        if (const auto pct = part.find('%'); pct != std::string::npos) {
            cutoff = parse_count(std::string_view(part).substr(pct + 1), "cutoff");
            part = trim(std::string_view(part).substr(0, pct));
        }
        std::string name = part;
        std::optional<std::size_t> arg;
        if (const auto open = part.find('('); open != std::string::npos) {
            const auto close = part.rfind(')');
            if (close == std::string::npos || close < open) {
                throw ConfigError("pipeline '" + std::string(expr) + "': unbalanced parentheses in '" + part + "'");
            }
            const auto inner = trim(std::string_view(part).substr(open + 1, close - open - 1));
            // A leading letter marks a scorer label such as rerank(table); the
            // configured reranker is used either way.
            if (inner.empty() || !std::isalpha(static_cast<unsigned char>(inner.front()))) {
                arg = parse_count(inner, "stage argument");
            }
            name = trim(std::string_view(part).substr(0, open));
        }
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });

        if (name == "lexical" || name == "bm25") {
            stages.emplace_back(stage::LexicalSearch{});
        } else if (name == "dense") {
            stages.emplace_back(stage::DenseSearch{});
        } else if (name == "rerank") {
            stages.emplace_back(stage::Rerank{reranker, arg.value_or(20)});
        } else if (name.empty() && cutoff) {
            // bare "%k" stage
        } else {
            throw ConfigError("pipeline '" + std::string(expr) + "': unknown stage '" + name + "'");
        }
        if (cutoff) stages.emplace_back(stage::Cutoff{*cutoff});
        if (sep == std::string::npos) break;
        start = sep + 2;
    }
    return Pipeline(std::move(stages), context_k, std::move(resources));
}

}  // namespace agentqpp
