#include "agentqpp/agent_loop.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

#include "agentqpp/error.hpp"

namespace agentqpp {

namespace {

constexpr std::string_view kInstruction =
    "Answer the given question. You must conduct reasoning inside <think> and </think> first every time you get "
    "new information. After reasoning, if you find you lack some knowledge, you can call a search engine by "
    "<search> query </search> and it will return the top searched results between <information> and "
    "</information>. You can search as many times as your want. If you find no further external knowledge needed, "
    "you can directly provide the answer inside <answer> and </answer>, without detailed illustrations. For "
    "example, <answer> Beijing </answer>.";

// Between the prompt and the first generated turn, and around each
// information block.
constexpr std::string_view kPromptSeparator = "\n";
constexpr std::string_view kInformationSeparator = "\n\n";

constexpr std::string_view kProtocolTags[] = {"<think>",       "</think>",       "<search>", "</search>",
                                              "<information>", "</information>", "<answer>", "</answer>"};

std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

// Content of every <information>...</information> block in the context.
std::vector<std::string_view> information_blocks(std::string_view ctx) {
    std::vector<std::string_view> blocks;
    constexpr std::string_view open = "<information>", close = "</information>";
    std::size_t pos = 0;
    while ((pos = ctx.find(open, pos)) != std::string_view::npos) {
        // Retrieved blocks start a line; the instruction text only mentions the tag.
        if (pos > 0 && ctx[pos - 1] != '\n') {
            pos += open.size();
            continue;
        }
        const auto start = pos + open.size();
        const auto end = ctx.find(close, start);
        if (end == std::string_view::npos) break;
        blocks.push_back(ctx.substr(start, end - start));
        pos = end + close.size();
    }
    return blocks;
}

}  // namespace

CompletionResult apply_stop_sequences(std::string_view raw, std::span<const std::string> stops) {
    std::size_t best = std::string_view::npos;
    const std::string* which = nullptr;
    for (const auto& s : stops) {
        if (s.empty()) continue;
        const auto p = raw.find(s);
        if (p != std::string_view::npos && p < best) {
            best = p;
            which = &s;
        }
    }
    if (!which) return {std::string(raw), FinishReason::end_of_text()};
    return {std::string(raw.substr(0, best)), FinishReason::stop(*which)};
}

CompletionResult ScriptedBackend::complete(const CompletionRequest& request) {
    received_.push_back(request.context);
    if (next_ >= steps_.size()) return {"", FinishReason::end_of_text()};
    return apply_stop_sequences(steps_[next_++], request.stop_sequences);
}

RuleBasedReasoner::RuleBasedReasoner(std::vector<std::string> gold_substrings, std::vector<std::string> reformulations)
    : gold_(std::move(gold_substrings)), reformulations_(std::move(reformulations)) {
    if (reformulations_.empty()) throw ArgumentError("rule-based reasoner needs at least one reformulation");
}

CompletionResult RuleBasedReasoner::complete(const CompletionRequest& request) {
    const auto blocks = information_blocks(request.context);
    std::string seen;
    for (auto b : blocks) {
        seen += lower(b);
        seen.push_back('\n');
    }
    for (const auto& g : gold_) {
        if (!g.empty() && seen.find(lower(g)) != std::string::npos) {
            return apply_stop_sequences("<think>found</think> <answer> " + g + " </answer>", request.stop_sequences);
        }
    }
    const auto& q = reformulations_[blocks.size() % reformulations_.size()];
    return apply_stop_sequences("<think>searching</think> <search> " + q + " </search>", request.stop_sequences);
}

std::unique_ptr<CompletionBackend> rule_based_reasoner(std::vector<std::string> gold_substrings,
                                                       std::vector<std::string> reformulations) {
    return std::make_unique<RuleBasedReasoner>(std::move(gold_substrings), std::move(reformulations));
}

std::string render_prompt(const std::string& question, std::vector<std::string>* warnings) {
    if (trim(question).empty()) throw ArgumentError("question must not be empty");
    if (warnings) {
        for (auto tag : kProtocolTags) {
            if (question.find(tag) != std::string::npos) {
                warnings->push_back("question contains protocol tag " + std::string(tag));
            }
        }
    }
    std::string out(kInstruction);
    out += "\n\nQuestion: ";
    out += question;
    return out;
}

ParsedAction parse_model_output(std::string_view text, const FinishReason& finish) {
    ParsedAction out;
    if (const auto t0 = text.find("<think>"); t0 != std::string_view::npos) {
        const auto start = t0 + std::string_view("<think>").size();
        const auto t1 = text.find("</think>", start);
        if (t1 != std::string_view::npos) out.think_text = trim(text.substr(start, t1 - start));
    }

    const auto s = text.find(kSearchOpen);
    const auto a = text.find(kAnswerOpen);
    if (s == std::string_view::npos && a == std::string_view::npos) {
        out.action = MalformedAction{"no action tag"};
        return out;
    }
    const bool is_search = s < a;  // npos compares greater than any position
    const std::string_view open = is_search ? kSearchOpen : kAnswerOpen;
    const std::string_view close = is_search ? kSearchClose : kAnswerClose;
    const auto start = (is_search ? s : a) + open.size();
    const auto end = text.find(close, start);
    std::string body;
    if (end != std::string_view::npos) {
        body = trim(text.substr(start, end - start));
    } else if (finish.hit(close)) {
        body = trim(text.substr(start));
    } else {
        out.action = MalformedAction{"unterminated " + std::string(open)};
        return out;
    }
    if (is_search) {
        if (body.empty()) {
            out.action = MalformedAction{"empty search query"};
        } else {
            out.action = SearchAction{std::move(body)};
        }
    } else {
        out.action = AnswerAction{std::move(body)};
    }
    return out;
}

std::string format_information(std::span<const ContextDoc> docs) {
    if (docs.empty()) return "<information>No results found.</information>";
    std::string out = "<information>";
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i) out.push_back(' ');
        out += "Doc " + std::to_string(i + 1) + "(Title: \"" + docs[i].title + "\") " + docs[i].text;
    }
    out += "</information>";
    return out;
}

int count_tokens(std::string_view text) {
    int n = 0;
    bool in_word = false;
    for (char c : text) {
        const bool ws = std::isspace(static_cast<unsigned char>(c));
        if (!ws && !in_word) ++n;
        in_word = !ws;
    }
    return n;
}

std::string render_transcript(const ReasoningTrace& trace) {
    std::string out = render_prompt(trace.input_question);
    out += kPromptSeparator;
    for (const auto& it : trace.iterations) {
        out += it.generated_text;
        out += kInformationSeparator;
        out += format_information(it.context_docs);
        out += kInformationSeparator;
    }
    out += trace.final_text;
    return out;
}

namespace {

CompletionResult complete_with_retry(CompletionBackend& llm, const CompletionRequest& req, const RetryPolicy& retry,
                                     std::string& error_note) {
    auto backoff = retry.initial_backoff;
    const int attempts = std::max(1, retry.attempts);
    for (int attempt = 1;; ++attempt) {
        try {
            return llm.complete(req);
        } catch (const TransportError& e) {
            if (attempt >= attempts) {
                error_note = "completion backend failed after " + std::to_string(attempts) + " attempts: " + e.what();
                throw;
            }
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
}

void finish(ReasoningTrace& trace, Termination t, std::string final_text, std::string note = {}) {
    trace.termination = t;
    trace.final_text = std::move(final_text);
    trace.note = std::move(note);
    trace.iter_count = static_cast<int>(trace.iterations.size());
}

}  // namespace

ReasoningTrace run_episode(CompletionBackend& llm, const Pipeline& pipeline, const std::string& question_id,
                           const std::string& question, const EpisodeOptions& options) {
    ReasoningTrace trace;
    trace.question_id = question_id;
    trace.input_question = question;

    std::string context = render_prompt(question, &trace.warnings);
    context += kPromptSeparator;

    const auto& res = pipeline.resources();
    const auto retriever = pipeline.retriever_class();
    const std::size_t deep_depth = std::max(options.qpp.max_depth(), pipeline.context_k());
    int tokens_used = 0;

    for (;;) {
        const int remaining = options.budget.max_total_tokens - tokens_used;
        if (remaining <= 0) {
            finish(trace, Termination::budget_exhausted, {}, "token budget exhausted");
            return trace;
        }
        CompletionRequest req{context, {kSearchClose, kAnswerClose}, std::min(options.max_tokens_per_turn, remaining)};
        CompletionResult result;
        try {
            std::string note;
            try {
                result = complete_with_retry(llm, req, options.retry, note);
            } catch (const TransportError&) {
                finish(trace, Termination::malformed_output, {}, note);
                return trace;
            }
        } catch (const Error& e) {
            finish(trace, Termination::malformed_output, {}, std::string("completion backend error: ") + e.what());
            return trace;
        }
        tokens_used += count_tokens(result.text);

        const auto parsed = parse_model_output(result.text, result.finish);

        if (const auto* ans = std::get_if<AnswerAction>(&parsed.action)) {
            std::string final_text = result.text;
            if (result.finish.hit(kAnswerClose)) final_text += kAnswerClose;
            if (ans->text.empty()) {
                finish(trace, Termination::malformed_output, std::move(final_text), "empty answer");
            } else {
                trace.final_answer = ans->text;
                finish(trace, Termination::answered, std::move(final_text));
            }
            return trace;
        }
        if (const auto* bad = std::get_if<MalformedAction>(&parsed.action)) {
            if (result.finish.kind == FinishKind::length) {
                finish(trace, Termination::budget_exhausted, result.text, "generation hit the token limit");
            } else {
                finish(trace, Termination::malformed_output, result.text, bad->reason);
            }
            return trace;
        }

        const auto& query = std::get<SearchAction>(parsed.action).query;
        std::string generated = result.text;
        if (result.finish.hit(kSearchClose)) generated += kSearchClose;
        if (static_cast<int>(trace.iterations.size()) >= options.budget.max_iterations) {
            finish(trace, Termination::budget_exhausted, std::move(generated), "iteration budget exhausted");
            return trace;
        }

        IterationRecord rec;
        rec.index = static_cast<int>(trace.iterations.size()) + 1;
        rec.think_text = parsed.think_text;
        rec.generated_query = query;
        rec.generated_text = std::move(generated);
        try {
            std::vector<std::string> warnings;
            auto out = pipeline.execute(query, &warnings);
            for (auto& w : warnings) trace.warnings.push_back("iteration " + std::to_string(rec.index) + ": " + w);
            rec.deep_list = out.list.prefix(deep_depth);
            for (std::size_t i = 0; i < std::min(pipeline.context_k(), rec.deep_list.size()); ++i) {
                const auto& entry = rec.deep_list.entries[i];
                const auto& doc = res.docs->at(entry.docno);
                rec.context_docs.push_back({entry, doc.title, doc.text});
            }

            QppInputs inputs;
            inputs.retriever = retriever;
            std::optional<std::vector<double>> qvec = std::move(out.query_vec);
            if (retriever != RetrieverClass::lexical && res.embeddings && res.embedder && !qvec) {
                try {
                    qvec = embed_query(*res.embedder, query);
                } catch (const Error& e) {
                    trace.warnings.push_back("iteration " + std::to_string(rec.index) +
                                             ": query embedding failed: " + e.what());
                }
            }
            if (qvec && res.embeddings) {
                inputs.query_vec = &*qvec;
                inputs.store = res.embeddings.get();
            }
            if (retriever == RetrieverClass::lexical && options.qpp.nqc_normalize && res.lexical) {
                inputs.nqc_normalizer = res.lexical->corpus_score(query);
            }
            auto est = estimate_all(rec.deep_list, inputs, options.qpp);
            rec.qpp_estimates = std::move(est.values);
            rec.qpp_errors = std::move(est.errors);
            for (auto& f : est.flags) trace.warnings.push_back("iteration " + std::to_string(rec.index) + ": " + f);
        } catch (const Error& e) {
            finish(trace, Termination::malformed_output, rec.generated_text, std::string("retrieval failed: ") + e.what());
            return trace;
        }

        context += rec.generated_text;
        context += kInformationSeparator;
        context += format_information(rec.context_docs);
        context += kInformationSeparator;
        trace.iterations.push_back(std::move(rec));
        trace.iter_count = static_cast<int>(trace.iterations.size());
    }
}

}  // namespace agentqpp
