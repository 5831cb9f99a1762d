#include <doctest.h>

#include "agentqpp/agent_loop.hpp"
#include "agentqpp/error.hpp"
#include "replay_fixture.hpp"
#include "support.hpp"

using namespace agentqpp;

namespace {

const std::vector<std::string> kStops{"</search>", "</answer>"};

Pipeline succession_pipeline() {
    return parse_pipeline("lexical", 3, testing::lexical_resources(fixture::succession_corpus()));
}

EpisodeOptions fast_options() {
    EpisodeOptions o;
    o.retry.initial_backoff = std::chrono::milliseconds(1);
    return o;
}

// Fails with TransportError the first `failures` times, then delegates.
class FlakyBackend final : public CompletionBackend {
public:
    FlakyBackend(int failures, std::vector<std::string> steps) : failures_(failures), inner_(std::move(steps)) {}
    CompletionResult complete(const CompletionRequest& r) override {
        ++calls;
        if (failures_-- > 0) throw TransportError("connection refused");
        return inner_.complete(r);
    }
    int calls = 0;

private:
    int failures_;
    ScriptedBackend inner_;
};

class LengthBackend final : public CompletionBackend {
public:
    CompletionResult complete(const CompletionRequest& r) override {
        last_max_tokens = r.max_tokens;
        return {"<think>a very long thought that never", FinishReason::length()};
    }
    int last_max_tokens = 0;
};

}  // namespace

TEST_CASE("render_prompt") {
    const auto p = render_prompt(fixture::kQuestion);
    CHECK(p.rfind("Answer the given question. You must conduct reasoning inside <think> and </think>", 0) == 0);
    CHECK(p.find("For example, <answer> Beijing </answer>.\n\nQuestion: ") != std::string::npos);
    CHECK(p.size() >= fixture::kQuestion.size());
    CHECK(p.substr(p.size() - fixture::kQuestion.size()) == fixture::kQuestion);

    const auto x = render_prompt("x");
    CHECK(x.substr(x.size() - 11) == "Question: x");

    std::vector<std::string> warnings;
    const auto tagged = render_prompt("what is <search> for?", &warnings);
    CHECK(tagged.find("Question: what is <search> for?") != std::string::npos);
    CHECK(warnings.size() == 1);

    CHECK_THROWS_AS(render_prompt(""), ArgumentError);
    CHECK_THROWS_AS(render_prompt("  \n"), ArgumentError);
}

TEST_CASE("apply_stop_sequences truncates at the earliest stop") {
    auto r = apply_stop_sequences("<search> q </search> trailing", kStops);
    CHECK(r.text == "<search> q ");
    CHECK(r.finish.hit("</search>"));
    r = apply_stop_sequences("<answer> a </answer> then </search>", kStops);
    CHECK(r.finish.hit("</answer>"));
    r = apply_stop_sequences("plain", kStops);
    CHECK(r.text == "plain");
    CHECK(r.finish.kind == FinishKind::end_of_text);
}

TEST_CASE("parse_model_output") {
    auto p = parse_model_output("<think>I need X</think> <search> heir apparent to Queen Elizabeth II </search>",
                                FinishReason::end_of_text());
    CHECK(p.think_text == "I need X");
    CHECK(std::get<SearchAction>(p.action).query == "heir apparent to Queen Elizabeth II");

    p = parse_model_output("<think>done</think> <answer> Charles, Prince of Wales </answer>", FinishReason::end_of_text());
    CHECK(std::get<AnswerAction>(p.action).text == "Charles, Prince of Wales");

    p = parse_model_output("no tags here", FinishReason::end_of_text());
    CHECK(std::get<MalformedAction>(p.action).reason == "no action tag");

    // closing tag consumed by the stop sequence
    p = parse_model_output("<think>t</think> <search> q ", FinishReason::stop("</search>"));
    CHECK(std::get<SearchAction>(p.action).query == "q");

    p = parse_model_output("<search> q ", FinishReason::end_of_text());
    CHECK(std::get<MalformedAction>(p.action).reason == "unterminated <search>");

    p = parse_model_output("<search>   </search>", FinishReason::end_of_text());
    CHECK(std::get<MalformedAction>(p.action).reason == "empty search query");

    // earliest opening tag wins
    p = parse_model_output("<answer> a </answer> <search> b </search>", FinishReason::end_of_text());
    CHECK(std::holds_alternative<AnswerAction>(p.action));
}

TEST_CASE("format_information") {
    std::vector<ContextDoc> one{{{"h", 1, 1.0}, "Heir apparent", "rank behind her brothers"}};
    CHECK(format_information(one) ==
          "<information>Doc 1(Title: \"Heir apparent\") rank behind her brothers</information>");
    CHECK(format_information({}) == "<information>No results found.</information>");
    std::vector<ContextDoc> three{{{"a", 1, 3}, "A", "x"}, {{"b", 2, 2}, "B", "y"}, {{"c", 3, 1}, "C", "z"}};
    const auto s = format_information(three);
    CHECK(s == "<information>Doc 1(Title: \"A\") x Doc 2(Title: \"B\") y Doc 3(Title: \"C\") z</information>");
}

TEST_CASE("count_tokens") {
    CHECK(count_tokens("") == 0);
    CHECK(count_tokens("  a b\tc\n") == 3);
}

TEST_CASE("replay of the three-turn succession episode") {
    const auto pipeline = succession_pipeline();
    ScriptedBackend llm(fixture::kTurns);
    const auto trace = run_episode(llm, pipeline, "q-throne", fixture::kQuestion, fast_options());

    CHECK(trace.termination == Termination::answered);
    CHECK(trace.iter_count == 2);
    CHECK(trace.final_answer == fixture::kGold);
    REQUIRE(trace.iterations.size() == 2);
    CHECK(trace.iterations[0].generated_query == fixture::kQuery1);
    CHECK(trace.iterations[1].generated_query == fixture::kQuery2);
    CHECK(trace.iterations[0].context_docs.front().title == "Succession to the British throne");
    CHECK(trace.iterations[1].context_docs.front().title == "Heir apparent");
    CHECK(trace.iterations[0].context_docs.size() == 3);
    CHECK(trace.iterations[0].qpp_estimates.count("nqc") == 1);
    CHECK_FALSE(validate_trace(trace));

    // The backend saw exactly the growing transcript.
    REQUIRE(llm.received().size() == 3);
    CHECK(llm.received()[0] == render_prompt(fixture::kQuestion) + "\n");
    CHECK(llm.received()[2] + trace.final_text == render_transcript(trace));
    CHECK(trace.iterations[0].generated_text == fixture::kTurns[0]);
    CHECK(trace.final_text == fixture::kTurns[2]);
    const auto t = render_transcript(trace);
    CHECK(t.find("</search>\n\n<information>Doc 1(Title: \"Succession to the British throne\")") != std::string::npos);
}

TEST_CASE("immediate answer gives Iter 0") {
    ScriptedBackend llm({"<think>known</think> <answer> Paris </answer>"});
    const auto trace = run_episode(llm, succession_pipeline(), "q", "capital of France?", fast_options());
    CHECK(trace.termination == Termination::answered);
    CHECK(trace.iter_count == 0);
    CHECK(trace.final_answer == "Paris");
    CHECK(render_transcript(trace) == render_prompt("capital of France?") + "\n" + trace.final_text);
}

TEST_CASE("searching forever exhausts the iteration budget") {
    std::vector<std::string> steps(20, "<think>again</think> <search> throne </search>");
    ScriptedBackend llm(steps);
    auto opts = fast_options();
    opts.budget.max_iterations = 5;
    const auto trace = run_episode(llm, succession_pipeline(), "q", "who?", opts);
    CHECK(trace.termination == Termination::budget_exhausted);
    CHECK(trace.iter_count == 5);
    CHECK_FALSE(trace.final_answer);
    CHECK(llm.received().size() == 6);
    CHECK_FALSE(validate_trace(trace));
    CHECK(llm.received().back() + trace.final_text == render_transcript(trace));
}

TEST_CASE("answer after the last allowed search is accepted") {
    std::vector<std::string> steps(2, "<search> throne </search>");
    steps.push_back("<answer> Charles </answer>");
    ScriptedBackend llm(steps);
    auto opts = fast_options();
    opts.budget.max_iterations = 2;
    const auto trace = run_episode(llm, succession_pipeline(), "q", "who?", opts);
    CHECK(trace.termination == Termination::answered);
    CHECK(trace.iter_count == 2);
}

TEST_CASE("malformed outputs") {
    SUBCASE("no tags") {
        ScriptedBackend llm({"I think the answer is Paris."});
        const auto t = run_episode(llm, succession_pipeline(), "q", "who?", fast_options());
        CHECK(t.termination == Termination::malformed_output);
        CHECK(t.note == "no action tag");
        CHECK(t.final_text == "I think the answer is Paris.");
    }
    SUBCASE("empty answer") {
        ScriptedBackend llm({"<answer>   </answer>"});
        const auto t = run_episode(llm, succession_pipeline(), "q", "who?", fast_options());
        CHECK(t.termination == Termination::malformed_output);
        CHECK_FALSE(t.final_answer);
        CHECK_FALSE(validate_trace(t));
    }
    SUBCASE("exhausted script") {
        ScriptedBackend llm({});
        const auto t = run_episode(llm, succession_pipeline(), "q", "who?", fast_options());
        CHECK(t.termination == Termination::malformed_output);
    }
}

TEST_CASE("length cut-off counts as budget exhaustion") {
    LengthBackend llm;
    auto opts = fast_options();
    opts.max_tokens_per_turn = 64;
    const auto t = run_episode(llm, succession_pipeline(), "q", "who?", opts);
    CHECK(t.termination == Termination::budget_exhausted);
    CHECK(llm.last_max_tokens == 64);
}

TEST_CASE("token budget caps max_tokens and ends the episode") {
    // each turn returns "<search> throne " (2 tokens); the fourth starts with 1 token left
    std::vector<std::string> steps(10, "<search> throne </search>");
    ScriptedBackend llm(steps);
    auto opts = fast_options();
    opts.budget.max_iterations = 100;
    opts.budget.max_total_tokens = 7;
    const auto t = run_episode(llm, succession_pipeline(), "q", "who?", opts);
    CHECK(t.termination == Termination::budget_exhausted);
    CHECK(t.iter_count == 4);
    CHECK(t.note == "token budget exhausted");
}

TEST_CASE("transport errors are retried") {
    SUBCASE("recovers within the attempt budget") {
        FlakyBackend llm(2, {"<answer> x </answer>"});
        const auto t = run_episode(llm, succession_pipeline(), "q", "who?", fast_options());
        CHECK(t.termination == Termination::answered);
        CHECK(llm.calls == 3);
    }
    SUBCASE("gives up after three attempts") {
        FlakyBackend llm(3, {"<answer> x </answer>"});
        const auto t = run_episode(llm, succession_pipeline(), "q", "who?", fast_options());
        CHECK(t.termination == Termination::malformed_output);
        CHECK(llm.calls == 3);
        CHECK(t.note.find("after 3 attempts") != std::string::npos);
    }
}

TEST_CASE("retrieval failure ends the episode with a note") {
    auto res = testing::lexical_resources(fixture::succession_corpus());
    auto bad = std::make_shared<const FunctionScorer>(
        [](const std::string&, const Document&) -> double { throw std::runtime_error("scorer down"); });
    const auto p = parse_pipeline("lexical %20 >> rerank(20)", 3, res, bad);
    ScriptedBackend llm({"<search> throne </search>"});
    const auto t = run_episode(llm, p, "q", "who?", fast_options());
    CHECK(t.termination == Termination::malformed_output);
    CHECK(t.note.rfind("retrieval failed:", 0) == 0);
    CHECK(t.iter_count == 0);
}

TEST_CASE("rule-based reasoner") {
    const auto pipeline = succession_pipeline();
    SUBCASE("gold in the first retrieval") {
        auto llm = rule_based_reasoner({"Charles, Prince of Wales"}, {"heir apparent Queen Elizabeth"});
        const auto t = run_episode(*llm, pipeline, "q", "who is the heir?", fast_options());
        CHECK(t.termination == Termination::answered);
        CHECK(t.iter_count == 1);
        CHECK(t.final_answer == "Charles, Prince of Wales");
    }
    SUBCASE("gold never retrieved") {
        auto llm = rule_based_reasoner({"Napoleon"}, {"coronation ceremony", "queen consort"});
        const auto t = run_episode(*llm, pipeline, "q", "who?", fast_options());
        CHECK(t.termination == Termination::budget_exhausted);
        CHECK(t.iter_count == 5);
        CHECK(t.iterations[0].generated_query == "coronation ceremony");
        CHECK(t.iterations[1].generated_query == "queen consort");
        CHECK(t.iterations[2].generated_query == "coronation ceremony");
    }
    SUBCASE("matching ignores case") {
        auto llm = rule_based_reasoner({"CHARLES, PRINCE OF WALES"}, {"heir apparent"});
        const auto t = run_episode(*llm, pipeline, "q", "who?", fast_options());
        CHECK(t.final_answer == "CHARLES, PRINCE OF WALES");
    }
    CHECK_THROWS_AS(RuleBasedReasoner({"x"}, {}), ArgumentError);
}
