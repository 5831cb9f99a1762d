#include "agentqpp/trace_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "agentqpp/error.hpp"
#include "agentqpp/evaluation.hpp"

namespace agentqpp {

using json = nlohmann::ordered_json;

namespace {

// JSON has no infinities; dense search can produce -inf scores.
json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

double to_number(const json& j) {
    if (j.is_number()) return j.get<double>();
    const auto s = j.get<std::string>();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ParseError("expected a number, got '" + s + "'");
}

json number_map(const std::map<std::string, double>& m) {
    json out = json::object();
    for (const auto& [k, v] : m) out[k] = number(v);
    return out;
}

std::map<std::string, double> to_number_map(const json& j) {
    std::map<std::string, double> out;
    for (const auto& [k, v] : j.items()) out[k] = to_number(v);
    return out;
}

template <typename Fn>
auto read_jsonl(const std::filesystem::path& path, Fn&& parse_line) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<decltype(parse_line(std::string_view{}))> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse_line(line));
        } catch (const std::exception& e) {
            throw ParseError(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace

std::vector<QaItem> read_qa_jsonl(const std::filesystem::path& path) {
    auto items = read_jsonl(path, [](std::string_view line) {
        const auto j = json::parse(line);
        QaItem item;
        item.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
        item.question = j.at("question").get<std::string>();
        item.answers = j.at("answers").get<std::vector<std::string>>();
        if (item.id.empty()) throw ParseError("empty id");
        if (item.question.find_first_not_of(" \t\r\n") == std::string::npos) throw ParseError("blank question");
        if (item.answers.empty()) throw ParseError("no gold answers for " + item.id);
        for (const auto& a : item.answers) {
            if (normalize_answer(a).empty()) throw ParseError("gold answer for " + item.id + " is empty after normalisation");
        }
        return item;
    });
    std::set<std::string> ids;
    for (const auto& it : items) {
        if (!ids.insert(it.id).second) throw ParseError(path.string() + ": duplicate question id " + it.id);
    }
    return items;
}

std::string serialize_trace(const ReasoningTrace& trace, const EvalRecord* eval, std::optional<std::int64_t> timing_ms) {
    json j;
    j["question_id"] = trace.question_id;
    j["question"] = trace.input_question;
    auto& iters = j["iterations"] = json::array();
    for (const auto& it : trace.iterations) {
        json rec;
        rec["index"] = it.index;
        rec["query"] = it.generated_query;
        rec["think"] = it.think_text;
        rec["text"] = it.generated_text;
        auto& docnos = rec["docnos"] = json::array();
        auto& scores = rec["scores"] = json::array();
        for (const auto& e : it.deep_list.entries) {
            docnos.push_back(e.docno);
            scores.push_back(number(e.score));
        }
        auto& ctx = rec["context"] = json::array();
        for (const auto& c : it.context_docs) ctx.push_back({{"docno", c.entry.docno}, {"title", c.title}, {"text", c.text}});
        rec["qpp"] = number_map(it.qpp_estimates);
        if (!it.qpp_errors.empty()) rec["qpp_errors"] = it.qpp_errors;
        iters.push_back(std::move(rec));
    }
    j["answer"] = trace.final_answer ? json(*trace.final_answer) : json(nullptr);
    j["final_text"] = trace.final_text;
    j["termination"] = to_string(trace.termination);
    j["iter_count"] = trace.iter_count;
    if (!trace.note.empty()) j["note"] = trace.note;
    if (!trace.warnings.empty()) j["warnings"] = trace.warnings;
    if (eval) {
        j["em"] = eval->em;
        j["f1"] = eval->f1;
    }
    if (timing_ms) j["timing_ms"] = *timing_ms;
    return j.dump();
}

ReasoningTrace parse_trace(std::string_view line) {
    ReasoningTrace t;
    try {
        const auto j = json::parse(line);
        t.question_id = j.at("question_id").get<std::string>();
        t.input_question = j.at("question").get<std::string>();
        for (const auto& rec : j.at("iterations")) {
            IterationRecord it;
            it.index = rec.at("index").get<int>();
            it.generated_query = rec.at("query").get<std::string>();
            it.think_text = rec.value("think", std::string{});
            it.generated_text = rec.value("text", std::string{});
            it.deep_list.query_text = it.generated_query;
            const auto& docnos = rec.at("docnos");
            const auto& scores = rec.at("scores");
            if (docnos.size() != scores.size()) throw ParseError("docnos/scores length mismatch");
            for (std::size_t i = 0; i < docnos.size(); ++i) {
                it.deep_list.entries.push_back({docnos[i].get<std::string>(), static_cast<int>(i) + 1, to_number(scores[i])});
            }
            const auto& ctx = rec.value("context", json::array());
            if (ctx.size() > it.deep_list.size()) throw ParseError("context longer than ranked list");
            for (std::size_t i = 0; i < ctx.size(); ++i) {
                if (ctx[i].at("docno").get<std::string>() != it.deep_list.entries[i].docno) {
                    throw ParseError("context is not a prefix of the ranked list");
                }
                it.context_docs.push_back(
                    {it.deep_list.entries[i], ctx[i].at("title").get<std::string>(), ctx[i].at("text").get<std::string>()});
            }
            it.qpp_estimates = to_number_map(rec.value("qpp", json::object()));
            if (rec.contains("qpp_errors")) it.qpp_errors = rec["qpp_errors"].get<std::map<std::string, std::string>>();
            t.iterations.push_back(std::move(it));
        }
        if (!j.at("answer").is_null()) t.final_answer = j["answer"].get<std::string>();
        t.final_text = j.value("final_text", std::string{});
        const auto term = termination_from_string(j.at("termination").get<std::string>());
        if (!term) throw ParseError("unknown termination '" + j["termination"].get<std::string>() + "'");
        t.termination = *term;
        t.iter_count = j.at("iter_count").get<int>();
        t.note = j.value("note", std::string{});
        if (j.contains("warnings")) t.warnings = j["warnings"].get<std::vector<std::string>>();
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(std::string("trace: ") + e.what());
    }
    if (auto bad = validate_trace(t)) throw ParseError("trace " + t.question_id + ": " + *bad);
    return t;
}

std::string serialize_eval(const EvalRecord& e) {
    json j;
    j["question_id"] = e.question_id;
    j["em"] = e.em;
    j["f1"] = e.f1;
    j["iter_count"] = e.iter_count;
    j["first_iter_qpp"] = number_map(e.first_iter_qpp);
    return j.dump();
}

EvalRecord parse_eval(std::string_view line) {
    try {
        const auto j = json::parse(line);
        EvalRecord e;
        e.question_id = j.at("question_id").get<std::string>();
        e.em = j.at("em").get<int>();
        e.f1 = j.at("f1").get<double>();
        e.iter_count = j.at("iter_count").get<int>();
        e.first_iter_qpp = to_number_map(j.value("first_iter_qpp", json::object()));
        if (e.em != 0 && e.em != 1) throw ParseError("em must be 0 or 1");
        if (!(e.f1 >= 0.0 && e.f1 <= 1.0)) throw ParseError("f1 out of [0,1]");
        return e;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& ex) {
        throw ParseError(std::string("eval record: ") + ex.what());
    }
}

std::vector<ReasoningTrace> read_traces_jsonl(const std::filesystem::path& path) {
    return read_jsonl(path, [](std::string_view l) { return parse_trace(l); });
}

std::vector<EvalRecord> read_evals_jsonl(const std::filesystem::path& path) {
    return read_jsonl(path, [](std::string_view l) { return parse_eval(l); });
}

}  // namespace agentqpp
