#include "agentqpp/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "agentqpp/error.hpp"
#include "agentqpp/qpp.hpp"

namespace agentqpp {

namespace {

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string normalize_answer(std::string_view text) {
    std::string s;
    s.reserve(text.size());
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::ispunct(c)) continue;
        s.push_back(static_cast<char>(std::tolower(c)));
    }
    std::string out;
    for (const auto& tok : split_ws(s)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

int exact_match(std::string_view pred, const GoldAnswers& golds) {
    const auto p = normalize_answer(pred);
    for (const auto& g : golds.answers) {
        if (normalize_answer(g) == p) return 1;
    }
    return 0;
}

double token_f1(std::string_view pred, const GoldAnswers& golds) {
    const auto ptoks = split_ws(normalize_answer(pred));
    double best = 0.0;
    for (const auto& g : golds.answers) {
        const auto gtoks = split_ws(normalize_answer(g));
        double f1 = 0.0;
        if (ptoks.empty() && gtoks.empty()) {
            f1 = 1.0;
        } else {
            std::unordered_map<std::string, int> counts;
            for (const auto& t : gtoks) ++counts[t];
            int overlap = 0;
            for (const auto& t : ptoks) {
                auto it = counts.find(t);
                if (it != counts.end() && it->second > 0) {
                    --it->second;
                    ++overlap;
                }
            }
            if (overlap > 0) {
                const double p = static_cast<double>(overlap) / static_cast<double>(ptoks.size());
                const double r = static_cast<double>(overlap) / static_cast<double>(gtoks.size());
                f1 = 2.0 * p * r / (p + r);
            }
        }
        best = std::max(best, f1);
    }
    return best;
}

std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        // positions i..j share the mean of ranks i+1..j+1
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) {
        throw ArgumentError("spearman: length mismatch (" + std::to_string(xs.size()) + " vs " +
                            std::to_string(ys.size()) + ")");
    }
    if (xs.size() < 2) throw ArgumentError("spearman: needs at least 2 pairs");
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    const double mx = mean_of(rx), my = mean_of(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

EvalRecord evaluate_trace(const ReasoningTrace& trace, const GoldAnswers& gold) {
    EvalRecord rec;
    rec.question_id = trace.question_id;
    const std::string pred = trace.final_answer.value_or("");
    rec.em = exact_match(pred, gold);
    rec.f1 = token_f1(pred, gold);
    rec.iter_count = trace.iter_count;
    if (!trace.iterations.empty()) rec.first_iter_qpp = trace.iterations.front().qpp_estimates;
    return rec;
}

std::vector<EvalRecord> evaluate_traces(std::span<const ReasoningTrace> traces,
                                        const std::map<std::string, GoldAnswers>& gold) {
    std::vector<EvalRecord> out;
    out.reserve(traces.size());
    for (const auto& t : traces) {
        auto it = gold.find(t.question_id);
        if (it == gold.end()) throw NotFoundError("no gold answers for question " + t.question_id);
        out.push_back(evaluate_trace(t, it->second));
    }
    return out;
}

RepetitionReport repetition_report(std::span<const ReasoningTrace> traces) {
    RepetitionReport rep;
    for (const auto& t : traces) {
        std::set<std::string> seen;
        bool repeated = false;
        for (const auto& it : t.iterations) {
            std::string key;
            for (const auto& tok : split_ws(it.generated_query)) {
                if (!key.empty()) key.push_back(' ');
                for (char c : tok) key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            }
            if (!seen.insert(key).second) {
                repeated = true;
                break;
            }
        }
        if (repeated) {
            ++rep.count;
            rep.question_ids.push_back(t.question_id);
        }
    }
    return rep;
}

RunAnalysis analyze_run(std::span<const ReasoningTrace> traces, std::span<const EvalRecord> evals) {
    std::map<std::string, const EvalRecord*> by_id;
    for (const auto& e : evals) by_id[e.question_id] = &e;

    RunAnalysis out;
    out.questions = traces.size();
    std::vector<double> em, f1, iters;
    for (const auto& t : traces) {
        auto it = by_id.find(t.question_id);
        if (it == by_id.end()) throw NotFoundError("no evaluation record for question " + t.question_id);
        const auto& e = *it->second;
        em.push_back(e.em);
        f1.push_back(e.f1);
        iters.push_back(t.iter_count);
        auto& bucket = out.iter_histogram[t.iter_count];
        (e.em == 1 ? bucket.correct : bucket.incorrect) += 1;
    }
    out.em_mean = mean_of(em);
    out.f1_mean = mean_of(f1);
    out.iter_mean = mean_of(iters);
    if (traces.size() >= 2) out.rho_iter_f1 = spearman(iters, f1);

    // Pool every (query, iteration) estimate of a predictor, z-score the pool,
    // then average per iteration over the traces that reached it.
    for (const char* name : predictor::all) {
        std::vector<double> pool;
        std::vector<int> pool_iter;
        for (const auto& t : traces) {
            for (const auto& rec : t.iterations) {
                auto v = rec.qpp_estimates.find(name);
                if (v == rec.qpp_estimates.end()) continue;
                pool.push_back(v->second);
                pool_iter.push_back(rec.index);
            }
        }
        if (pool.empty()) continue;
        const auto z = zscore(pool);
        std::map<int, std::pair<double, std::size_t>> acc;
        for (std::size_t i = 0; i < z.size(); ++i) {
            auto& [sum, n] = acc[pool_iter[i]];
            sum += z[i];
            ++n;
        }
        auto& series = out.qpp_by_iteration[name];
        for (const auto& [iter, sn] : acc) {
            series.push_back({iter, sn.first / static_cast<double>(sn.second), sn.second});
        }

        std::vector<double> xs, ys;
        for (const auto& t : traces) {
            const auto& e = *by_id.at(t.question_id);
            auto v = e.first_iter_qpp.find(name);
            if (v == e.first_iter_qpp.end()) continue;
            xs.push_back(v->second);
            ys.push_back(e.f1);
        }
        out.rho_qpp_f1[name] = xs.size() >= 2 ? spearman(xs, ys) : std::nullopt;
    }
    out.repetition = repetition_report(traces);
    return out;
}

}  // namespace agentqpp
