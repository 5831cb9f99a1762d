#include "agentqpp/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "agentqpp/error.hpp"

namespace agentqpp {

std::vector<double> RankedList::scores() const {
    std::vector<double> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.score);
    return out;
}

RankedList RankedList::prefix(std::size_t k) const {
    RankedList out;
    out.query_text = query_text;
    out.entries.assign(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(std::min(k, entries.size())));
    return out;
}

RankedList make_ranked_list(std::string query_text,
                            std::vector<std::pair<std::string, double>> scored) {
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    RankedList list;
    list.query_text = std::move(query_text);
    list.entries.reserve(scored.size());
    int rank = 1;
    for (auto& [docno, score] : scored) {
        list.entries.push_back({std::move(docno), rank++, score});
    }
    return list;
}

std::optional<std::string> validate_ranked_list(const RankedList& list) {
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < list.entries.size(); ++i) {
        const auto& e = list.entries[i];
        const int expected = static_cast<int>(i) + 1;
        if (e.rank != expected) {
            return "rank gap at position " + std::to_string(expected) + " (found rank " +
                   std::to_string(e.rank) + ")";
        }
        if (i > 0 && e.score > list.entries[i - 1].score) {
            return "score inversion at rank " + std::to_string(e.rank);
        }
        if (!seen.insert(e.docno).second) {
            return "duplicate docno " + e.docno;
        }
    }
    return std::nullopt;
}

EmbeddingStore::EmbeddingStore(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw ArgumentError("embedding dimension must be >= 1");
}

void EmbeddingStore::add(const std::string& docno, std::vector<double> vec) {
    if (vec.size() != dim_) {
        throw ArgumentError("embedding for " + docno + " has length " + std::to_string(vec.size()) +
                            ", expected " + std::to_string(dim_));
    }
    if (!std::all_of(vec.begin(), vec.end(), [](double x) { return std::isfinite(x); })) {
        throw ArgumentError("embedding for " + docno + " has non-finite entries");
    }
    if (!vectors_.emplace(docno, std::move(vec)).second) {
        throw ArgumentError("duplicate embedding for docno " + docno);
    }
}

const std::vector<double>* EmbeddingStore::find(const std::string& docno) const {
    auto it = vectors_.find(docno);
    return it == vectors_.end() ? nullptr : &it->second;
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::answered: return "answered";
        case Termination::budget_exhausted: return "budget_exhausted";
        case Termination::malformed_output: return "malformed_output";
    }
    return "malformed_output";
}

std::optional<Termination> termination_from_string(const std::string& s) {
    if (s == "answered") return Termination::answered;
    if (s == "budget_exhausted") return Termination::budget_exhausted;
    if (s == "malformed_output") return Termination::malformed_output;
    return std::nullopt;
}

namespace {

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::optional<std::string> validate_trace(const ReasoningTrace& trace) {
    if (trace.iter_count != static_cast<int>(trace.iterations.size())) {
        return "iter_count " + std::to_string(trace.iter_count) + " != " +
               std::to_string(trace.iterations.size()) + " iterations";
    }
    for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
        const auto& it = trace.iterations[i];
        if (it.index != static_cast<int>(i) + 1) {
            return "iteration at position " + std::to_string(i + 1) + " has index " +
                   std::to_string(it.index);
        }
        if (it.context_docs.size() > it.deep_list.size()) {
            return "iteration " + std::to_string(it.index) + ": context longer than deep list";
        }
        for (std::size_t j = 0; j < it.context_docs.size(); ++j) {
            if (!(it.context_docs[j].entry == it.deep_list.entries[j])) {
                return "iteration " + std::to_string(it.index) + ": context is not a prefix of deep list";
            }
        }
    }
    const bool answered = trace.termination == Termination::answered;
    if (answered != trace.final_answer.has_value()) {
        return "termination/final_answer mismatch";
    }
    if (answered && is_blank(*trace.final_answer)) {
        return "answered trace with blank answer";
    }
    return std::nullopt;
}

}  // namespace agentqpp
