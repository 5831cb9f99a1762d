#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "agentqpp/error.hpp"
#include "agentqpp/experiment.hpp"

namespace agentqpp {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string{}; }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::vector<std::string>& header) { row(header); }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text_ += ',';
            text_ += csv_field(cells[i]);
        }
        text_ += '\n';
    }
    const std::string& text() const { return text_; }

private:
    std::string text_;
};

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed: " + path.string());
}

std::string run_name(const fs::path& dir) {
    auto p = dir.lexically_normal();
    if (p.filename().empty()) p = p.parent_path();
    auto name = p.filename().string();
    return name.empty() || name == "." ? fs::absolute(dir).lexically_normal().filename().string() : name;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Analysed {
    std::string name;
    RunAnalysis analysis;
};

// One line per (run, predictor) series over iterations.
std::string qpp_svg(const std::vector<Analysed>& runs) {
    constexpr double W = 640, H = 400, L = 60, R = 200, T = 20, B = 40;
    int max_iter = 1;
    double lo = 0, hi = 0;
    bool any = false;
    for (const auto& r : runs) {
        for (const auto& [_, series] : r.analysis.qpp_by_iteration) {
            for (const auto& m : series) {
                max_iter = std::max(max_iter, m.iteration);
                lo = any ? std::min(lo, m.mean_z) : m.mean_z;
                hi = any ? std::max(hi, m.mean_z) : m.mean_z;
                any = true;
            }
        }
    }
    if (hi - lo < 1e-12) {
        lo -= 1;
        hi += 1;
    }
    auto x = [&](int it) { return L + (W - L - R) * (max_iter == 1 ? 0.5 : (it - 1.0) / (max_iter - 1.0)); };
    auto y = [&](double v) { return T + (H - T - B) * (hi - v) / (hi - lo); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W) << "\" height=\"" << num(H) << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<line x1=\"" << num(L) << "\" y1=\"" << num(H - B) << "\" x2=\"" << num(W - R) << "\" y2=\"" << num(H - B)
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << num(L) << "\" y1=\"" << num(T) << "\" x2=\"" << num(L) << "\" y2=\"" << num(H - B)
      << "\" stroke=\"black\"/>\n";
    for (int it = 1; it <= max_iter; ++it) {
        s << "<text x=\"" << num(x(it)) << "\" y=\"" << num(H - B + 16) << "\" font-size=\"11\" text-anchor=\"middle\">"
          << it << "</text>\n";
    }
    s << "<text x=\"" << num(L - 6) << "\" y=\"" << num(y(hi) + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
      << num(hi) << "</text>\n";
    s << "<text x=\"" << num(L - 6) << "\" y=\"" << num(y(lo) + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
      << num(lo) << "</text>\n";
    s << "<text x=\"" << num((L + W - R) / 2) << "\" y=\"" << num(H - 6)
      << "\" font-size=\"12\" text-anchor=\"middle\">iteration</text>\n";
    std::size_t k = 0;
    for (const auto& r : runs) {
        for (const auto& [pred, series] : r.analysis.qpp_by_iteration) {
            const char* color = kPalette[k % std::size(kPalette)];
            s << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
            for (std::size_t i = 0; i < series.size(); ++i) {
                if (i) s << ' ';
                s << num(x(series[i].iteration)) << ',' << num(y(series[i].mean_z));
            }
            s << "\"/>\n";
            for (const auto& m : series) {
                s << "<circle cx=\"" << num(x(m.iteration)) << "\" cy=\"" << num(y(m.mean_z)) << "\" r=\"3\" fill=\""
                  << color << "\"/>\n";
            }
            s << "<text x=\"" << num(W - R + 10) << "\" y=\"" << num(T + 14 * (k + 1)) << "\" font-size=\"11\" fill=\""
              << color << "\">" << xml_escape(r.name + " " + pred) << "</text>\n";
            ++k;
        }
    }
    s << "</svg>\n";
    return s.str();
}

// Stacked bars (correct at the bottom) per iteration count, one panel per run.
std::string histogram_svg(const std::vector<Analysed>& runs) {
    constexpr double W = 640, PH = 220, L = 50, R = 20, T = 24, B = 30;
    const double H = PH * static_cast<double>(std::max<std::size_t>(runs.size(), 1));
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W) << "\" height=\"" << num(H) << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t p = 0; p < runs.size(); ++p) {
        const auto& hist = runs[p].analysis.iter_histogram;
        const double top = PH * static_cast<double>(p) + T;
        const double bottom = PH * static_cast<double>(p + 1) - B;
        int max_count = 1;
        for (const auto& [_, b] : hist) max_count = std::max(max_count, b.correct + b.incorrect);
        const double slot = (W - L - R) / static_cast<double>(std::max<std::size_t>(hist.size(), 1));
        s << "<text x=\"" << num(L) << "\" y=\"" << num(top - 8) << "\" font-size=\"12\">" << xml_escape(runs[p].name)
          << "</text>\n";
        s << "<line x1=\"" << num(L) << "\" y1=\"" << num(bottom) << "\" x2=\"" << num(W - R) << "\" y2=\""
          << num(bottom) << "\" stroke=\"black\"/>\n";
        std::size_t i = 0;
        for (const auto& [iter, b] : hist) {
            const double bx = L + slot * static_cast<double>(i) + slot * 0.15;
            const double bw = slot * 0.7;
            const double scale = (bottom - top) / max_count;
            const double hc = scale * b.correct;
            const double hi = scale * b.incorrect;
            s << "<rect x=\"" << num(bx) << "\" y=\"" << num(bottom - hc) << "\" width=\"" << num(bw) << "\" height=\""
              << num(hc) << "\" fill=\"#1f4e79\"/>\n";
            s << "<rect x=\"" << num(bx) << "\" y=\"" << num(bottom - hc - hi) << "\" width=\"" << num(bw)
              << "\" height=\"" << num(hi) << "\" fill=\"#9dc3e6\"/>\n";
            s << "<text x=\"" << num(bx + bw / 2) << "\" y=\"" << num(bottom + 14)
              << "\" font-size=\"11\" text-anchor=\"middle\">" << iter << "</text>\n";
            ++i;
        }
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace

LoadedRun load_run_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw NotFoundError("run directory not found: " + dir.string());
    const auto traces_path = dir / "traces.jsonl";
    const auto evals_path = dir / "evals.jsonl";
    if (!fs::exists(traces_path) || !fs::exists(evals_path)) {
        throw NotFoundError("run directory " + dir.string() + " has no traces.jsonl/evals.jsonl");
    }
    LoadedRun run;
    run.name = run_name(dir);
    run.traces = read_traces_jsonl(traces_path);
    run.evals = read_evals_jsonl(evals_path);
    if (run.traces.empty()) throw ArgumentError("run directory " + dir.string() + " contains no traces");
    return run;
}

std::vector<fs::path> cmd_analyze(const std::vector<fs::path>& run_dirs, const fs::path& out_dir) {
    if (run_dirs.empty()) throw ArgumentError("analyze needs at least one run directory");
    std::vector<Analysed> runs;
    std::set<std::string> names;
    for (const auto& dir : run_dirs) {
        auto loaded = load_run_dir(dir);
        if (!names.insert(loaded.name).second) throw ArgumentError("duplicate run name " + loaded.name);
        runs.push_back({loaded.name, analyze_run(loaded.traces, loaded.evals)});
    }
    std::sort(runs.begin(), runs.end(), [](const Analysed& a, const Analysed& b) { return a.name < b.name; });

    CsvWriter t1({"run", "questions", "em", "f1", "iter"});
    CsvWriter t2({"run", "rho_iter_f1"});
    std::vector<std::string> t3_header{"run"};
    for (const char* p : predictor::all) t3_header.emplace_back(p);
    CsvWriter t3(t3_header);
    CsvWriter qpp({"run", "predictor", "iteration", "mean_z", "count"});
    CsvWriter hist({"run", "iteration", "correct", "incorrect"});
    CsvWriter rep({"run", "questions", "repeated", "question_ids"});

    for (const auto& r : runs) {
        const auto& a = r.analysis;
        t1.row({r.name, std::to_string(a.questions), num(a.em_mean), num(a.f1_mean), num(a.iter_mean)});
        t2.row({r.name, opt_num(a.rho_iter_f1)});
        // Inapplicable predictors and undefined correlations both leave the cell empty.
        std::vector<std::string> cells{r.name};
        for (const char* p : predictor::all) {
            auto it = a.rho_qpp_f1.find(p);
            cells.push_back(it == a.rho_qpp_f1.end() ? std::string{} : opt_num(it->second));
        }
        t3.row(cells);
        for (const auto& [pred, series] : a.qpp_by_iteration) {
            for (const auto& m : series) {
                qpp.row({r.name, pred, std::to_string(m.iteration), num(m.mean_z), std::to_string(m.count)});
            }
        }
        for (const auto& [iter, b] : a.iter_histogram) {
            hist.row({r.name, std::to_string(iter), std::to_string(b.correct), std::to_string(b.incorrect)});
        }
        std::string ids;
        for (const auto& id : a.repetition.question_ids) ids += (ids.empty() ? "" : ";") + id;
        rep.row({r.name, std::to_string(a.questions), std::to_string(a.repetition.count), ids});
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    const std::vector<std::pair<const char*, std::string>> files{
        {report::table1, t1.text()},
        {report::table2, t2.text()},
        {report::table3, t3.text()},
        {report::qpp_by_iteration, qpp.text()},
        {report::qpp_by_iteration_svg, qpp_svg(runs)},
        {report::iter_histogram, hist.text()},
        {report::iter_histogram_svg, histogram_svg(runs)},
        {report::repetition, rep.text()},
    };
    std::vector<fs::path> written;
    for (const auto& [name, content] : files) {
        write_file(out_dir / name, content);
        written.push_back(out_dir / name);
    }
    return written;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && field.empty()) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            field_started = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(std::move(field));
            rows.push_back(std::move(row));
            row.clear();
            field.clear();
            field_started = false;
        } else {
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw ParseError("csv: unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_trace(const ReasoningTrace& trace) {
    std::ostringstream s;
    s << "question_id: " << trace.question_id << '\n';
    s << "question: " << trace.input_question << '\n';
    s << "termination: " << to_string(trace.termination) << "  iterations: " << trace.iter_count << "\n\n";
    s << "=== prompt ===\n";
    try {
        s << render_prompt(trace.input_question) << '\n';
    } catch (const Error&) {
        s << trace.input_question << '\n';
    }
    for (const auto& it : trace.iterations) {
        s << "\n=== iteration " << it.index << " ===\n";
        s << it.generated_text << '\n';
        s << format_information(it.context_docs) << '\n';
        if (!it.qpp_estimates.empty() || !it.qpp_errors.empty()) {
            s << "qpp:";
            for (const auto& [name, v] : it.qpp_estimates) s << ' ' << name << '=' << num(v);
            for (const auto& [name, err] : it.qpp_errors) s << ' ' << name << "=error(" << err << ')';
            s << '\n';
        }
    }
    s << "\n=== final ===\n";
    if (!trace.final_text.empty()) s << trace.final_text << '\n';
    if (!trace.note.empty()) s << "note: " << trace.note << '\n';
    switch (trace.termination) {
        case Termination::answered: s << "ANSWER: " << trace.final_answer.value_or("") << '\n'; break;
        case Termination::budget_exhausted: s << "BUDGET EXHAUSTED\n"; break;
        case Termination::malformed_output: s << "MALFORMED OUTPUT\n"; break;
    }
    return s.str();
}

std::string cmd_trace_show(const fs::path& traces_path, const std::string& question_id) {
    for (const auto& t : read_traces_jsonl(traces_path)) {
        if (t.question_id == question_id) return format_trace(t);
    }
    throw NotFoundError("no trace for question " + question_id + " in " + traces_path.string());
}

}  // namespace agentqpp
