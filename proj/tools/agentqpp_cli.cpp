// agentqpp command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agentqpp/agentqpp.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUser = 1;
constexpr int kExitInternal = 2;

int report(aqpp_status st) {
    if (st == AQPP_OK) return kExitOk;
    std::cerr << "error (" << aqpp_status_name(st) << "): " << aqpp_last_error() << '\n';
    return st == AQPP_ERR_INTERNAL ? kExitInternal : kExitUser;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Agentic retrieval-augmented QA experiments with query performance prediction"};
    app.set_version_flag("--version", aqpp_version());
    app.require_subcommand(1);

    std::string corpus, index_out;
    auto* index = app.add_subcommand("index", "Build a lexical (BM25) index from a corpus JSONL file");
    index->add_option("corpus", corpus, "Corpus JSONL with docno, title and text per line")->required();
    index->add_option("-o,--out", index_out, "Where to write the index")->required();

    std::string config;
    auto* run = app.add_subcommand("run", "Run every question of an experiment config and write traces/evals");
    run->add_option("config", config, "Experiment config (TOML)")->required();

    std::vector<std::string> run_dirs;
    std::string analyze_out;
    auto* analyze = app.add_subcommand("analyze", "Write CSV/SVG reports for one or more run directories");
    analyze->add_option("run_dirs", run_dirs, "Run directories holding traces.jsonl and evals.jsonl")->required();
    analyze->add_option("-o,--out", analyze_out, "Report directory")->required();

    std::string traces, question_id;
    auto* show = app.add_subcommand("trace-show", "Print the transcript of one question from a traces file");
    show->add_option("traces", traces, "traces.jsonl")->required();
    show->add_option("question_id", question_id, "Question id")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUser;
    }

    try {
        if (*index) {
            size_t n = 0;
            if (const auto st = aqpp_cmd_index(corpus.c_str(), index_out.c_str(), &n); st != AQPP_OK) return report(st);
            std::cout << "indexed " << n << " documents\n";
        } else if (*run) {
            aqpp_run_summary s{};
            if (const auto st = aqpp_cmd_run(config.c_str(), &s); st != AQPP_OK) return report(st);
            std::printf("episodes %zu  answered %zu  budget_exhausted %zu  malformed %zu  EM %.4f  F1 %.4f\n",
                        s.episodes, s.answered, s.budget_exhausted, s.malformed, s.em_mean, s.f1_mean);
        } else if (*analyze) {
            std::vector<const char*> dirs;
            for (const auto& d : run_dirs) dirs.push_back(d.c_str());
            char* written = nullptr;
            if (const auto st = aqpp_cmd_analyze(dirs.data(), dirs.size(), analyze_out.c_str(), &written); st != AQPP_OK) {
                return report(st);
            }
            std::cout << written;
            aqpp_string_free(written);
        } else if (*show) {
            char* text = nullptr;
            if (const auto st = aqpp_cmd_trace_show(traces.c_str(), question_id.c_str(), &text); st != AQPP_OK) {
                return report(st);
            }
            std::cout << text;
            aqpp_string_free(text);
        }
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitOk;
}
