#include <doctest.h>

#include <cstring>
#include <string>

#include "agentqpp/agentqpp.h"
#include "support.hpp"
#include "world.hpp"

using testing::TempDir;

TEST_CASE("version and status names") {
    CHECK(std::string(aqpp_version()) == "0.1.0");
    CHECK(std::string(aqpp_status_name(AQPP_OK)) == "ok");
    CHECK(std::string(aqpp_status_name(AQPP_ERR_NOT_FOUND)) == "not_found");
    CHECK(std::string(aqpp_status_name(static_cast<aqpp_status>(99))) == "unknown");
}

TEST_CASE("index build, search, save and load") {
    TempDir tmp;
    world::write(tmp.path(), {2});
    const auto corpus = (tmp / "corpus.jsonl").string();
    aqpp_index* idx = nullptr;
    REQUIRE(aqpp_index_build(corpus.c_str(), &idx) == AQPP_OK);
    size_t n = 0;
    CHECK(aqpp_index_doc_count(idx, &n) == AQPP_OK);
    CHECK(n == 10);

    aqpp_ranked_list* list = nullptr;
    REQUIRE(aqpp_index_search(idx, "answer1", 3, &list) == AQPP_OK);
    REQUIRE(aqpp_ranked_list_size(list) == 1);
    const char* docno = nullptr;
    double score = 0;
    CHECK(aqpp_ranked_list_entry(list, 0, &docno, &score) == AQPP_OK);
    CHECK(std::string(docno) == "g1");
    CHECK(score > 0);
    CHECK(aqpp_ranked_list_entry(list, 5, &docno, &score) == AQPP_ERR_ARGUMENT);
    double nqc = -1;
    CHECK(aqpp_ranked_list_nqc(list, 10, &nqc) == AQPP_OK);
    CHECK(nqc == 0.0);
    aqpp_ranked_list_free(list);

    const auto saved = (tmp / "idx.json").string();
    CHECK(aqpp_index_save(idx, saved.c_str()) == AQPP_OK);
    aqpp_index* loaded = nullptr;
    REQUIRE(aqpp_index_load(saved.c_str(), &loaded) == AQPP_OK);
    CHECK(aqpp_index_doc_count(loaded, &n) == AQPP_OK);
    CHECK(n == 10);
    aqpp_index_free(loaded);

    CHECK(aqpp_index_search(idx, "x", 0, &list) == AQPP_ERR_ARGUMENT);
    CHECK(std::strlen(aqpp_last_error()) > 0);
    aqpp_index_free(idx);
    aqpp_index_free(nullptr);
}

TEST_CASE("errors map to status codes") {
    aqpp_index* idx = nullptr;
    CHECK(aqpp_index_build("/nonexistent/corpus.jsonl", &idx) == AQPP_ERR_IO);
    CHECK(idx == nullptr);
    CHECK(std::string(aqpp_last_error()).find("/nonexistent/corpus.jsonl") != std::string::npos);
    CHECK(aqpp_index_build(nullptr, &idx) == AQPP_ERR_ARGUMENT);

    TempDir tmp;
    testing::write_text(tmp / "c.toml", "corpus = \"c\"\nqa = \"q\"\noutput_dir = \"o\"\nbogus = 1\n");
    aqpp_run_summary s{};
    CHECK(aqpp_cmd_run((tmp / "c.toml").string().c_str(), &s) == AQPP_ERR_CONFIG);
    CHECK(std::string(aqpp_last_error()).find("bogus") != std::string::npos);
}

TEST_CASE("metrics") {
    const char* golds[] = {"Prince Charles"};
    double f1 = 0;
    CHECK(aqpp_token_f1("Charles, Prince of Wales", golds, 1, &f1) == AQPP_OK);
    CHECK(f1 == doctest::Approx(2.0 / 3.0));
    int em = -1;
    CHECK(aqpp_exact_match("prince charles!", golds, 1, &em) == AQPP_OK);
    CHECK(em == 1);
    CHECK(aqpp_exact_match("x", nullptr, 1, &em) == AQPP_ERR_ARGUMENT);

    const double xs[] = {1, 2, 3}, ys[] = {3, 2, 1}, flat[] = {1, 1, 1};
    double rho = 0;
    int defined = -1;
    CHECK(aqpp_spearman(xs, ys, 3, &rho, &defined) == AQPP_OK);
    CHECK(defined == 1);
    CHECK(rho == -1.0);
    CHECK(aqpp_spearman(xs, flat, 3, &rho, &defined) == AQPP_OK);
    CHECK(defined == 0);
    CHECK(aqpp_spearman(xs, ys, 1, &rho, &defined) == AQPP_ERR_ARGUMENT);
}

TEST_CASE("experiment commands through the C interface") {
    TempDir tmp;
    const auto cfg = world::write(tmp.path(), {4}).string();
    aqpp_run_summary s{};
    REQUIRE(aqpp_cmd_run(cfg.c_str(), &s) == AQPP_OK);
    CHECK(s.episodes == 4);
    CHECK(s.answered == 4);
    CHECK(s.em_mean == 1.0);

    const auto run = (tmp / "out").string();
    const char* dirs[] = {run.c_str()};
    char* written = nullptr;
    REQUIRE(aqpp_cmd_analyze(dirs, 1, (tmp / "report").string().c_str(), &written) == AQPP_OK);
    CHECK(std::string(written).find("table1.csv") != std::string::npos);
    aqpp_string_free(written);

    char* text = nullptr;
    REQUIRE(aqpp_cmd_trace_show((tmp / "out" / "traces.jsonl").string().c_str(), "q002", &text) == AQPP_OK);
    CHECK(std::string(text).find("ANSWER: answer2") != std::string::npos);
    aqpp_string_free(text);
    CHECK(aqpp_cmd_trace_show((tmp / "out" / "traces.jsonl").string().c_str(), "q999", &text) ==
          AQPP_ERR_NOT_FOUND);
}
