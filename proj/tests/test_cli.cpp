#include <doctest.h>

#include <cstdio>
#include <string>

#include <sys/wait.h>

#include "support.hpp"
#include "world.hpp"

using testing::TempDir;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

// Runs the CLI with stderr discarded.
Result cli(const std::string& args) {
    const std::string cmd = std::string("\"") + AGENTQPP_CLI_PATH + "\" " + args + " 2>/dev/null";
    Result r;
    FILE* p = ::popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("--help exits 0 for the app and every subcommand") {
    CHECK(cli("--help").code == 0);
    for (const auto* sub : {"index", "run", "analyze", "trace-show"}) {
        const auto r = cli(std::string(sub) + " --help");
        CHECK_MESSAGE(r.code == 0, sub);
        CHECK(r.out.find("Usage") != std::string::npos);
    }
    CHECK(cli("--version").out.find("0.1.0") != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
    CHECK(cli("").code == 1);
    CHECK(cli("frobnicate").code == 1);
    CHECK(cli("index").code == 1);
    CHECK(cli("trace-show only-one-arg").code == 1);
    CHECK(cli("run /nonexistent/config.toml").code == 1);
    CHECK(cli("index /nonexistent/corpus.jsonl -o /tmp/never").code == 1);
}

TEST_CASE("index, run, analyze and trace-show end to end") {
    TempDir tmp;
    const auto cfg = world::write(tmp.path(), {3});
    const auto idx = cli("index " + q(tmp / "corpus.jsonl") + " -o " + q(tmp / "idx.json"));
    CHECK(idx.code == 0);
    CHECK(idx.out == "indexed 15 documents\n");

    const auto run = cli("run " + q(cfg));
    CHECK(run.code == 0);
    CHECK(run.out.find("episodes 3") != std::string::npos);

    const auto an = cli("analyze " + q(tmp / "out") + " -o " + q(tmp / "report"));
    CHECK(an.code == 0);
    CHECK(an.out.find("table1.csv") != std::string::npos);

    const auto show = cli("trace-show " + q(tmp / "out" / "traces.jsonl") + " q001");
    CHECK(show.code == 0);
    CHECK(show.out.find("ANSWER: answer1") != std::string::npos);
    CHECK(cli("trace-show " + q(tmp / "out" / "traces.jsonl") + " q404").code == 1);
    CHECK(cli("analyze " + q(tmp / "nothing") + " -o " + q(tmp / "r2")).code == 1);
}
