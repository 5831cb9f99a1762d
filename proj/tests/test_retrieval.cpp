#include <doctest.h>

#include <cmath>
#include <random>

#include "agentqpp/error.hpp"
#include "agentqpp/retrieval.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace agentqpp;
using testing::TempDir;

namespace {

std::vector<Document> toy() { return {{"d1", "", "cat cat"}, {"d2", "", "cat dog"}, {"d3", "", "dog"}}; }

LexicalIndex toy_index() { return LexicalIndex::build(testing::store_of(toy())); }

double score_of(const RankedList& l, const std::string& docno) {
    for (const auto& e : l.entries) {
        if (e.docno == docno) return e.score;
    }
    FAIL("docno not in list: " << docno);
    return 0;
}

}  // namespace

TEST_CASE("tokenize") {
    CHECK(tokenize("Hello, World! x2") == std::vector<std::string>{"hello", "world", "x2"});
    CHECK(tokenize("  ") .empty());
    CHECK(tokenize("Prince-of_Wales") == std::vector<std::string>{"prince", "of", "wales"});
    // UTF-8 stays inside the token
    CHECK(tokenize("caf\xc3\xa9 ok") == std::vector<std::string>{"caf\xc3\xa9", "ok"});
}

TEST_CASE("document store validation") {
    CHECK_THROWS_AS(DocumentStore({{"a", "", "x"}, {"a", "", "y"}}), ArgumentError);
    CHECK_THROWS_AS(DocumentStore({{"", "", "x"}}), ArgumentError);
    CHECK_THROWS_AS(DocumentStore({{"a", "t", ""}}), ArgumentError);
    DocumentStore s({{"a", "T", "x"}});
    CHECK(s.at("a").title == "T");
    CHECK_THROWS_AS(s.at("b"), NotFoundError);
    CHECK(s.find("b") == nullptr);
}

TEST_CASE("index statistics on the toy corpus") {
    const auto idx = toy_index();
    CHECK(idx.doc_count() == 3);
    CHECK(idx.avg_doc_length() == doctest::Approx(5.0 / 3.0));
    CHECK(idx.doc_length("d1") == 2);
    CHECK(idx.doc_length("d3") == 1);
    CHECK(idx.document_frequency("cat") == 2);
    CHECK(idx.document_frequency("bird") == 0);
    CHECK(idx.postings("cat") == std::vector<std::pair<std::string, std::uint32_t>>{{"d1", 2}, {"d2", 1}});
    CHECK(idx.idf("cat") == doctest::Approx(0.47000362924573563).epsilon(1e-12));
}

TEST_CASE("BM25 matches hand-evaluated values") {
    // idf(cat) = ln(1 + 1.5/2.5); avgdl = 5/3; k1 = 1.2, b = 0.75
    const auto idx = toy_index();
    const auto cat = idx.search("cat", 10);
    REQUIRE(cat.size() == 2);
    CHECK(cat.entries[0].docno == "d1");
    CHECK(std::abs(cat.entries[0].score - 0.6118390439885317) < 1e-6);
    CHECK(std::abs(cat.entries[1].score - 0.4344571362775708) < 1e-6);

    const auto dog = idx.search("dog", 10);
    CHECK(dog.entries[0].docno == "d3");
    CHECK(std::abs(dog.entries[0].score - 0.561960861054684) < 1e-6);

    const auto both = idx.search("cat dog", 10);
    REQUIRE(both.size() == 3);
    CHECK(both.entries[0].docno == "d2");
    CHECK(std::abs(both.entries[0].score - 0.8689142725551416) < 1e-6);
    CHECK(both.entries[1].docno == "d1");
    CHECK(both.entries[2].docno == "d3");
}

TEST_CASE("BM25 agrees with the brute-force oracle on random corpora") {
    std::mt19937_64 rng(11);
    const std::vector<std::string> vocab{"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"};
    std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1), len(1, 12), ndocs(1, 30), qlen(1, 4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Document> docs;
        std::vector<std::string> texts;
        const auto n = ndocs(rng);
        for (std::size_t i = 0; i < n; ++i) {
            std::string t;
            for (std::size_t j = len(rng); j > 0; --j) t += vocab[word(rng)] + " ";
            docs.push_back({"doc" + std::to_string(i), "", t});
            texts.push_back(" " + t);
        }
        std::string q;
        for (std::size_t j = qlen(rng); j > 0; --j) q += vocab[word(rng)] + " ";
        const auto idx = LexicalIndex::build(testing::store_of(docs));
        const auto got = idx.search(q, 1000);
        const auto want = oracle::bm25(texts, q);
        std::size_t matching = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (want[i] != 0.0) {
                ++matching;
                CHECK(std::abs(score_of(got, "doc" + std::to_string(i)) - want[i]) < 1e-9);
            }
        }
        CHECK(got.size() == matching);
        CHECK_FALSE(validate_ranked_list(got));
    }
}

TEST_CASE("title and text are indexed together") {
    const auto idx = LexicalIndex::build(testing::store_of({{"a", "Heir apparent", "first in line"}}));
    CHECK(idx.doc_length("a") == 5);
    CHECK(idx.search("heir", 5).size() == 1);
}

TEST_CASE("search rejects k < 1 and truncates to k") {
    const auto idx = toy_index();
    CHECK_THROWS_AS(idx.search("cat", 0), ArgumentError);
    CHECK(idx.search("cat dog", 1).size() == 1);
    CHECK(idx.search("unknownword", 3).empty());
    CHECK(search_lexical(idx, "cat", 5) == idx.search("cat", 5));
}

TEST_CASE("index save/load round-trip and re-index determinism") {
    TempDir tmp;
    const auto idx = toy_index();
    idx.save((tmp / "idx.json").string());
    const auto loaded = LexicalIndex::load((tmp / "idx.json").string());
    for (const auto* q : {"cat", "dog", "cat dog", "cat cat dog"}) {
        CHECK(loaded.search(q, 10) == idx.search(q, 10));
        CHECK(toy_index().search(q, 10) == idx.search(q, 10));
    }
    CHECK(loaded.documents().at("d2").text == "cat dog");
    testing::write_text(tmp / "bad.json", "{\"format\":\"other\"}");
    CHECK_THROWS(LexicalIndex::load((tmp / "bad.json").string()));
    CHECK_THROWS_AS(LexicalIndex::load((tmp / "missing.json").string()), IoError);
}

TEST_CASE("corpus JSONL errors carry the line number") {
    TempDir tmp;
    testing::write_text(tmp / "c.jsonl", "{\"docno\":\"a\",\"title\":\"\",\"text\":\"x\"}\n{not json}\n");
    try {
        read_corpus_jsonl((tmp / "c.jsonl").string());
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    testing::write_text(tmp / "ok.jsonl", "{\"docno\":\"a\",\"title\":\"T\",\"text\":\"x\"}\n\n");
    CHECK(read_corpus_jsonl((tmp / "ok.jsonl").string()).size() == 1);
}

TEST_CASE("corpus_score treats the collection as one document") {
    const auto idx = toy_index();
    // tf(cat) = 3 over the collection, length normalised to the average.
    const double idf = std::log(1 + 1.5 / 2.5);
    CHECK(idx.corpus_score("cat") == doctest::Approx(idf * 3 * 2.2 / (3 + 1.2)));
}

TEST_CASE("cosine and dense search") {
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == doctest::Approx(0));
    CHECK(cosine_similarity(std::vector<double>{2, 0}, std::vector<double>{1, 0}) == doctest::Approx(1));
    CHECK(std::isinf(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 0})));

    EmbeddingStore store(2);
    store.add("a", {1, 0});
    store.add("b", {0.7, 0.7});
    store.add("c", {0, 1});
    store.add("z", {0, 0});
    std::vector<std::string> warnings;
    const auto l = search_dense(store, std::vector<double>{1, 0.1}, 10, &warnings);
    REQUIRE(l.size() == 4);
    CHECK(l.entries[0].docno == "a");
    CHECK(l.entries[1].docno == "b");
    CHECK(l.entries[3].docno == "z");
    CHECK(std::isinf(l.entries[3].score));
    CHECK(warnings.size() == 1);
    CHECK(search_dense(store, std::vector<double>{1, 0.1}, 2).size() == 2);
    CHECK_THROWS_AS(search_dense(store, std::vector<double>{1, 0, 0}, 2), ArgumentError);
}

TEST_CASE("embeddings TSV round-trip") {
    TempDir tmp;
    EmbeddingStore s(3);
    s.add("a", {0.1, -2.5, 1e-300});
    s.add("b b", {1.0 / 3.0, 0, 7});
    write_embeddings_tsv(s, (tmp / "e.tsv").string());
    const auto back = read_embeddings_tsv((tmp / "e.tsv").string());
    CHECK(back.vectors() == s.vectors());
    testing::write_text(tmp / "bad.tsv", "dim=2\na\t1,2,3\n");
    CHECK_THROWS_AS(read_embeddings_tsv((tmp / "bad.tsv").string()), ParseError);
}

TEST_CASE("lookup embedder") {
    LookupEmbedder e(2, {{"hello", {1, 2}}});
    CHECK(embed_query(e, "hello") == std::vector<double>{1, 2});
    CHECK_THROWS_AS(embed_query(e, "other"), ConfigError);
}

TEST_CASE("table scorer prefers query-specific entries") {
    TableScorer t({{"a", 1.0}, {"b", 2.0}}, {{"q\ta", 5.0}});
    std::vector<Document> docs{{"a", "", "x"}, {"b", "", "y"}};
    CHECK(t.score("q", docs) == std::vector<double>{5.0, 2.0});
    CHECK(t.score("other", docs) == std::vector<double>{1.0, 2.0});
    std::vector<Document> unknown{{"c", "", "z"}};
    CHECK_THROWS_AS(t.score("q", unknown), RerankError);
}

TEST_CASE("rerank rescoring, truncation and failures") {
    const auto store = testing::store_of(toy());
    const auto list = make_ranked_list("cat dog", {{"d1", 3}, {"d2", 2}, {"d3", 1}});
    TableScorer t({{"d1", 0.1}, {"d2", 0.9}, {"d3", 0.5}});
    const auto r = rerank(t, list, 2, *store);
    REQUIRE(r.size() == 2);
    CHECK(r.entries[0].docno == "d2");
    CHECK(r.entries[1].docno == "d1");

    FunctionScorer nan_scorer([](const std::string&, const Document&) { return std::nan(""); });
    CHECK_THROWS_AS(rerank(nan_scorer, list, 3, *store), RerankError);
    FunctionScorer throwing([](const std::string&, const Document&) -> double { throw std::runtime_error("boom"); });
    CHECK_THROWS_AS(rerank(throwing, list, 3, *store), RerankError);
    CHECK_THROWS_AS(rerank(t, list, 0, *store), ArgumentError);
}

TEST_CASE("pipeline lexical %20 >> rerank(table) reproduces the table order") {
    auto res = testing::lexical_resources(toy());
    auto table = std::make_shared<const TableScorer>(std::map<std::string, double>{{"d1", 0.2}, {"d2", 0.1}, {"d3", 0.9}});
    for (const auto* expr : {"lexical %20 >> rerank(table)", "lexical %20 \xe2\x89\xab rerank(table)",
                             "lexical%20>>rerank"}) {
        const auto p = parse_pipeline(expr, 3, res, table);
        const auto out = run_pipeline(p, "cat dog");
        REQUIRE(out.size() == 3);
        CHECK(out.entries[0].docno == "d3");
        CHECK(out.entries[1].docno == "d1");
        CHECK(out.entries[2].docno == "d2");
        CHECK(p.retriever_class() == RetrieverClass::reranked);
    }
}

TEST_CASE("pipeline presets and parse errors") {
    CHECK(preset_expression("lexical", 100) == "lexical %100");
    CHECK(preset_expression("dense", 50) == "dense %50");
    CHECK(preset_expression("lexical%20>>rerank") == "lexical %20 >> rerank(20)");
    CHECK_FALSE(preset_expression("lexical %5"));

    auto res = testing::lexical_resources(toy());
    CHECK(parse_pipeline("lexical", 3, res).retriever_class() == RetrieverClass::lexical);
    CHECK(parse_pipeline("lexical %2", 2, res).max_output_depth() == 2u);
    CHECK_THROWS_AS(parse_pipeline("lexical %2", 3, res), ConfigError);
    CHECK_THROWS_AS(parse_pipeline("lexical >> rerank", 3, res), ConfigError);  // no reranker
    CHECK_THROWS_AS(parse_pipeline("dense %10", 3, res), ConfigError);         // no embeddings
    CHECK_THROWS_AS(parse_pipeline("%5 >> lexical", 3, res), ConfigError);
    CHECK_THROWS_AS(parse_pipeline("lexical >> frobnicate", 3, res), ConfigError);
    CHECK_THROWS_AS(parse_pipeline("lexical %x", 3, res), ConfigError);
    CHECK_THROWS_AS(parse_pipeline("lexical >>", 3, res), ConfigError);
}

TEST_CASE("pipeline stage failures keep their kind and name the stage") {
    auto res = testing::lexical_resources(toy());
    auto bad = std::make_shared<const FunctionScorer>([](const std::string&, const Document&) { return std::nan(""); });
    const auto p = parse_pipeline("lexical %20 >> rerank(5)", 3, res, bad);
    try {
        p.execute("cat");
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::rerank);
        CHECK(std::string(e.what()).find("pipeline stage 3") != std::string::npos);
    }
}

TEST_CASE("dense pipeline carries the query vector") {
    auto res = testing::lexical_resources(toy());
    auto store = std::make_shared<EmbeddingStore>(2);
    store->add("d1", {1, 0});
    store->add("d2", {1, 1});
    store->add("d3", {0, 1});
    res.embeddings = store;
    res.embedder = std::make_shared<const LookupEmbedder>(2, std::map<std::string, std::vector<double>>{{"q", {0, 1}}});
    const auto p = parse_pipeline("dense", 2, res, nullptr, 10);
    CHECK(p.retriever_class() == RetrieverClass::dense);
    const auto out = p.execute("q");
    REQUIRE(out.query_vec);
    CHECK(*out.query_vec == std::vector<double>{0, 1});
    CHECK(out.list.entries.front().docno == "d3");
    CHECK(out.list.size() == 3);
}
