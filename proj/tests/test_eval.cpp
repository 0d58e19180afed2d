#include "clausekit/eval.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <random>

using namespace clausekit;
using namespace clausekit::eval;

TEST_CASE("char metrics agree with the bitmap oracle") {
    std::mt19937 rng(17);
    auto span = [&](std::size_t n) {
        const std::size_t a = rng() % n;
        const std::size_t b = a + 1 + rng() % std::min<std::size_t>(40, n - a);
        return Span{a, std::min(b, n)};
    };
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 50 + rng() % 300;
        std::vector<Span> retrieved;
        for (std::size_t i = 0, m = rng() % 8; i < m; ++i) retrieved.push_back(span(n));
        std::vector<Span> truth;
        for (std::size_t i = 0, m = 1 + rng() % 3; i < m; ++i) truth.push_back(span(n));
        truth = normalize_spans(truth);
        for (std::size_t k : {1, 2, 4, 16}) {
            const auto got = char_pr_at_k(retrieved, truth, k);
            const auto want = oracles::char_bitmap(retrieved, truth, k, n);
            CHECK(got.precision == doctest::Approx(want.precision).epsilon(1e-12));
            CHECK(got.recall == doctest::Approx(want.recall).epsilon(1e-12));
        }
    }
}

TEST_CASE("span metrics count hits") {
    const std::vector<Span> truth{{10, 20}, {100, 120}};
    const std::vector<Span> retrieved{{0, 5}, {15, 18}, {12, 14}, {200, 210}};
    auto pr = span_pr_at_k(retrieved, truth, 2);
    CHECK(pr.precision == doctest::Approx(0.5));
    CHECK(pr.recall == doctest::Approx(0.5));
    pr = span_pr_at_k(retrieved, truth, 8);
    CHECK(pr.precision == doctest::Approx(2.0 / 4.0));
    CHECK(pr.recall == doctest::Approx(0.5));
}

TEST_CASE("span and char metrics diverge on sub-spans") {
    const std::vector<Span> truth{{0, 100}};
    const std::vector<Span> sub{{40, 50}};
    const auto c = char_pr_at_k(sub, truth, 1);
    const auto s = span_pr_at_k(sub, truth, 1);
    CHECK(c.precision == 1.0);
    CHECK(c.recall == doctest::Approx(0.1));
    CHECK(s.recall == 1.0);
}

TEST_CASE("metric preconditions") {
    const std::vector<Span> none;
    const std::vector<Span> some{{0, 5}};
    try {
        char_pr_at_k(some, none, 1);
        FAIL("expected empty ground truth");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::empty_ground_truth);
    }
    CHECK_THROWS_AS(span_pr_at_k(some, none, 1), Error);
    CHECK_THROWS_AS(char_pr_at_k(some, some, 0), Error);
    const auto empty = char_pr_at_k(none, some, 3);
    CHECK(empty.precision == 0.0);
    CHECK(empty.recall == 0.0);
}

TEST_CASE("perfect oracle scores one") {
    BenchmarkCase c{"c", "q", "d", {{5, 9}, {20, 30}}};
    const auto r = perfect_oracle(c);
    for (std::size_t k : {1, 2, 8}) {
        CHECK(char_pr_at_k(r, c.ground_truth, k).precision == 1.0);
        CHECK(span_pr_at_k(r, c.ground_truth, k).precision == 1.0);
    }
    CHECK(char_pr_at_k(r, c.ground_truth, 2).recall == 1.0);
}

TEST_CASE("normalize and volume") {
    bool merged = false;
    const auto n = normalize_spans({{10, 20}, {0, 5}, {5, 8}, {15, 25}}, &merged);
    CHECK(merged);
    CHECK(n == std::vector<Span>{{0, 8}, {10, 25}});
    const std::vector<Span> r{{0, 10}, {5, 15}, {100, 101}};
    CHECK(chars_at_k(r, 2) == 20);
    CHECK(chars_at_k(r, 10) == 21);
    const std::vector<std::size_t> grid{1, 3};
    CHECK(char_volume_stats({r, {{0, 2}}}, grid) == std::vector<double>{6.0, 11.5});
}

TEST_CASE("k grid parsing") {
    CHECK(parse_k_grid("4,1,2,2") == std::vector<std::size_t>{1, 2, 4});
    CHECK_THROWS_AS(parse_k_grid("0"), Error);
    CHECK_THROWS_AS(parse_k_grid("a,b"), Error);
    CHECK_THROWS_AS(parse_k_grid(""), Error);
}

TEST_CASE("case loading validates and merges") {
    const auto dir = fixtures::temp_dir("cases");
    {
        std::ofstream f(dir / "cases.jsonl");
        f << R"({"case_id":"a","query":"q","document_id":"d.txt","spans":[[0,5],{"start":3,"end":9}]})" << "\n\n";
        f << R"({"case_id":"b","query":"q2","document_id":"d.txt","spans":[[10,12]]})" << "\n";
    }
    const auto loaded = load_cases(dir / "cases.jsonl");
    REQUIRE(loaded.cases.size() == 2);
    CHECK(loaded.cases[0].ground_truth == std::vector<Span>{{0, 9}});
    CHECK(loaded.warnings.size() == 1);

    auto bad = [&](const std::string& line) {
        std::ofstream(dir / "bad.jsonl") << line << "\n";
        CHECK_THROWS_AS(load_cases(dir / "bad.jsonl"), Error);
    };
    bad(R"({"case_id":"a","query":"q","document_id":"d","spans":[[5,5]]})");
    bad(R"({"case_id":"a","query":"  ","document_id":"d","spans":[[0,5]]})");
    bad(R"({"case_id":"a","query":"q","document_id":"d","spans":[[0,5]]})" "\n" R"({"case_id":"a","query":"q","document_id":"d","spans":[[0,5]]})");
    bad("not json");

    CHECK_THROWS_AS(document_path(dir, "../etc/passwd"), Error);
    CHECK_THROWS_AS(document_path(dir, "/etc/passwd"), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("corpus loading errors") {
    try {
        load_corpus("/nonexistent/corpus");
        FAIL("expected not found");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::not_found);
    }
    const auto dir = fixtures::temp_dir("emptycorpus");
    std::ofstream(dir / "cases.jsonl") << "\n";
    CHECK_THROWS_AS(load_corpus(dir), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("benchmark over the planted corpus") {
    const auto dir = fixtures::temp_dir("planted");
    auto corpus = fixtures::planted_corpus();
    fixtures::write_corpus(corpus, dir);
    // One case pointing at a missing document becomes a failure.
    std::ofstream(dir / "cases.jsonl", std::ios::app)
        << R"({"case_id":"ghost","query":"q","document_id":"missing.txt","spans":[[0,5]]})" << "\n";

    llm::HashEmbedder emb(256);
    llm::LexicalReranker rr;
    PipelineConfig cfg;
    cfg.embedder = &emb;
    cfg.reranker = &rr;
    cfg.retrieval.optimize_query = false;
    const std::vector<std::size_t> grid{1, 2, 4};
    const auto par = run_benchmark(dir, cfg, grid);
    CHECK(par.cases_total == 11);
    CHECK(par.cases_scored == 10);
    REQUIRE(par.failures.size() == 1);
    CHECK(par.failures[0].case_id == "ghost");
    REQUIRE(par.rows.size() == 3);
    CHECK(par.rows[0].recall_span >= 0.9);

    cfg.parallel = false;
    const auto ser = run_benchmark(dir, cfg, grid);
    CHECK(metrics_csv(ser) == metrics_csv(par));

    const auto csv = metrics_csv(par);
    CHECK(csv.rfind("k,precision_char,recall_char,precision_span,recall_span,avg_chars_retrieved\n1,", 0) == 0);
    const auto j = nlohmann::json::parse(metrics_json(par));
    CHECK(j["cases_scored"] == 10);
    CHECK(j["failures"][0]["code"] == "not_found");

    const auto out = dir / "out";
    write_metrics(par, out);
    CHECK(std::filesystem::exists(out / "metrics.csv"));
    CHECK(std::filesystem::exists(out / "metrics.json"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("custom retriever and score_cases") {
    const std::vector<BenchmarkCase> cases{{"a", "q", "d", {{0, 10}}}, {"b", "q", "d", {{50, 60}}}};
    const std::vector<std::vector<Span>> got{{{0, 10}}, {{0, 10}}};
    const std::vector<std::size_t> grid{1};
    const auto rep = score_cases(cases, got, grid);
    CHECK(rep.rows[0].precision_char == doctest::Approx(0.5));
    CHECK(rep.rows[0].recall_span == doctest::Approx(0.5));
    CHECK(rep.rows[0].avg_chars_retrieved == doctest::Approx(10.0));
}
