#include "clausekit/retrieval.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <set>

using namespace clausekit;
using namespace clausekit::retrieval;

namespace {

/// Scores passages by a fixed table keyed on passage text; unknown text
/// scores -10.
class TableReranker : public llm::Reranker {
public:
    explicit TableReranker(std::map<std::string, double> t) : table_(std::move(t)) {}
    std::string model_id() const override { return "table"; }
    std::vector<double> score(std::string_view, std::span<const std::string> passages) override {
        std::vector<double> out;
        for (const auto& p : passages) {
            auto it = table_.find(p);
            out.push_back(it == table_.end() ? -10.0 : it->second);
        }
        return out;
    }

private:
    std::map<std::string, double> table_;
};

class FailingReranker : public llm::Reranker {
public:
    std::string model_id() const override { return "down"; }
    std::vector<double> score(std::string_view, std::span<const std::string>) override {
        throw Error(ErrorCode::upstream, "rerank", "service unavailable");
    }
};

const std::string kDoc =
    "SERVICES AGREEMENT\n\n"
    "1. TERMINATION\n"
    "1.1 Either party may terminate this Agreement on thirty days written notice.\n"
    "1.2 The Customer may terminate immediately for material breach.\n"
    "2. PAYMENT\n"
    "2.1 Invoices are payable within thirty days.\n"
    "2.2 Late payments accrue interest at two percent.\n";

index::ChunkIndex doc_index(llm::Embedder& emb) {
    return index::build_document_index(doctree::parse_document(kDoc, "msa.txt"), &emb);
}

}  // namespace

TEST_CASE("rrf matches the brute force fusion") {
    const std::vector<std::vector<std::string>> rankings{{"a", "b", "c"}, {"c", "d", "a"}};
    const std::vector<double> w{1.0, 0.5};
    const auto got = rrf_fuse(rankings, w, 60.0);
    const auto want = oracles::rrf(rankings, w, 60.0);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].id == want[i].id);
        CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-15));
    }
    CHECK(got[0].id == "a");
    CHECK(got[0].score == doctest::Approx(1.0 / 61 + 0.5 / 63));
}

TEST_CASE("rrf breaks ties by id and validates input") {
    const auto tied = rrf_fuse({{"b"}, {"a"}}, std::vector<double>{1.0, 1.0}, 60.0);
    REQUIRE(tied.size() == 2);
    CHECK(tied[0].id == "a");
    CHECK_THROWS_AS(rrf_fuse({{"a"}}, std::vector<double>{1.0, 1.0}, 60.0), Error);
    CHECK_THROWS_AS(rrf_fuse({{"a", "a"}}, std::vector<double>{1.0}, 60.0), Error);
    CHECK(rrf_fuse({{}, {}}, std::vector<double>{1.0, 1.0}, 60.0).empty());
}

TEST_CASE("sigmoid threshold and keep limit") {
    TableReranker rr({{"p1", 2.0}, {"p2", -0.5}, {"p3", 0.0}, {"p4", 3.0}});
    const std::vector<RerankCandidate> cands{{"a", "p1", 1}, {"b", "p2", 2}, {"c", "p3", 3}, {"d", "p4", 4}};
    RetrievalConfig cfg;
    const auto kept = rerank_and_threshold("q", cands, rr, cfg);
    REQUIRE(kept.size() == 3);  // sigmoid(0) = 0.5 passes
    CHECK(kept[0].id == "d");
    CHECK(kept[1].id == "a");
    CHECK(kept[2].id == "c");
    CHECK(kept[0].norm == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))));
    cfg.rerank_keep = 1;
    CHECK(rerank_and_threshold("q", cands, rr, cfg).size() == 1);
    CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("strip context returns the source under the core span") {
    chunker::Chunk c;
    c.text = "parent\nchild text";
    c.core_span = {7, 17};
    CHECK(strip_context(c, std::string_view("parent\nchild text")) == "child text");
    c.core_span = {7, 99};
    try {
        strip_context(c, std::string_view("short"));
        FAIL("expected out of bounds");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::span_out_of_bounds);
    }
}

TEST_CASE("pipeline returns deduplicated source spans with a consistent trace") {
    llm::HashEmbedder emb(64);
    llm::LexicalReranker rr;
    const auto idx = doc_index(emb);
    RetrievalConfig cfg;
    const auto res = retrieve("terminate for material breach", idx, {emb, rr}, cfg);
    REQUIRE_FALSE(res.spans.empty());
    CHECK(res.spans[0].text.find("material breach") != std::string::npos);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& s : res.spans) {
        CHECK(s.text == kDoc.substr(s.core_span.start, s.core_span.length()));
        CHECK(seen.insert({s.core_span.start, s.core_span.end}).second);
        CHECK(s.rerank_score_norm >= 0.5);
    }
    const auto& t = res.trace;
    CHECK(t.fused <= t.candidates);
    CHECK(t.reranked <= t.fused);
    CHECK(t.stripped <= t.reranked);
    CHECK(t.stripped == res.spans.size());
    CHECK(t.candidates <= t.bm25 + t.dense);
    const auto j = nlohmann::json::parse(to_json(res));
    CHECK(j["stage_trace"]["stripped"] == t.stripped);
    CHECK_FALSE(j["stage_trace"].contains("filtered"));
}

TEST_CASE("query extraction costs one call and rewrites the query") {
    llm::HashEmbedder emb(64);
    llm::LexicalReranker rr;
    const auto idx = doc_index(emb);
    llm::CostLedger ledger;
    llm::ScriptedChatClient chat({"late payment interest"});
    llm::AccountedChat ac(chat, ledger);
    const auto res = retrieve("What happens if I pay late?", idx, {emb, rr, &ac, nullptr}, RetrievalConfig{});
    CHECK(res.query == "late payment interest");
    CHECK(ledger.count(llm::CallRole::researcher_query_extract) == 1);
    RetrievalConfig off;
    off.optimize_query = false;
    const auto raw = retrieve("interest", idx, {emb, rr, &ac, nullptr}, off);
    CHECK(raw.query == "interest");
    CHECK(ledger.size() == 1);
}

TEST_CASE("llm filter keeps verbatim sub-spans only") {
    RetrievedSpan parent;
    parent.text = "Either party may terminate. Notice must be written.";
    parent.core_span = {100, 100 + parent.text.size()};
    parent.chunk_id = "p";
    llm::CostLedger ledger;
    llm::ScriptedChatClient chat({"- \"Notice must be written.\"\n- invented sentence\nNONE"});
    llm::AccountedChat ac(chat, ledger);
    std::vector<std::string> warnings;
    const auto out = llm_filter("notice", {parent}, ac, warnings);
    REQUIRE(out.size() == 1);
    CHECK(out[0].text == "Notice must be written.");
    CHECK(out[0].core_span.start == 128);
    CHECK(out[0].core_span.length() == out[0].text.size());
    REQUIRE(warnings.size() == 1);
    CHECK(ledger.count(llm::CallRole::filter) == 1);
}

TEST_CASE("llm filter stage in the pipeline") {
    llm::HashEmbedder emb(64);
    llm::LexicalReranker rr;
    const auto idx = doc_index(emb);
    RetrievalConfig cfg;
    cfg.llm_filter = true;
    cfg.optimize_query = false;
    cfg.answer_top_k = 2;
    llm::CostLedger ledger;
    llm::MockChatClient chat([](const llm::ChatRequest&) { return std::string("NONE"); });
    llm::AccountedChat ac(chat, ledger);
    const auto res = retrieve("terminate breach", idx, {emb, rr, nullptr, &ac}, cfg);
    CHECK(res.spans.empty());
    CHECK(res.trace.filtered == 0);
    CHECK(ledger.count(llm::CallRole::filter) == std::min<std::size_t>(2, res.trace.stripped));
    CHECK_THROWS_AS(retrieve("terminate", idx, {emb, rr}, cfg), Error);
}

TEST_CASE("reranker failure propagates with its stage") {
    llm::HashEmbedder emb(64);
    FailingReranker rr;
    const auto idx = doc_index(emb);
    try {
        retrieve("terminate", idx, {emb, rr}, RetrievalConfig{});
        FAIL("expected upstream error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::upstream);
        CHECK(e.stage() == "rerank");
    }
}

TEST_CASE("config validation") {
    RetrievalConfig c;
    CHECK_NOTHROW(c.validate());
    c.sigmoid_threshold = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.rrf_weights = {0.0, 0.0};
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.fused_top_n = 0;
    CHECK_THROWS_AS(c.validate(), Error);
}
