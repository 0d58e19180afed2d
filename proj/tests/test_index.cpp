#include "clausekit/index.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <doctest.h>
#include <omp.h>

#include <random>

using namespace clausekit;
using namespace clausekit::index;

namespace {

std::vector<chunker::Chunk> raw_chunks(const std::vector<std::string>& texts) {
    std::vector<chunker::Chunk> cs;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        chunker::Chunk c;
        c.id = "c" + std::to_string(i);
        c.text = texts[i];
        c.doc_position = i;
        cs.push_back(std::move(c));
    }
    return cs;
}

}  // namespace

TEST_CASE("bm25 matches the brute force scorer") {
    const std::vector<std::string> texts{
        "the tenant pays rent monthly", "rent rent rent is due", "the landlord repairs the roof",
        "nothing relevant here at all", "Rent review every five years; the tenant may object."};
    const auto idx = ChunkIndex::build(raw_chunks(texts), nullptr);
    std::vector<std::vector<std::string>> docs;
    for (const auto& t : texts) docs.push_back(text::tokenize(t));
    for (std::string q : {"rent", "tenant rent", "the the roof", "absent", "rent tenant rent"}) {
        const auto toks = text::tokenize(q);
        const auto expect = oracles::bm25(docs, toks);
        const auto serial = idx.bm25_scores_serial(toks);
        const auto par = idx.bm25_scores(toks);
        REQUIRE(serial.size() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(serial[i] == doctest::Approx(expect[i]).epsilon(1e-12));
            CHECK(par[i] == serial[i]);
        }
    }
}

TEST_CASE("parallel kernels match serial above the threading threshold") {
    std::mt19937 rng(3);
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < 3 * ChunkIndex::kParallelMinChunks; ++i) {
        std::string t;
        for (std::size_t w = 0, n = 1 + rng() % 20; w < n; ++w) t += "w" + std::to_string(rng() % 300) + " ";
        texts.push_back(t);
    }
    llm::HashEmbedder emb(32);
    const auto idx = ChunkIndex::build(raw_chunks(texts), &emb);
    const int before = omp_get_max_threads();
    omp_set_num_threads(4);
    for (std::string q : {"w1", "w2 w3 w2", "w299 w0 w17 w150"}) {
        const auto toks = text::tokenize(q);
        CHECK(idx.bm25_scores(toks) == idx.bm25_scores_serial(toks));
        const auto v = emb.embed_one(q);
        CHECK(idx.cosine_scores(v) == idx.cosine_scores_serial(v));
    }
    omp_set_num_threads(before);
}

TEST_CASE("bm25 search ranks, cuts and thresholds") {
    const auto idx = ChunkIndex::build(
        raw_chunks({"rent rent rent", "rent", "tenant only", "rent and tenant", "unrelated words"}), nullptr);
    const auto all = bm25_search(idx, "rent", 100, 0.0);
    REQUIRE(all.size() == 3);
    CHECK(all[0].chunk_id == "c0");
    for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1].score >= all[i].score);
    CHECK(bm25_search(idx, "rent", 1, 0.0).size() == 1);
    const auto strict = bm25_search(idx, "rent", 100, 1.0);
    REQUIRE(strict.size() == 1);
    CHECK(strict[0].chunk_id == "c0");
    CHECK(bm25_search(idx, "absent", 100, 0.6).empty());
    CHECK_THROWS_AS(bm25_search(idx, "rent", 0, 0.6), Error);
}

TEST_CASE("equal bm25 scores are all kept") {
    const auto idx = ChunkIndex::build(raw_chunks({"alpha beta", "beta alpha", "gamma"}), nullptr);
    CHECK(bm25_search(idx, "alpha", 100, 0.9).size() == 2);
}

TEST_CASE("dense search is exact cosine and checks dimensions") {
    llm::HashEmbedder emb(32);
    const std::vector<std::string> texts{"cats and dogs", "interest rate swaps", "dogs chase cats"};
    const auto idx = ChunkIndex::build(raw_chunks(texts), &emb);
    CHECK(idx.dimension() == 32);
    const auto q = emb.embed_one("cats");
    const auto hits = dense_search(idx, q, 10);
    REQUIRE(hits.size() == 3);
    for (const auto& h : hits) CHECK(h.score == doctest::Approx(cosine(q, emb.embed_one(texts[h.ordinal]))));
    CHECK(hits.back().chunk_id == "c1");
    const auto serial = idx.cosine_scores_serial(q);
    const auto par = idx.cosine_scores(q);
    for (std::size_t i = 0; i < serial.size(); ++i) CHECK(serial[i] == par[i]);
    std::vector<float> wrong(16, 0.1f);
    try {
        dense_search(idx, wrong, 10);
        FAIL("expected dimension mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::dimension_mismatch);
    }
}

TEST_CASE("save and load preserve search results") {
    llm::HashEmbedder emb(48);
    auto tree = doctree::parse_document(fixtures::synthetic_contract(9), "c9.txt");
    tree.summary = "supply agreement";
    auto idx = build_document_index(tree, &emb);
    idx.set_label(idx.chunks()[0].id, "ENTAILMENT");
    const auto dir = fixtures::temp_dir("index");
    idx.save(dir);
    const auto back = ChunkIndex::load(dir);
    CHECK(back.size() == idx.size());
    CHECK(back.descriptor() == "supply agreement");
    CHECK(back.label(idx.chunks()[0].id) == "ENTAILMENT");
    REQUIRE(back.source("c9.txt"));
    CHECK(*back.source("c9.txt") == tree.source_text);
    for (std::string q : {"terminate breach notice", "insurance", "invoices thirty days"}) {
        CHECK(bm25_search(back, q) == bm25_search(idx, q));
        const auto v = emb.embed_one(q);
        CHECK(dense_search(back, v) == dense_search(idx, v));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("loading a missing index fails") {
    CHECK_THROWS_AS(ChunkIndex::load(fixtures::temp_dir("missing") / "nope"), Error);
}

TEST_CASE("routing descends to the most similar leaf") {
    llm::HashEmbedder emb(64);
    auto leaf = [&](const std::string& text, const std::string& label) {
        GraphNode n;
        n.descriptor = text;
        n.label = label;
        n.leaf = std::make_shared<ChunkIndex>(ChunkIndex::build(raw_chunks({text}), &emb));
        return n;
    };
    GraphNode root;
    root.descriptor = "all contracts";
    GraphNode leases;
    leases.descriptor = "leases rent tenant landlord";
    leases.children = {leaf("tenant pays rent", "lease-a"), leaf("landlord repairs roof", "lease-b")};
    GraphNode ndas;
    ndas.descriptor = "confidential information disclosure";
    ndas.children = {leaf("confidential information disclosure affiliates", "nda-a")};
    root.children = {leases, ndas};
    CorpusGraph g(root);
    g.embed_descriptors(emb);
    CHECK(g.leaf_count() == 3);
    const auto r = route_query(g, emb.embed_one("tenant rent"));
    REQUIRE(r.leaf);
    CHECK(r.leaf->label == "lease-a");
    CHECK(r.comparisons == 2);
    CHECK(r.cosine_evaluations == 4);
    const auto ex = cross_document_examples(g, "confidential disclosure", emb, 3);
    REQUIRE(ex.size() == 1);
    CHECK(ex[0].label == "nda-a");

    CorpusGraph empty;
    try {
        route_query(empty, emb.embed_one("x"));
        FAIL("expected empty graph");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::empty_graph);
    }
}
