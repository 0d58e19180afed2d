// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include "clausekit/agents.hpp"
#include "clausekit/eval.hpp"
#include "clausekit/index.hpp"
#include "clausekit/report.hpp"
#include "clausekit/retrieval.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <atomic>
#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace clausekit;
using llm::CallRole;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("unexpected exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0 && secs > budget_s) {
        o.pass = false;
        o.detail += "; over the " + std::to_string(budget_s) + " s budget";
    }
    if (!o.pass) ++failures;
    std::ostringstream time;
    time.precision(2);
    time << std::fixed << secs;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " (" << o.detail << "; " << time.str() << " s)" << std::endl;
}

const std::string kContract =
    "SERVICES AGREEMENT\n\n"
    "1. TERMINATION\n"
    "1.1 Either party may terminate this Agreement on thirty days written notice.\n"
    "1.2 The Customer may terminate immediately for material breach.\n"
    "2. PAYMENT\n"
    "2.1 Invoices are payable within thirty days.\n"
    "2.2 Late payments accrue interest at two percent.\n";

/// Role-aware mock that never emits the stop phrase and never repeats a
/// question.
llm::MockChatClient::Responder never_stop() {
    auto n = std::make_shared<std::atomic<int>>(0);
    return [n](const llm::ChatRequest& r) -> std::string {
        switch (r.role) {
            case CallRole::archivist_turn: return "Could you say more about the situation?";
            case CallRole::archivist_finalize: return R"({"query":"Can the customer terminate early?","context":"","instructions":""})";
            case CallRole::llm_parse:
                return R"([{"first_words":"1. TERMINATION","label":"1.","level":1},)"
                       R"({"first_words":"1.1 Either","label":"1.1","level":2},)"
                       R"({"first_words":"2. PAYMENT","label":"2.","level":1}])";
            case CallRole::interrogator_question: return "Which notice period applies, case " + std::to_string(++*n) + "?";
            case CallRole::researcher_query_extract: return "terminate notice";
            case CallRole::researcher_nl_response: return "Thirty days written notice is required.";
            case CallRole::report_refine: return fixtures::report_markdown();
            default: return "ok";
        }
    };
}

Outcome cost_identity() {
    llm::HashEmbedder emb(64);
    llm::LexicalReranker rr;
    std::size_t runs = 0;
    for (std::size_t n_turns = 0; n_turns <= 3; ++n_turns)
        for (std::size_t d_int = 1; d_int <= 5; ++d_int)
            for (bool parse : {false, true})
                for (bool nl : {false, true}) {
                    llm::CostLedger ledger;
                    llm::MockChatClient client(never_stop());
                    llm::AccountedChat chat(client, ledger);

                    const auto tree = parse ? doctree::parse_document_llm(kContract, "msa.txt", chat)
                                            : doctree::parse_document(kContract, "msa.txt");
                    const auto idx = index::build_document_index(tree, &emb);

                    agents::ArchivistSession archivist;
                    for (std::size_t t = 0; t < n_turns; ++t) archivist.converse("message " + std::to_string(t), chat);
                    const auto brief = *archivist.converse("I want to end my contract.", chat, true).brief;

                    agents::InterrogationOptions opt;
                    opt.d_max = d_int;
                    opt.research.nl_response = nl;
                    const auto res = agents::run_interrogation(brief, {&idx, nullptr}, {chat, emb, rr}, opt);

                    const auto want = llm::expected_call_count(n_turns, d_int, parse, nl);
                    if (res.state.turns.size() != d_int || ledger.size() != want ||
                        ledger.size() != llm::expected_call_count(ledger.n_turns(), ledger.d_int(),
                                                                  ledger.llm_parsing(), ledger.nl_response())) {
                        std::ostringstream os;
                        os << "n_turns=" << n_turns << " d_int=" << d_int << " parse=" << parse << " nl=" << nl
                           << ": ledger " << ledger.size() << " != expected " << want;
                        return {false, os.str()};
                    }
                    ++runs;
                }
    return {true, std::to_string(runs) + " configurations exact"};
}

Outcome rrf_oracle() {
    std::mt19937 rng(2024);
    for (int inst = 0; inst < 1000; ++inst) {
        const std::size_t lists = 1 + rng() % 6;
        const std::size_t universe = 1 + rng() % 20;
        std::vector<std::vector<std::string>> rankings(lists);
        std::vector<double> weights(lists);
        for (std::size_t i = 0; i < lists; ++i) {
            std::vector<std::string> ids;
            for (std::size_t u = 0; u < universe; ++u) ids.push_back("d" + std::to_string(u));
            std::shuffle(ids.begin(), ids.end(), rng);
            ids.resize(rng() % (universe + 1));
            rankings[i] = ids;
            weights[i] = (rng() % 4 == 0) ? 1.0 : std::uniform_real_distribution<double>(0.1, 2.0)(rng);
        }
        const double k = (inst % 2 == 0) ? 60.0 : static_cast<double>(1 + rng() % 100);
        const auto got = retrieval::rrf_fuse(rankings, weights, k);
        const auto want = oracles::rrf(rankings, weights, k);
        if (got.size() != want.size()) return {false, "instance " + std::to_string(inst) + ": length differs"};
        for (std::size_t i = 0; i < got.size(); ++i)
            if (got[i].id != want[i].id || got[i].score != want[i].score)
                return {false, "instance " + std::to_string(inst) + ": position " + std::to_string(i) + " differs"};
    }
    return {true, "1000 instances, identical scores and order"};
}

Outcome bm25_oracle() {
    std::mt19937 rng(7);
    std::vector<std::string> vocab;
    for (int i = 0; i < 40; ++i) vocab.push_back("w" + std::to_string(i));
    std::size_t compared = 0;
    for (int corpus = 0; corpus < 200; ++corpus) {
        const std::size_t n = 1 + rng() % 50;
        std::vector<chunker::Chunk> chunks;
        std::vector<std::vector<std::string>> docs;
        for (std::size_t d = 0; d < n; ++d) {
            std::string text;
            for (std::size_t t = 0, len = 1 + rng() % 30; t < len; ++t) text += vocab[rng() % (5 + corpus % 35)] + " ";
            chunker::Chunk c;
            c.id = "c" + std::to_string(d);
            c.text = text;
            c.doc_position = d;
            chunks.push_back(c);
            docs.push_back(text::tokenize(text));
        }
        const auto idx = index::ChunkIndex::build(chunks, nullptr);
        for (int q = 0; q < 5; ++q) {
            std::vector<std::string> query;
            for (std::size_t t = 0, len = 1 + rng() % 5; t < len; ++t) query.push_back(vocab[rng() % vocab.size()]);
            const auto want = oracles::bm25(docs, query, 1.2, 0.75);
            const auto serial = idx.bm25_scores_serial(query);
            const auto par = idx.bm25_scores(query);
            for (std::size_t d = 0; d < n; ++d) {
                if (serial[d] != want[d]) return {false, "serial score differs in corpus " + std::to_string(corpus)};
                if (par[d] != want[d]) return {false, "parallel score differs in corpus " + std::to_string(corpus)};
                ++compared;
            }
        }
    }
    return {true, std::to_string(compared) + " scores exact, serial and parallel"};
}

Outcome metric_oracles() {
    std::mt19937 rng(99);
    for (int cfg = 0; cfg < 500; ++cfg) {
        const std::size_t n = 20 + rng() % 500;
        auto span = [&] {
            const std::size_t a = rng() % n;
            const std::size_t b = a + 1 + rng() % (n - a);
            return Span{a, b};
        };
        std::vector<Span> retrieved;
        for (std::size_t i = 0, m = rng() % 10; i < m; ++i) retrieved.push_back(span());
        std::vector<Span> truth;
        for (std::size_t i = 0, m = 1 + rng() % 4; i < m; ++i) truth.push_back(span());
        truth = eval::normalize_spans(truth);
        const std::size_t k = 1 + rng() % 12;
        const auto got = eval::char_pr_at_k(retrieved, truth, k);
        const auto want = oracles::char_bitmap(retrieved, truth, k, n);
        if (got.precision != want.precision || got.recall != want.recall)
            return {false, "configuration " + std::to_string(cfg) + " differs"};

        eval::BenchmarkCase c{"c", "q", "d", truth};
        const auto perfect = eval::perfect_oracle(c);
        for (std::size_t kk = 1; kk <= 64; kk *= 2) {
            if (eval::char_pr_at_k(perfect, truth, kk).precision != 1.0 ||
                eval::span_pr_at_k(perfect, truth, kk).precision != 1.0)
                return {false, "perfect oracle precision below 1 at k=" + std::to_string(kk)};
        }
    }
    return {true, "500 configurations exact; perfect oracle precision 1.0 at every k"};
}

Outcome span_char_divergence() {
    std::vector<eval::BenchmarkCase> cases;
    std::vector<std::vector<Span>> retrieved;
    std::mt19937 rng(5);
    for (int i = 0; i < 20; ++i) {
        const std::size_t start = 100 * static_cast<std::size_t>(i);
        const std::size_t len = 40 + rng() % 50;
        cases.push_back({"c" + std::to_string(i), "q", "d", {{start, start + len}}});
        // A strict sub-span of the truth, as an LLM filter would extract.
        const std::size_t a = start + 1 + rng() % 10;
        retrieved.push_back({{a, a + 1 + rng() % (len - 20)}});
    }
    const std::vector<std::size_t> grid{1, 2, 4, 8};
    const auto rep = eval::score_cases(cases, retrieved, grid);
    for (const auto& r : rep.rows)
        if (!(r.recall_span == 1.0 && r.recall_char < 1.0 && r.recall_span > r.recall_char))
            return {false, "k=" + std::to_string(r.k) + " does not diverge"};
    std::ostringstream os;
    os << "span recall 1.0 vs char recall " << rep.rows[0].recall_char;
    return {true, os.str()};
}

Outcome tree_round_trip() {
    for (unsigned seed = 0; seed < 50; ++seed) {
        const auto src = fixtures::synthetic_contract(1000 + seed);
        const auto t = doctree::parse_document(src, "doc.txt");
        if (t.parse_mode != doctree::ParseMode::structural) return {false, "seed " + std::to_string(seed) + " not structural"};
        if (auto why = doctree::validate(t)) return {false, "seed " + std::to_string(seed) + ": " + *why};
        if (doctree::normalized_concatenation(t) != text::normalize_whitespace(src))
            return {false, "seed " + std::to_string(seed) + " loses text"};
    }
    std::size_t windows = 0;
    for (unsigned seed = 0; seed < 10; ++seed) {
        const auto src = fixtures::unstructured_text(seed, 1500 + 700 * seed);
        const auto t = doctree::parse_document(src, "notes.txt");
        if (t.parse_mode != doctree::ParseMode::fallback_flat) return {false, "unstructured fixture parsed structurally"};
        for (std::size_t i = 1; i < t.size(); ++i) {
            const auto& n = t.node(i);
            if (n.span.start != (i - 1) * 1000) return {false, "window does not start on a 1000 boundary"};
            if (i + 1 < t.size() && n.span.length() != 1000) return {false, "inner window is not 1000 chars"};
            ++windows;
        }
        if (t.node(t.size() - 1).span.end != src.size()) return {false, "windows do not reach the end"};
    }
    return {true, "50/50 contracts round-trip; 10/10 unstructured fixtures fall back (" + std::to_string(windows) +
                      " windows)"};
}

Outcome interrogation_termination() {
    if (agents::InterrogationOptions{}.d_max != 5) return {false, "default d_max is not 5"};
    llm::HashEmbedder emb(64);
    llm::LexicalReranker rr;
    const auto idx = index::build_document_index(doctree::parse_document(kContract, "msa.txt"), &emb);
    const agents::UserBrief brief{"Can the customer terminate early?", "", ""};

    struct Adversary {
        std::string name;
        llm::MockChatClient::Responder responder;
        bool expect_schema_violation;
    };
    const auto report_or = [](std::string q, std::string refine) {
        return [q, refine](const llm::ChatRequest& r) -> std::string {
            if (r.role == CallRole::interrogator_question) return q;
            if (r.role == CallRole::report_refine) return refine;
            return "terminate";
        };
    };
    std::vector<Adversary> adversaries{
        {"never-stopping", never_stop(), false},
        {"always-duplicating", report_or("Is there a notice period?", fixtures::report_markdown()), false},
        {"empty-question", report_or("   ", fixtures::report_markdown()), false},
        {"malformed-markdown", report_or("Is there a notice period?", "Sure! Here is my analysis without headings."),
         true},
        {"uncited-source", report_or("Q?", [] {
             auto md = fixtures::report_markdown();
             const auto at = md.find("\n", md.find("### Summary")) + 1;
             return md.insert(at, "An unsupported claim [7].\n");
         }()), true},
    };
    std::ostringstream detail;
    for (const auto& adv : adversaries) {
        for (std::size_t d_max = 1; d_max <= 5; ++d_max) {
            llm::CostLedger ledger;
            llm::MockChatClient client(adv.responder);
            llm::AccountedChat chat(client, ledger);
            agents::InterrogationOptions opt;
            opt.d_max = d_max;
            opt.research.nl_response = false;
            try {
                const auto res = agents::run_interrogation(brief, {&idx, nullptr}, {chat, emb, rr}, opt);
                if (adv.expect_schema_violation) return {false, adv.name + " produced a report"};
                if (res.state.turns.size() > d_max) return {false, adv.name + " exceeded d_max"};
                if (auto why = report::validate(res.report)) return {false, adv.name + " invalid report: " + *why};
            } catch (const agents::InterrogationError& e) {
                if (e.code() != ErrorCode::schema_violation)
                    return {false, adv.name + " raised " + std::string(to_string(e.code()))};
                if (!adv.expect_schema_violation) return {false, adv.name + " raised a schema violation"};
                if (e.state().turns.size() > d_max) return {false, adv.name + " exceeded d_max before failing"};
            }
        }
        detail << adv.name << " ok; ";
    }
    return {true, detail.str() + "default d_max 5"};
}

Outcome planted_recall() {
    const auto corpus = fixtures::planted_corpus();
    llm::HashEmbedder emb(256);
    llm::LexicalReranker rr;
    retrieval::RetrievalConfig cfg;
    cfg.optimize_query = false;
    std::size_t hits = 0;
    for (const auto& c : corpus.cases) {
        const auto tree = doctree::parse_document(corpus.documents.at(c.document_id), c.document_id);
        const auto idx = index::build_document_index(tree, &emb);
        const auto res = retrieval::retrieve(c.query, idx, {emb, rr}, cfg);
        std::vector<Span> spans;
        for (const auto& s : res.spans) spans.push_back(s.core_span);
        if (eval::span_pr_at_k(spans, c.ground_truth, 1).recall == 1.0) ++hits;
    }
    return {hits >= 9, std::to_string(hits) + "/10 queries with span recall@1 = 1.0"};
}

Outcome report_schema() {
    const auto dir = fixtures::temp_dir("acceptance-cassette");
    const auto cassette = (dir / "interrogations.jsonl").string();
    llm::HashEmbedder emb(64);
    llm::LexicalReranker rr;
    std::vector<index::ChunkIndex> indices;
    for (unsigned seed = 0; seed < 4; ++seed)
        indices.push_back(index::build_document_index(
            doctree::parse_document(fixtures::synthetic_contract(300 + seed), "c" + std::to_string(seed) + ".txt"),
            &emb));
    const std::vector<std::string> questions{
        "Can either party terminate on notice?", "When are invoices payable?",      "Who owns the deliverables?",
        "Is there a warranty period?",            "How must notices be delivered?", "Which law governs the contract?",
        "Is liability for indirect loss excluded?", "May the customer assign the agreement?",
        "What insurance must the supplier hold?", "Do confidentiality duties survive termination?"};

    auto run_all = [&](llm::ChatClient& client) -> std::optional<std::string> {
        for (std::size_t i = 0; i < 20; ++i) {
            llm::CostLedger ledger;
            llm::AccountedChat chat(client, ledger);
            agents::InterrogationOptions opt;
            opt.d_max = 1 + i % 3;
            const auto& idx = indices[i % indices.size()];
            const agents::UserBrief brief{questions[i % questions.size()], "", i % 2 ? "Be concise." : ""};
            const auto res = agents::run_interrogation(brief, {&idx, nullptr}, {chat, emb, rr}, opt);
            // Re-parse the rendered markdown: the six headings must all be there.
            const auto r = report::parse_report_markdown(report::render_markdown(res.report, true));
            if (auto why = report::validate(r)) return "interrogation " + std::to_string(i) + ": " + *why;
            for (std::size_t s = 0; s < r.sources.size(); ++s)
                if (r.sources[s].number != static_cast<int>(s + 1)) return "sources not consecutive";
        }
        return std::nullopt;
    };
    {
        auto inner = std::make_shared<llm::OfflineChatClient>();
        llm::ReplayChatClient recorder(cassette, llm::ReplayChatClient::Mode::record, inner);
        if (auto why = run_all(recorder)) return {false, "recording: " + *why};
    }
    llm::ReplayChatClient replay(cassette, llm::ReplayChatClient::Mode::replay);
    if (auto why = run_all(replay)) return {false, "replay: " + *why};
    std::filesystem::remove_all(dir);

    const auto label = report::extract_nli_label(report::parse_report_markdown(fixtures::nli_report_markdown()));
    if (label != report::NliLabel::entailment)
        return {false, "NLI fixture labeled " + std::string(report::to_string(label))};
    return {true, "20/20 replayed reports have six sections and consecutive sources; NLI fixture -> ENTAILMENT"};
}

Outcome persistence_round_trip() {
    llm::HashEmbedder emb(128);
    const auto dir = fixtures::temp_dir("acceptance-index");
    std::size_t compared = 0;
    for (unsigned seed = 0; seed < 5; ++seed) {
        const auto tree = doctree::parse_document(fixtures::synthetic_contract(500 + seed), "p.txt");
        const auto idx = index::build_document_index(tree, &emb);
        const auto path = dir / std::to_string(seed);
        idx.save(path);
        const auto back = index::ChunkIndex::load(path);
        for (std::string q : {"terminate material breach", "invoices thirty days", "insurance insurers",
                              "governed laws New York", "confidential information", "zzz unknown"}) {
            const auto toks = text::tokenize(q);
            if (back.bm25_scores(toks) != idx.bm25_scores(toks)) return {false, "bm25 scores differ"};
            if (index::bm25_search(back, q) != index::bm25_search(idx, q)) return {false, "bm25 ranking differs"};
            const auto v = emb.embed_one(q);
            if (back.cosine_scores(v) != idx.cosine_scores(v)) return {false, "cosine scores differ"};
            if (index::dense_search(back, v) != index::dense_search(idx, v)) return {false, "dense ranking differs"};
            ++compared;
        }
    }
    std::filesystem::remove_all(dir);
    return {true, std::to_string(compared) + " queries bit-identical after reload"};
}

}  // namespace

int main() {
    criterion("cost-model identity", 10, cost_identity);
    criterion("rrf oracle equivalence", 5, rrf_oracle);
    criterion("bm25 oracle equivalence", 5, bm25_oracle);
    criterion("metric oracles", 5, metric_oracles);
    criterion("span-vs-char divergence", 0, span_char_divergence);
    criterion("tree round-trip", 0, tree_round_trip);
    criterion("interrogation termination", 0, interrogation_termination);
    criterion("planted-answer retrieval", 30, planted_recall);
    criterion("report schema", 0, report_schema);
    criterion("persistence round-trip", 0, persistence_round_trip);
    return failures;
}
