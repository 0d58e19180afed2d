#include "clausekit/retrieval.hpp"

#include "clausekit/prompts.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

namespace clausekit::retrieval {

void RetrievalConfig::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::invalid_argument, "retrieval_config", m); };
    if (bm25_top_n < 1 || dense_top_n < 1 || fused_top_n < 1 || rerank_keep < 1 || answer_top_k < 1)
        fail("all counts must be >= 1");
    if (!(bm25_min_norm_score >= 0 && bm25_min_norm_score <= 1)) fail("bm25_min_norm_score must be in [0, 1]");
    if (!(sigmoid_threshold >= 0 && sigmoid_threshold <= 1)) fail("sigmoid_threshold must be in [0, 1]");
    if (rrf_weights.empty()) fail("rrf_weights must not be empty");
    bool any = false;
    for (double w : rrf_weights) {
        if (!(w >= 0)) fail("rrf_weights must be nonnegative");
        any = any || w > 0;
    }
    if (!any) fail("rrf_weights must not all be zero");
    if (!(rrf_k >= 0)) fail("rrf_k must be nonnegative");
}

std::vector<FusedItem> rrf_fuse(const std::vector<std::vector<std::string>>& rankings, std::span<const double> weights,
                                double rrf_k) {
    if (rankings.empty()) throw Error(ErrorCode::invalid_argument, "rrf", "need at least one ranking");
    if (weights.size() != rankings.size())
        throw Error(ErrorCode::invalid_argument, "rrf", "one weight per ranking is required");
    std::unordered_map<std::string, double> score;
    std::vector<std::string> order;
    for (std::size_t i = 0; i < rankings.size(); ++i) {
        std::set<std::string_view> seen;
        for (std::size_t r = 0; r < rankings[i].size(); ++r) {
            const auto& id = rankings[i][r];
            if (!seen.insert(id).second)
                throw Error(ErrorCode::invalid_argument, "rrf", "duplicate id '" + id + "' within one ranking");
            auto [it, inserted] = score.emplace(id, 0.0);
            if (inserted) order.push_back(id);
            it->second += weights[i] / (rrf_k + static_cast<double>(r + 1));
        }
    }
    std::vector<FusedItem> out;
    out.reserve(order.size());
    for (auto& id : order) out.push_back({id, score[id]});
    std::sort(out.begin(), out.end(), [](const FusedItem& a, const FusedItem& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<RerankScored> rerank_and_threshold(std::string_view query, const std::vector<RerankCandidate>& candidates,
                                               llm::Reranker& reranker, const RetrievalConfig& config) {
    if (candidates.size() > config.fused_top_n)
        throw Error(ErrorCode::invalid_argument, "rerank", "more candidates than fused_top_n");
    if (candidates.empty()) return {};
    std::vector<std::string> texts;
    texts.reserve(candidates.size());
    for (const auto& c : candidates) texts.push_back(c.text);
    std::vector<double> raw;
    try {
        raw = reranker.score(query, texts);
    } catch (const Error& e) {
        throw e.with_stage("rerank");
    }
    if (raw.size() != candidates.size())
        throw Error(ErrorCode::upstream, "rerank", "reranker returned " + std::to_string(raw.size()) + " scores for " +
                                                       std::to_string(candidates.size()) + " passages");
    std::vector<RerankScored> scored;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double norm = sigmoid(raw[i]);
        if (norm < config.sigmoid_threshold) continue;
        scored.push_back({candidates[i].id, candidates[i].fused_rank, i, raw[i], norm});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const RerankScored& a, const RerankScored& b) {
        if (a.raw != b.raw) return a.raw > b.raw;
        return a.fused_rank < b.fused_rank;
    });
    if (scored.size() > config.rerank_keep) scored.resize(config.rerank_keep);
    return scored;
}

std::string strip_context(const chunker::Chunk& chunk, std::string_view source) {
    if (chunk.core_span.end > source.size() || chunk.core_span.start > chunk.core_span.end)
        throw Error(ErrorCode::span_out_of_bounds, "strip",
                    "chunk " + chunk.id + " span [" + std::to_string(chunk.core_span.start) + ", " +
                        std::to_string(chunk.core_span.end) + ") exceeds source of " + std::to_string(source.size()) +
                        " bytes");
    return std::string(source.substr(chunk.core_span.start, chunk.core_span.length()));
}

std::string strip_context(const chunker::Chunk& chunk, const index::ChunkIndex& index) {
    const std::string* src = index.source(chunk.filename);
    if (src == nullptr)
        throw Error(ErrorCode::span_out_of_bounds, "strip", "no source text registered for " + chunk.filename);
    return strip_context(chunk, *src);
}

namespace {

std::vector<std::string> filter_lines(const std::string& reply) {
    std::vector<std::string> out;
    for (const auto& raw_line : text::split_lines(reply)) {
        std::string_view line = text::trim(raw_line);
        if (line.empty()) continue;
        if (line == "NONE" || line == "None" || line == "none") continue;
        if (line.size() >= 2 && (line[0] == '-' || line[0] == '*') && line[1] == ' ') line.remove_prefix(2);
        line = text::trim(line);
        if (line.size() >= 2 && line.front() == '"' && line.back() == '"') line = line.substr(1, line.size() - 2);
        if (!line.empty()) out.emplace_back(line);
    }
    return out;
}

}  // namespace

std::vector<RetrievedSpan> llm_filter(std::string_view query, const std::vector<RetrievedSpan>& spans,
                                      llm::AccountedChat& chat, std::vector<std::string>& warnings) {
    std::vector<RetrievedSpan> out;
    for (const auto& parent : spans) {
        const std::string reply =
            chat.ask(llm::CallRole::filter, prompts::filter_system(), prompts::filter_user(query, parent.text));
        std::vector<RetrievedSpan> subs;
        for (const auto& line : filter_lines(reply)) {
            const auto pos = parent.text.find(line);
            if (pos == std::string::npos) {
                warnings.push_back("filter: sub-span not found verbatim in " + parent.chunk_id + ": " +
                                   line.substr(0, 80));
                continue;
            }
            RetrievedSpan s = parent;
            s.text = line;
            s.core_span = {parent.core_span.start + pos, parent.core_span.start + pos + line.size()};
            subs.push_back(std::move(s));
        }
        std::sort(subs.begin(), subs.end(),
                  [](const RetrievedSpan& a, const RetrievedSpan& b) { return a.core_span.start < b.core_span.start; });
        subs.erase(std::unique(subs.begin(), subs.end(),
                               [](const RetrievedSpan& a, const RetrievedSpan& b) { return a.core_span == b.core_span; }),
                   subs.end());
        for (auto& s : subs) out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::pair<std::string, std::size_t>> StageTrace::chain(bool with_filter) const {
    std::vector<std::pair<std::string, std::size_t>> c{
        {"candidates", candidates}, {"fused", fused}, {"reranked", reranked}, {"stripped", stripped}};
    if (with_filter) c.emplace_back("filtered", filtered);
    return c;
}

RetrievalResult retrieve(std::string_view query, const index::ChunkIndex& index, RetrievalClients clients,
                         const RetrievalConfig& config) {
    std::string search_query(query);
    if (config.optimize_query && clients.query_chat != nullptr) {
        try {
            const auto rewritten = clients.query_chat->ask(
                llm::CallRole::researcher_query_extract,
                prompts::researcher_query_system(std::span<const prompts::ToolDescription>{}),
                prompts::researcher_query_user(query));
            if (!text::is_blank(rewritten)) search_query = std::string(text::trim(rewritten));
        } catch (const Error& e) {
            throw e.with_stage("query_extraction");
        }
    }
    return retrieve_prepared(search_query, index, clients, config);
}

RetrievalResult retrieve_prepared(std::string_view search_query, const index::ChunkIndex& index,
                                  RetrievalClients clients, const RetrievalConfig& config) {
    config.validate();
    RetrievalResult result;
    result.query = std::string(search_query);
    result.filtered = config.llm_filter;
    if (index.empty()) return result;

    std::vector<index::SearchHit> lexical;
    std::vector<index::SearchHit> dense;
    try {
        lexical = index::bm25_search(index, search_query, config.bm25_top_n, config.bm25_min_norm_score);
    } catch (const Error& e) {
        throw e.with_stage("bm25");
    }
    try {
        const auto qv = clients.embedder.embed_one(search_query);
        dense = index::dense_search(index, qv, config.dense_top_n);
    } catch (const Error& e) {
        throw e.with_stage("dense");
    }
    result.trace.bm25 = lexical.size();
    result.trace.dense = dense.size();

    std::vector<std::vector<std::string>> rankings(2);
    for (const auto& h : lexical) rankings[0].push_back(h.chunk_id);
    for (const auto& h : dense) rankings[1].push_back(h.chunk_id);
    std::vector<double> weights = config.rrf_weights;
    weights.resize(2, weights.empty() ? 1.0 : weights.back());
    auto fused = rrf_fuse(rankings, weights, config.rrf_k);
    result.trace.candidates = fused.size();
    if (fused.size() > config.fused_top_n) fused.resize(config.fused_top_n);
    result.trace.fused = fused.size();

    std::vector<RerankCandidate> candidates;
    candidates.reserve(fused.size());
    for (std::size_t r = 0; r < fused.size(); ++r) {
        const auto ord = index.find(fused[r].id);
        candidates.push_back({fused[r].id, index.chunks()[*ord].text, r + 1});
    }
    const auto reranked = rerank_and_threshold(search_query, candidates, clients.reranker, config);
    result.trace.reranked = reranked.size();

    std::set<std::pair<std::string, std::pair<std::size_t, std::size_t>>> seen_spans;
    for (const auto& r : reranked) {
        const auto& chunk = index.chunks()[*index.find(r.id)];
        if (!seen_spans.insert({chunk.filename, {chunk.core_span.start, chunk.core_span.end}}).second) continue;
        RetrievedSpan s;
        try {
            s.text = strip_context(chunk, index);
        } catch (const Error& e) {
            throw e.with_stage("strip");
        }
        s.core_span = chunk.core_span;
        s.filename = chunk.filename;
        s.node_path = chunk.node_path;
        s.chunk_id = chunk.id;
        s.fused_rank = r.fused_rank;
        s.rerank_score_raw = r.raw;
        s.rerank_score_norm = r.norm;
        result.spans.push_back(std::move(s));
    }
    result.trace.stripped = result.spans.size();

    if (config.llm_filter) {
        if (clients.filter_chat == nullptr)
            throw Error(ErrorCode::config, "filter", "llm_filter enabled without a filter chat client");
        std::vector<RetrievedSpan> top(result.spans.begin(),
                                       result.spans.begin() + static_cast<long>(std::min(result.spans.size(), config.answer_top_k)));
        try {
            result.spans = llm_filter(search_query, top, *clients.filter_chat, result.warnings);
        } catch (const Error& e) {
            throw e.with_stage("filter");
        }
        std::set<std::string> parents;
        for (const auto& s : result.spans) parents.insert(s.chunk_id);
        result.trace.filtered = parents.size();
    }
    return result;
}

std::string to_json(const RetrievalResult& result, int indent) {
    nlohmann::ordered_json j;
    j["query"] = result.query;
    j["spans"] = nlohmann::ordered_json::array();
    for (const auto& s : result.spans) {
        nlohmann::ordered_json o;
        o["text"] = s.text;
        o["start"] = s.core_span.start;
        o["end"] = s.core_span.end;
        o["filename"] = s.filename;
        o["node_path"] = s.node_path;
        o["chunk_id"] = s.chunk_id;
        o["fused_rank"] = s.fused_rank;
        o["rerank_score_raw"] = s.rerank_score_raw;
        o["rerank_score_norm"] = s.rerank_score_norm;
        j["spans"].push_back(std::move(o));
    }
    nlohmann::ordered_json t;
    t["bm25"] = result.trace.bm25;
    t["dense"] = result.trace.dense;
    for (const auto& [name, n] : result.trace.chain(result.filtered)) t[name] = n;
    j["stage_trace"] = std::move(t);
    j["warnings"] = result.warnings;
    return j.dump(indent);
}

}  // namespace clausekit::retrieval
