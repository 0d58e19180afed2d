#pragma once

#include "clausekit/index.hpp"
#include "clausekit/llm.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clausekit::retrieval {

struct RetrievalConfig {
    std::size_t bm25_top_n = 100;
    double bm25_min_norm_score = 0.6;
    std::size_t dense_top_n = 100;
    std::vector<double> rrf_weights{1.0, 1.0};  // bm25, dense
    double rrf_k = 60.0;
    std::size_t fused_top_n = 64;
    std::size_t rerank_keep = 64;
    double sigmoid_threshold = 0.5;
    std::size_t answer_top_k = 10;
    bool llm_filter = false;
    /// Rewrite the query with one chat call before searching.
    bool optimize_query = true;

    /// Throws Error(invalid_argument) when a count is 0, a threshold leaves
    /// [0, 1], or the weights are negative or all zero.
    void validate() const;
};

struct FusedItem {
    std::string id;
    double score = 0.0;
    friend bool operator==(const FusedItem&, const FusedItem&) = default;
};

/// score(d) = sum_i w_i / (k + rank_i(d)) with 1-based ranks; a list that
/// does not contain d contributes nothing. Descending score, ties by id.
std::vector<FusedItem> rrf_fuse(const std::vector<std::vector<std::string>>& rankings, std::span<const double> weights,
                                double rrf_k = 60.0);

double sigmoid(double x);

struct RerankCandidate {
    std::string id;
    std::string text;
    std::size_t fused_rank = 0;
};

struct RerankScored {
    std::string id;
    std::size_t fused_rank = 0;
    std::size_t input_position = 0;
    double raw = 0.0;
    double norm = 0.0;
};

/// Scores every candidate jointly with the query, maps scores through the
/// sigmoid, drops those under `sigmoid_threshold`, keeps the best
/// `rerank_keep` (ties by fused rank). Reranker failures propagate.
std::vector<RerankScored> rerank_and_threshold(std::string_view query, const std::vector<RerankCandidate>& candidates,
                                               llm::Reranker& reranker, const RetrievalConfig& config);

struct RetrievedSpan {
    std::string text;
    Span core_span;
    std::string filename;
    std::vector<std::string> node_path;
    std::string chunk_id;
    std::size_t fused_rank = 0;
    double rerank_score_raw = 0.0;
    double rerank_score_norm = 0.0;
};

/// The source text under the chunk's core span. Throws SpanOutOfBounds.
std::string strip_context(const chunker::Chunk& chunk, std::string_view source);
std::string strip_context(const chunker::Chunk& chunk, const index::ChunkIndex& index);

/// Asks the model for verbatim sub-spans of each span (one filter call per
/// span). Sub-spans not found verbatim in their parent are dropped and noted
/// in `warnings`. Output keeps parent order.
std::vector<RetrievedSpan> llm_filter(std::string_view query, const std::vector<RetrievedSpan>& spans,
                                      llm::AccountedChat& chat, std::vector<std::string>& warnings);

struct StageTrace {
    std::size_t bm25 = 0;
    std::size_t dense = 0;
    std::size_t candidates = 0;  // union fed to fusion
    std::size_t fused = 0;
    std::size_t reranked = 0;
    std::size_t stripped = 0;
    std::size_t filtered = 0;  // parents that yielded sub-spans; only with llm_filter

    /// Pipeline stages in order: candidates, fused, reranked, stripped[, filtered].
    std::vector<std::pair<std::string, std::size_t>> chain(bool with_filter) const;
};

struct RetrievalResult {
    std::string query;  // query actually searched
    std::vector<RetrievedSpan> spans;
    StageTrace trace;
    bool filtered = false;
    std::vector<std::string> warnings;
};

struct RetrievalClients {
    llm::Embedder& embedder;
    llm::Reranker& reranker;
    llm::AccountedChat* query_chat = nullptr;   // query extraction
    llm::AccountedChat* filter_chat = nullptr;  // llm_filter
};

/// Query extraction (one researcher_query_extract call when enabled and a
/// chat client is given), then retrieve_prepared.
RetrievalResult retrieve(std::string_view query, const index::ChunkIndex& index, RetrievalClients clients,
                         const RetrievalConfig& config);

/// BM25 + dense -> RRF -> fused_top_n -> rerank + sigmoid threshold ->
/// strip to source spans (duplicates of one span collapse to the best) ->
/// optional LLM filter over the top answer_top_k.
RetrievalResult retrieve_prepared(std::string_view search_query, const index::ChunkIndex& index,
                                  RetrievalClients clients, const RetrievalConfig& config);

/// {"query", "spans":[{text,start,end,filename,node_path,chunk_id,fused_rank,
///  rerank_score_raw,rerank_score_norm}], "stage_trace":{...}, "warnings"}
std::string to_json(const RetrievalResult& result, int indent = -1);

}  // namespace clausekit::retrieval
