#pragma once

#include "clausekit/chunker.hpp"
#include "clausekit/llm.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace clausekit::index {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct SearchHit {
    std::string chunk_id;
    std::size_t ordinal = 0;  // position in ChunkIndex::chunks()
    double score = 0.0;
    friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

/// Lexical postings plus optional dense vectors over one chunk set.
/// Build once, then share: all const member functions are safe to call
/// concurrently.
class ChunkIndex {
public:
    ChunkIndex() = default;

    /// Tokenizes and (when `embedder` is non-null) embeds every chunk.
    static ChunkIndex build(std::vector<chunker::Chunk> chunks, llm::Embedder* embedder, std::string descriptor = {},
                            Bm25Params params = {});

    /// Source documents addressed by chunk core spans, keyed by filename.
    void add_source(std::string filename, std::string text);
    const std::string* source(std::string_view filename) const;
    const std::map<std::string, std::string, std::less<>>& sources() const { return sources_; }

    /// Per-chunk labels for few-shot example indices.
    void set_label(const std::string& chunk_id, std::string label);
    std::optional<std::string> label(const std::string& chunk_id) const;
    const std::map<std::string, std::string>& labels() const { return labels_; }

    const std::vector<chunker::Chunk>& chunks() const { return chunks_; }
    std::optional<std::size_t> find(std::string_view chunk_id) const;
    std::size_t size() const { return chunks_.size(); }
    bool empty() const { return chunks_.empty(); }

    const std::string& descriptor() const { return descriptor_; }
    void set_descriptor(std::string d) { descriptor_ = std::move(d); }
    const std::string& embed_model_id() const { return embed_model_id_; }
    std::size_t dimension() const { return dim_; }
    bool has_vectors() const { return dim_ > 0; }
    std::span<const float> vector(std::size_t ordinal) const;
    const Bm25Params& params() const { return params_; }

    /// Below this many chunks the parallel kernels run on one thread.
    static constexpr std::size_t kParallelMinChunks = 2048;

    std::size_t term_count() const { return terms_.size(); }
    std::uint32_t doc_length(std::size_t ordinal) const { return doc_len_.at(ordinal); }
    double average_doc_length() const;

    /// BM25 score of every chunk, term-at-a-time over the postings lists.
    /// Serial reference implementation.
    std::vector<double> bm25_scores_serial(std::span<const std::string> query_tokens) const;
    /// Same scores, OpenMP parallel over blocks of chunks. Bit-identical to
    /// the serial version.
    std::vector<double> bm25_scores(std::span<const std::string> query_tokens) const;

    std::vector<double> cosine_scores_serial(std::span<const float> query) const;
    std::vector<double> cosine_scores(std::span<const float> query) const;

    void save(const std::filesystem::path& dir) const;
    static ChunkIndex load(const std::filesystem::path& dir);

private:
    struct Posting {
        std::uint32_t doc;
        std::uint32_t tf;
    };

    double term_weight(double idf, std::uint32_t tf, std::uint32_t doc_len, double avgdl) const;
    double idf(std::size_t df) const;
    std::optional<std::uint32_t> term_id(std::string_view term) const;

    std::vector<chunker::Chunk> chunks_;
    std::unordered_map<std::string, std::size_t> id_to_ordinal_;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::vector<std::string> terms_;
    std::vector<std::vector<Posting>> postings_;  // by term id, ascending doc
    std::vector<std::uint32_t> doc_len_;
    std::uint64_t total_len_ = 0;
    std::vector<float> vectors_;  // row-major, size() * dim_
    std::size_t dim_ = 0;
    std::string embed_model_id_;
    std::string descriptor_;
    Bm25Params params_;
    std::map<std::string, std::string, std::less<>> sources_;
    std::map<std::string, std::string> labels_;
};

/// Chunk set of a parsed tree, indexed, with the tree's source text
/// registered and its summary as the descriptor.
ChunkIndex build_document_index(const doctree::DocumentTree& tree, llm::Embedder* embedder,
                                const chunker::DedupOptions& dedup = {}, Bm25Params params = {});

/// Ranked BM25 hits: chunks with at least one query term, descending raw
/// score (ties: doc_position, then chunk id), cut to `top_n`, then filtered
/// by min-max normalized score within that pool. A pool whose scores are all
/// equal normalizes to 1.
std::vector<SearchHit> bm25_search(const ChunkIndex& index, std::string_view query, std::size_t top_n = 100,
                                   double min_norm_score = 0.6);

/// Exact cosine ranking over all vectors, no threshold. Throws
/// DimensionMismatch when the query length differs from the index dimension.
std::vector<SearchHit> dense_search(const ChunkIndex& index, std::span<const float> query, std::size_t top_n = 100);

// ---------------------------------------------------------------------------
// Cross-document routing

struct GraphNode {
    std::string descriptor;
    std::optional<std::string> label;
    std::vector<GraphNode> children;
    std::shared_ptr<const ChunkIndex> leaf;
    std::vector<float> descriptor_vector;

    bool is_leaf() const { return leaf != nullptr; }
};

class CorpusGraph {
public:
    CorpusGraph() = default;
    explicit CorpusGraph(GraphNode root) : root_(std::move(root)) {}

    const GraphNode& root() const { return root_; }
    GraphNode& root() { return root_; }
    bool empty() const { return !root_.is_leaf() && root_.children.empty(); }

    /// Embeds every node's descriptor. Throws if a descriptor is empty.
    void embed_descriptors(llm::Embedder& embedder);
    std::size_t leaf_count() const;

private:
    GraphNode root_;
};

struct RouteResult {
    const GraphNode* leaf = nullptr;
    std::size_t comparisons = 0;  // one per level descended
    std::size_t cosine_evaluations = 0;
    std::vector<std::size_t> path;  // child index chosen at each level
};

/// Greedy descent: at each level take the child whose descriptor vector is
/// most similar to the query (ties: lower child index).
RouteResult route_query(const CorpusGraph& graph, std::span<const float> query_vector);

struct LabeledExample {
    chunker::Chunk chunk;
    std::string label;
    double score = 0.0;
};

/// Routes the query, then returns the top_k dense hits of the chosen leaf
/// with their labels (chunk label, else the leaf's label).
std::vector<LabeledExample> cross_document_examples(const CorpusGraph& graph, std::string_view query,
                                                    llm::Embedder& embedder, std::size_t top_k = 3);

double cosine(std::span<const float> a, std::span<const float> b);

}  // namespace clausekit::index
