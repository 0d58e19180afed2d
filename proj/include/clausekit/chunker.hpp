#pragma once

#include "clausekit/doctree.hpp"
#include "clausekit/llm.hpp"
#include "clausekit/text.hpp"

#include <optional>
#include <string>
#include <vector>

namespace clausekit::chunker {

/// Declaration order is the tie-break order within one document position.
enum class ChunkKind { node_level, ancestor_aware, descendant_aware };
std::string_view to_string(ChunkKind kind);
std::optional<ChunkKind> kind_from_string(std::string_view s);

struct Chunk {
    std::string id;
    ChunkKind kind = ChunkKind::node_level;
    std::string text;       // contextualized text that gets indexed
    Span core_span;         // always the originating node's span
    std::vector<std::string> node_path;  // ancestor labels, then the node's own
    std::size_t doc_position = 0;        // originating node id
    std::string filename;
    std::string summary;
};

std::vector<Chunk> make_chunks(const doctree::DocumentTree& tree, ChunkKind kind);

struct DedupOptions {
    /// When set, a chunk is also dropped if its embedding has cosine >= this
    /// with an already kept chunk. Off by default.
    std::optional<double> cosine_threshold;
    llm::Embedder* embedder = nullptr;
};

/// Drops chunks whose whitespace/case-normalized text repeats an earlier one
/// (and near-duplicates when enabled). Keeps the first occurrence.
std::vector<Chunk> dedup(std::vector<Chunk> chunks, const DedupOptions& options = {});

/// All three kinds merged, ordered by (doc_position, kind), deduplicated.
std::vector<Chunk> assemble_chunk_set(const doctree::DocumentTree& tree, const DedupOptions& options = {});

/// One JSON object per line, LF terminated:
/// {id, kind, text, core_start, core_end, node_path, doc_position, filename, summary}
std::string to_jsonl(const std::vector<Chunk>& chunks);
std::vector<Chunk> from_jsonl(std::string_view jsonl);

}  // namespace clausekit::chunker
