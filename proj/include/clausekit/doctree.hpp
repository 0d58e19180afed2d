#pragma once

#include "clausekit/llm.hpp"
#include "clausekit/text.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clausekit::doctree {

enum class NodeKind { root, title, clause, paragraph, list_item };
std::string_view to_string(NodeKind kind);

enum class ParseMode { structural, fallback_flat };
std::string_view to_string(ParseMode mode);

using NodeId = std::size_t;
inline constexpr NodeId kRootId = 0;

/// Which cue produced a boundary. Determines nesting precedence:
/// numbering > headings > indentation.
enum class Cue {
    none,          // unlabeled paragraph block
    decimal,       // 1.  1.1  1.1.2  Section 4.2  Article 3  I.  II.
    alpha,         // (a)  a)  (B)
    roman,         // (i)  (iv)  ii)
    heading,       // markdown "#" or ALL-CAPS line
};

struct SectionBoundary {
    Span span;            // covers the section's own text up to the next boundary
    NodeKind kind = NodeKind::paragraph;
    std::string label;    // numbering token as written, or heading text
    Cue cue = Cue::none;
    int level = 0;        // numbering components, heading level, or indent columns
    std::vector<int> numbers;  // decimal components; empty otherwise
};

struct SectionNode {
    NodeId id = kRootId;
    NodeKind kind = NodeKind::root;
    std::string label;
    std::string text;  // own text, excluding descendants
    Span span;         // own text extent in the source
    std::size_t depth = 0;
    std::optional<NodeId> parent;
    std::vector<NodeId> children;
};

struct DocumentTree {
    NodeId root = kRootId;
    std::vector<SectionNode> nodes;  // indexed by id; ids ascend in document order
    std::string filename;
    std::string source_text;
    std::optional<std::string> summary;
    ParseMode parse_mode = ParseMode::fallback_flat;
    std::vector<std::string> warnings;

    const SectionNode& node(NodeId id) const { return nodes.at(id); }
    std::size_t size() const { return nodes.size(); }

    /// Ancestors of `id` from the root's first child down to the parent.
    std::vector<NodeId> ancestors(NodeId id) const;
    /// Strict descendants of `id` in document order.
    std::vector<NodeId> descendants(NodeId id) const;
};

struct ParseOptions {
    bool numbering = true;
    bool headings = true;
    bool indentation = true;
    /// Blank-line separated blocks without a cue become paragraph nodes.
    bool paragraphs = true;
    std::size_t fallback_chunk_chars = 1000;
    /// Boundaries with a numbering/heading cue needed for a structural parse.
    std::size_t min_structural_sections = 2;
};

std::vector<SectionBoundary> detect_sections(std::string_view text, const ParseOptions& options = {});

/// Nests each boundary under the nearest open section of strictly shallower
/// structural depth. Incoherent numbering is attached as a sibling under the
/// last coherent ancestor and reported in `warnings`.
DocumentTree build_hierarchy(const std::vector<SectionBoundary>& boundaries, std::string_view text);

DocumentTree parse_document(std::string_view raw, std::string filename, const ParseOptions& options = {});

/// Zero-shot structural parse through a chat model (one llm_parse call).
/// Falls back to the rule-based parse, with a warning, when the model's
/// answer cannot be aligned to the text.
DocumentTree parse_document_llm(std::string_view raw, std::string filename, llm::AccountedChat& chat,
                                const ParseOptions& options = {});

struct SummarizeOutcome {
    DocumentTree tree;
    std::optional<Error> error;
};

/// Adds a contract-level summary with exactly one summarize call. On upstream
/// failure the tree comes back unchanged and the error is reported.
SummarizeOutcome summarize_document(DocumentTree tree, llm::AccountedChat& chat);

/// Structural checks: single rooted tree, depth = parent depth + 1, sibling
/// spans ascending and disjoint, root depth 0 with empty label. Returns the
/// first violation, or nullopt.
std::optional<std::string> validate(const DocumentTree& tree);

/// Node texts joined in document order, whitespace-normalized.
std::string normalized_concatenation(const DocumentTree& tree);

/// JSON with a stable field order:
/// {"filename","parse_mode","summary","warnings","nodes":[{id,kind,label,start,end,depth,parent}]}
std::string to_json(const DocumentTree& tree, int indent = -1);
DocumentTree tree_from_json(std::string_view json, std::string source_text);

}  // namespace clausekit::doctree
