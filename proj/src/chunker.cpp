#include "clausekit/chunker.hpp"

#include <json.hpp>

#include <cmath>
#include <unordered_set>

namespace clausekit::chunker {
namespace {

using doctree::DocumentTree;
using doctree::NodeId;

std::string path_label(const doctree::SectionNode& n) {
    return n.label.empty() ? std::string(doctree::to_string(n.kind)) : n.label;
}

std::string_view short_kind(ChunkKind k) {
    switch (k) {
        case ChunkKind::node_level: return "node";
        case ChunkKind::ancestor_aware: return "anc";
        case ChunkKind::descendant_aware: return "desc";
    }
    return "node";
}

Chunk base_chunk(const DocumentTree& tree, NodeId id, ChunkKind kind) {
    const auto& n = tree.node(id);
    Chunk c;
    c.kind = kind;
    c.id = tree.filename + "#" + std::to_string(id) + "/" + std::string(short_kind(kind));
    c.core_span = n.span;
    for (NodeId a : tree.ancestors(id)) c.node_path.push_back(path_label(tree.node(a)));
    c.node_path.push_back(path_label(n));
    c.doc_position = id;
    c.filename = tree.filename;
    c.summary = tree.summary.value_or("");
    return c;
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
        dot += double(a[i]) * b[i];
        na += double(a[i]) * a[i];
        nb += double(b[i]) * b[i];
    }
    if (na == 0 || nb == 0) return 0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

std::string_view to_string(ChunkKind kind) {
    switch (kind) {
        case ChunkKind::node_level: return "node_level";
        case ChunkKind::ancestor_aware: return "ancestor_aware";
        case ChunkKind::descendant_aware: return "descendant_aware";
    }
    return "node_level";
}

std::optional<ChunkKind> kind_from_string(std::string_view s) {
    if (s == "node_level") return ChunkKind::node_level;
    if (s == "ancestor_aware") return ChunkKind::ancestor_aware;
    if (s == "descendant_aware") return ChunkKind::descendant_aware;
    return std::nullopt;
}

std::vector<Chunk> make_chunks(const DocumentTree& tree, ChunkKind kind) {
    std::vector<Chunk> out;
    for (const auto& n : tree.nodes) {
        if (n.id == tree.root || text::is_blank(n.text)) continue;
        Chunk c = base_chunk(tree, n.id, kind);
        switch (kind) {
            case ChunkKind::node_level:
                c.text = n.text;
                break;
            case ChunkKind::ancestor_aware:
                for (NodeId a : tree.ancestors(n.id)) {
                    if (text::is_blank(tree.node(a).text)) continue;
                    c.text += tree.node(a).text;
                    c.text += '\n';
                }
                c.text += n.text;
                break;
            case ChunkKind::descendant_aware:
                c.text = n.text;
                for (NodeId d : tree.descendants(n.id)) {
                    if (text::is_blank(tree.node(d).text)) continue;
                    c.text += '\n';
                    c.text += tree.node(d).text;
                }
                break;
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<Chunk> dedup(std::vector<Chunk> chunks, const DedupOptions& options) {
    std::unordered_set<std::string> seen;
    std::vector<Chunk> kept;
    std::vector<std::vector<float>> kept_vectors;
    const bool near = options.cosine_threshold && options.embedder != nullptr;
    for (auto& c : chunks) {
        if (!seen.insert(text::normalize_for_dedup(c.text)).second) continue;
        if (near) {
            auto v = options.embedder->embed_one(c.text);
            bool similar = false;
            for (const auto& k : kept_vectors) {
                if (cosine(v, k) >= *options.cosine_threshold) {
                    similar = true;
                    break;
                }
            }
            if (similar) continue;
            kept_vectors.push_back(std::move(v));
        }
        kept.push_back(std::move(c));
    }
    return kept;
}

std::vector<Chunk> assemble_chunk_set(const DocumentTree& tree, const DedupOptions& options) {
    auto node = make_chunks(tree, ChunkKind::node_level);
    auto anc = make_chunks(tree, ChunkKind::ancestor_aware);
    auto desc = make_chunks(tree, ChunkKind::descendant_aware);
    // Each list is already in document order; interleave per position.
    std::vector<Chunk> merged;
    merged.reserve(node.size() * 3);
    for (std::size_t i = 0; i < node.size(); ++i) {
        merged.push_back(std::move(node[i]));
        merged.push_back(std::move(anc[i]));
        merged.push_back(std::move(desc[i]));
    }
    return dedup(std::move(merged), options);
}

std::string to_jsonl(const std::vector<Chunk>& chunks) {
    std::string out;
    for (const auto& c : chunks) {
        nlohmann::ordered_json j;
        j["id"] = c.id;
        j["kind"] = to_string(c.kind);
        j["text"] = c.text;
        j["core_start"] = c.core_span.start;
        j["core_end"] = c.core_span.end;
        j["node_path"] = c.node_path;
        j["doc_position"] = c.doc_position;
        j["filename"] = c.filename;
        j["summary"] = c.summary;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<Chunk> from_jsonl(std::string_view jsonl) {
    std::vector<Chunk> out;
    for (const auto& line : text::split_lines(jsonl)) {
        if (text::is_blank(line)) continue;
        const auto j = nlohmann::json::parse(line);
        Chunk c;
        c.id = j.at("id").get<std::string>();
        const auto kind = kind_from_string(j.at("kind").get<std::string>());
        if (!kind) throw Error(ErrorCode::io, "chunks", "unknown chunk kind in " + c.id);
        c.kind = *kind;
        c.text = j.at("text").get<std::string>();
        c.core_span = {j.at("core_start").get<std::size_t>(), j.at("core_end").get<std::size_t>()};
        c.node_path = j.at("node_path").get<std::vector<std::string>>();
        c.doc_position = j.at("doc_position").get<std::size_t>();
        c.filename = j.at("filename").get<std::string>();
        c.summary = j.at("summary").get<std::string>();
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace clausekit::chunker
