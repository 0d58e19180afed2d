#include "clausekit/index.hpp"

namespace clausekit::index {
namespace {

void embed_node(GraphNode& node, llm::Embedder& embedder) {
    if (text::is_blank(node.descriptor))
        throw Error(ErrorCode::invalid_argument, "corpus_graph", "every graph node needs a descriptor");
    node.descriptor_vector = embedder.embed_one(node.descriptor);
    for (auto& c : node.children) embed_node(c, embedder);
}

std::size_t count_leaves(const GraphNode& node) {
    if (node.is_leaf()) return 1;
    std::size_t n = 0;
    for (const auto& c : node.children) n += count_leaves(c);
    return n;
}

}  // namespace

void CorpusGraph::embed_descriptors(llm::Embedder& embedder) { embed_node(root_, embedder); }

std::size_t CorpusGraph::leaf_count() const { return count_leaves(root_); }

RouteResult route_query(const CorpusGraph& graph, std::span<const float> query_vector) {
    if (graph.empty()) throw Error(ErrorCode::empty_graph, "route", "corpus graph has no entries");
    RouteResult result;
    const GraphNode* cur = &graph.root();
    while (!cur->is_leaf()) {
        if (cur->children.empty()) throw Error(ErrorCode::empty_graph, "route", "sub-graph without entries");
        std::size_t best = 0;
        double best_score = -2.0;
        for (std::size_t i = 0; i < cur->children.size(); ++i) {
            const auto& child = cur->children[i];
            if (child.descriptor_vector.size() != query_vector.size())
                throw Error(ErrorCode::dimension_mismatch, "route", "descriptor not embedded with the query's model");
            const double s = cosine(query_vector, child.descriptor_vector);
            ++result.cosine_evaluations;
            if (s > best_score) {
                best_score = s;
                best = i;
            }
        }
        ++result.comparisons;
        result.path.push_back(best);
        cur = &cur->children[best];
    }
    result.leaf = cur;
    return result;
}

std::vector<LabeledExample> cross_document_examples(const CorpusGraph& graph, std::string_view query,
                                                    llm::Embedder& embedder, std::size_t top_k) {
    const auto qv = embedder.embed_one(query);
    const auto route = route_query(graph, qv);
    const auto& leaf = *route.leaf;
    const auto hits = dense_search(*leaf.leaf, qv, std::max<std::size_t>(1, top_k));
    std::vector<LabeledExample> out;
    for (const auto& h : hits) {
        LabeledExample ex;
        ex.chunk = leaf.leaf->chunks()[h.ordinal];
        ex.label = leaf.leaf->label(h.chunk_id).value_or(leaf.label.value_or(""));
        ex.score = h.score;
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace clausekit::index
