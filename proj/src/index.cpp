#include "clausekit/index.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

namespace clausekit::index {

ChunkIndex ChunkIndex::build(std::vector<chunker::Chunk> chunks, llm::Embedder* embedder, std::string descriptor,
                             Bm25Params params) {
    ChunkIndex idx;
    idx.params_ = params;
    idx.descriptor_ = std::move(descriptor);
    idx.chunks_ = std::move(chunks);
    idx.doc_len_.reserve(idx.chunks_.size());
    for (std::size_t d = 0; d < idx.chunks_.size(); ++d) {
        const auto& c = idx.chunks_[d];
        if (!idx.id_to_ordinal_.emplace(c.id, d).second)
            throw Error(ErrorCode::invalid_argument, "index", "duplicate chunk id " + c.id);
        const auto tokens = text::tokenize(c.text);
        std::unordered_map<std::uint32_t, std::uint32_t> tf;
        for (const auto& t : tokens) {
            auto [it, inserted] = idx.term_ids_.emplace(t, static_cast<std::uint32_t>(idx.terms_.size()));
            if (inserted) {
                idx.terms_.push_back(t);
                idx.postings_.emplace_back();
            }
            ++tf[it->second];
        }
        std::vector<std::pair<std::uint32_t, std::uint32_t>> sorted(tf.begin(), tf.end());
        std::sort(sorted.begin(), sorted.end());
        for (const auto& [term, count] : sorted) idx.postings_[term].push_back({static_cast<std::uint32_t>(d), count});
        idx.doc_len_.push_back(static_cast<std::uint32_t>(tokens.size()));
        idx.total_len_ += tokens.size();
    }

    if (embedder != nullptr) {
        idx.dim_ = embedder->dimension();
        idx.embed_model_id_ = embedder->model_id();
        std::vector<std::string> texts;
        texts.reserve(idx.chunks_.size());
        for (const auto& c : idx.chunks_) texts.push_back(c.text);
        const auto vecs = texts.empty() ? std::vector<std::vector<float>>{} : embedder->embed(texts);
        if (vecs.size() != texts.size())
            throw Error(ErrorCode::upstream, "embed", "embedder returned wrong number of vectors");
        idx.vectors_.reserve(texts.size() * idx.dim_);
        for (const auto& v : vecs) {
            if (v.size() != idx.dim_) throw Error(ErrorCode::dimension_mismatch, "embed", "embedding has wrong dimension");
            idx.vectors_.insert(idx.vectors_.end(), v.begin(), v.end());
        }
    }
    return idx;
}

void ChunkIndex::add_source(std::string filename, std::string text) { sources_[std::move(filename)] = std::move(text); }

const std::string* ChunkIndex::source(std::string_view filename) const {
    const auto it = sources_.find(filename);
    return it == sources_.end() ? nullptr : &it->second;
}

void ChunkIndex::set_label(const std::string& chunk_id, std::string label) { labels_[chunk_id] = std::move(label); }

std::optional<std::string> ChunkIndex::label(const std::string& chunk_id) const {
    const auto it = labels_.find(chunk_id);
    if (it == labels_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> ChunkIndex::find(std::string_view chunk_id) const {
    const auto it = id_to_ordinal_.find(std::string(chunk_id));
    if (it == id_to_ordinal_.end()) return std::nullopt;
    return it->second;
}

std::span<const float> ChunkIndex::vector(std::size_t ordinal) const {
    return std::span<const float>(vectors_).subspan(ordinal * dim_, dim_);
}

double ChunkIndex::average_doc_length() const {
    return chunks_.empty() ? 0.0 : static_cast<double>(total_len_) / static_cast<double>(chunks_.size());
}

double ChunkIndex::idf(std::size_t df) const {
    const double n = static_cast<double>(chunks_.size());
    const double dfd = static_cast<double>(df);
    return std::log(1.0 + (n - dfd + 0.5) / (dfd + 0.5));
}

double ChunkIndex::term_weight(double idf, std::uint32_t tf, std::uint32_t doc_len, double avgdl) const {
    const double f = static_cast<double>(tf);
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(doc_len) / avgdl);
    return idf * (f * (params_.k1 + 1.0)) / (f + norm);
}

std::optional<std::uint32_t> ChunkIndex::term_id(std::string_view term) const {
    const auto it = term_ids_.find(std::string(term));
    if (it == term_ids_.end()) return std::nullopt;
    return it->second;
}

std::vector<double> ChunkIndex::bm25_scores_serial(std::span<const std::string> query_tokens) const {
    std::vector<double> acc(chunks_.size(), 0.0);
    if (chunks_.empty()) return acc;
    const double avgdl = average_doc_length();
    for (const auto& tok : query_tokens) {
        const auto t = term_id(tok);
        if (!t) continue;
        const auto& list = postings_[*t];
        const double w = idf(list.size());
        for (const auto& p : list) acc[p.doc] += term_weight(w, p.tf, doc_len_[p.doc], avgdl);
    }
    return acc;
}

std::vector<double> ChunkIndex::bm25_scores(std::span<const std::string> query_tokens) const {
    std::vector<double> acc(chunks_.size(), 0.0);
    if (chunks_.empty()) return acc;
    const double avgdl = average_doc_length();
    struct QueryTerm {
        std::uint32_t id;
        double idf;
    };
    std::vector<QueryTerm> terms;
    for (const auto& tok : query_tokens)
        if (const auto t = term_id(tok)) terms.push_back({*t, idf(postings_[*t].size())});
    if (terms.empty()) return acc;

    // Each block of chunks walks the postings of every query term in query
    // order, so each chunk accumulates in the same order as the serial kernel.
    const std::size_t n = chunks_.size();
    const auto blocks = static_cast<std::int64_t>(std::min<std::size_t>(n, 4 * static_cast<std::size_t>(omp_get_max_threads())));
#pragma omp parallel for schedule(dynamic) if (n >= kParallelMinChunks)
    for (std::int64_t b = 0; b < blocks; ++b) {
        const std::size_t lo = n * static_cast<std::size_t>(b) / static_cast<std::size_t>(blocks);
        const std::size_t hi = n * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(blocks);
        for (const auto& q : terms) {
            const auto& list = postings_[q.id];
            auto it = std::lower_bound(list.begin(), list.end(), lo,
                                       [](const Posting& p, std::size_t d) { return p.doc < d; });
            for (; it != list.end() && it->doc < hi; ++it)
                acc[it->doc] += term_weight(q.idf, it->tf, doc_len_[it->doc], avgdl);
        }
    }
    return acc;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
        nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> ChunkIndex::cosine_scores_serial(std::span<const float> query) const {
    std::vector<double> out(chunks_.size(), 0.0);
    for (std::size_t d = 0; d < chunks_.size(); ++d) out[d] = cosine(query, vector(d));
    return out;
}

std::vector<double> ChunkIndex::cosine_scores(std::span<const float> query) const {
    std::vector<double> out(chunks_.size(), 0.0);
    const auto n = static_cast<std::int64_t>(chunks_.size());
#pragma omp parallel for schedule(static) if (chunks_.size() >= kParallelMinChunks)
    for (std::int64_t d = 0; d < n; ++d) out[static_cast<std::size_t>(d)] = cosine(query, vector(static_cast<std::size_t>(d)));
    return out;
}

namespace {

void rank_hits(const ChunkIndex& index, std::vector<SearchHit>& hits) {
    const auto& chunks = index.chunks();
    std::sort(hits.begin(), hits.end(), [&](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        const auto pa = chunks[a.ordinal].doc_position;
        const auto pb = chunks[b.ordinal].doc_position;
        if (pa != pb) return pa < pb;
        return a.chunk_id < b.chunk_id;
    });
}

}  // namespace

std::vector<SearchHit> bm25_search(const ChunkIndex& index, std::string_view query, std::size_t top_n,
                                   double min_norm_score) {
    if (top_n < 1) throw Error(ErrorCode::invalid_argument, "bm25", "top_n must be >= 1");
    if (!(min_norm_score >= 0.0 && min_norm_score <= 1.0))
        throw Error(ErrorCode::invalid_argument, "bm25", "min_norm_score must be in [0, 1]");
    if (index.empty()) return {};
    const auto tokens = text::tokenize(query);
    const auto scores = index.bm25_scores(tokens);
    std::vector<SearchHit> hits;
    for (std::size_t d = 0; d < scores.size(); ++d)
        if (scores[d] > 0.0) hits.push_back({index.chunks()[d].id, d, scores[d]});
    rank_hits(index, hits);
    if (hits.size() > top_n) hits.resize(top_n);
    if (hits.empty() || min_norm_score <= 0.0) return hits;
    const double hi = hits.front().score;
    const double lo = hits.back().score;
    if (hi == lo) return hits;
    std::vector<SearchHit> kept;
    for (auto& h : hits)
        if ((h.score - lo) / (hi - lo) >= min_norm_score) kept.push_back(std::move(h));
    return kept;
}

std::vector<SearchHit> dense_search(const ChunkIndex& index, std::span<const float> query, std::size_t top_n) {
    if (top_n < 1) throw Error(ErrorCode::invalid_argument, "dense", "top_n must be >= 1");
    if (index.empty()) return {};
    if (!index.has_vectors()) throw Error(ErrorCode::dimension_mismatch, "dense", "index has no vectors");
    if (query.size() != index.dimension())
        throw Error(ErrorCode::dimension_mismatch, "dense",
                    "query dimension " + std::to_string(query.size()) + " != index dimension " +
                        std::to_string(index.dimension()));
    const auto scores = index.cosine_scores(query);
    std::vector<SearchHit> hits;
    hits.reserve(scores.size());
    for (std::size_t d = 0; d < scores.size(); ++d) hits.push_back({index.chunks()[d].id, d, scores[d]});
    rank_hits(index, hits);
    if (hits.size() > top_n) hits.resize(top_n);
    return hits;
}

ChunkIndex build_document_index(const doctree::DocumentTree& tree, llm::Embedder* embedder,
                                const chunker::DedupOptions& dedup, Bm25Params params) {
    auto index = ChunkIndex::build(chunker::assemble_chunk_set(tree, dedup), embedder, tree.summary.value_or(tree.filename), params);
    index.add_source(tree.filename, tree.source_text);
    return index;
}

}  // namespace clausekit::index
