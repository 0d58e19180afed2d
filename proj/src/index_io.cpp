// On-disk index layout (one directory):
//
//   chunks.jsonl   chunk records, see chunker::to_jsonl
//   sources.jsonl  {"filename", "text"} per source document
//   postings.bin   little-endian:
//                    char[4] "CKPB", u32 version (1), u32 num_docs, u32 num_terms
//                    u32 doc_len[num_docs]
//                    num_terms x { u32 term_bytes, u8 term[term_bytes], u32 df,
//                                  df x { u32 doc_delta, u32 tf } }
//                  terms sorted bytewise; doc_delta is the gap to the previous
//                  doc id in the list (the first entry stores the doc id).
//   vectors.f32    num_docs x dim float32, row-major, little-endian
//   meta.json      {format_version, dim, embed_model_id, descriptor,
//                   chunk_count, term_count, k1, b, labels}
#include "clausekit/index.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace clausekit::index {
namespace {

namespace fs = std::filesystem;

constexpr char kMagic[4] = {'C', 'K', 'P', 'B'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
public:
    explicit Reader(std::string data) : data_(std::move(data)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw Error(ErrorCode::io, "index", "postings.bin is truncated");
    }
    std::string data_;
    std::size_t pos_ = 0;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "index", "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& data) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "index", "cannot write " + p.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::io, "index", "short write to " + p.string());
}

std::uint32_t float_bits(float f) { return std::bit_cast<std::uint32_t>(f); }
float bits_float(std::uint32_t u) { return std::bit_cast<float>(u); }

}  // namespace

void ChunkIndex::save(const fs::path& dir) const {
    fs::create_directories(dir);
    write_file(dir / "chunks.jsonl", chunker::to_jsonl(chunks_));

    std::string sources;
    for (const auto& [name, text] : sources_) {
        nlohmann::ordered_json j;
        j["filename"] = name;
        j["text"] = text;
        sources += j.dump();
        sources += '\n';
    }
    write_file(dir / "sources.jsonl", sources);

    std::string bin(kMagic, 4);
    put_u32(bin, kVersion);
    put_u32(bin, static_cast<std::uint32_t>(chunks_.size()));
    put_u32(bin, static_cast<std::uint32_t>(terms_.size()));
    for (auto len : doc_len_) put_u32(bin, len);
    std::vector<std::uint32_t> order(terms_.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return terms_[a] < terms_[b]; });
    for (auto t : order) {
        put_u32(bin, static_cast<std::uint32_t>(terms_[t].size()));
        bin += terms_[t];
        put_u32(bin, static_cast<std::uint32_t>(postings_[t].size()));
        std::uint32_t prev = 0;
        for (const auto& p : postings_[t]) {
            put_u32(bin, p.doc - prev);
            put_u32(bin, p.tf);
            prev = p.doc;
        }
    }
    write_file(dir / "postings.bin", bin);

    std::string vecs;
    vecs.reserve(vectors_.size() * 4);
    for (float f : vectors_) put_u32(vecs, float_bits(f));
    write_file(dir / "vectors.f32", vecs);

    nlohmann::ordered_json meta;
    meta["format_version"] = kVersion;
    meta["dim"] = dim_;
    meta["embed_model_id"] = embed_model_id_;
    meta["descriptor"] = descriptor_;
    meta["chunk_count"] = chunks_.size();
    meta["term_count"] = terms_.size();
    meta["k1"] = params_.k1;
    meta["b"] = params_.b;
    meta["labels"] = labels_;
    write_file(dir / "meta.json", meta.dump(2) + "\n");
}

ChunkIndex ChunkIndex::load(const fs::path& dir) {
    ChunkIndex idx;
    const auto meta = nlohmann::json::parse(read_file(dir / "meta.json"));
    if (meta.at("format_version").get<std::uint32_t>() != kVersion)
        throw Error(ErrorCode::io, "index", "unsupported index format version");
    idx.dim_ = meta.at("dim").get<std::size_t>();
    idx.embed_model_id_ = meta.at("embed_model_id").get<std::string>();
    idx.descriptor_ = meta.at("descriptor").get<std::string>();
    idx.params_.k1 = meta.at("k1").get<double>();
    idx.params_.b = meta.at("b").get<double>();
    idx.labels_ = meta.value("labels", std::map<std::string, std::string>{});

    idx.chunks_ = chunker::from_jsonl(read_file(dir / "chunks.jsonl"));
    for (std::size_t d = 0; d < idx.chunks_.size(); ++d) idx.id_to_ordinal_.emplace(idx.chunks_[d].id, d);
    if (idx.chunks_.size() != meta.at("chunk_count").get<std::size_t>())
        throw Error(ErrorCode::io, "index", "chunk count does not match meta.json");

    if (fs::exists(dir / "sources.jsonl")) {
        for (const auto& line : text::split_lines(read_file(dir / "sources.jsonl"))) {
            if (text::is_blank(line)) continue;
            const auto j = nlohmann::json::parse(line);
            idx.sources_[j.at("filename").get<std::string>()] = j.at("text").get<std::string>();
        }
    }

    Reader r(read_file(dir / "postings.bin"));
    if (r.bytes(4) != std::string(kMagic, 4)) throw Error(ErrorCode::io, "index", "postings.bin has a bad magic");
    if (r.u32() != kVersion) throw Error(ErrorCode::io, "index", "unsupported postings version");
    const auto num_docs = r.u32();
    const auto num_terms = r.u32();
    if (num_docs != idx.chunks_.size()) throw Error(ErrorCode::io, "index", "postings doc count mismatch");
    for (std::uint32_t d = 0; d < num_docs; ++d) {
        idx.doc_len_.push_back(r.u32());
        idx.total_len_ += idx.doc_len_.back();
    }
    for (std::uint32_t t = 0; t < num_terms; ++t) {
        std::string term = r.bytes(r.u32());
        const auto df = r.u32();
        std::vector<Posting> list;
        list.reserve(df);
        std::uint32_t doc = 0;
        for (std::uint32_t i = 0; i < df; ++i) {
            doc += r.u32();
            const auto tf = r.u32();
            if (doc >= num_docs) throw Error(ErrorCode::io, "index", "posting references unknown doc");
            list.push_back({doc, tf});
        }
        idx.term_ids_.emplace(term, t);
        idx.terms_.push_back(std::move(term));
        idx.postings_.push_back(std::move(list));
    }
    if (!r.done()) throw Error(ErrorCode::io, "index", "trailing bytes in postings.bin");

    const std::string vecs = read_file(dir / "vectors.f32");
    if (vecs.size() != idx.dim_ * idx.chunks_.size() * 4)
        throw Error(ErrorCode::io, "index", "vectors.f32 size does not match dim x chunk_count");
    idx.vectors_.resize(idx.dim_ * idx.chunks_.size());
    for (std::size_t i = 0; i < idx.vectors_.size(); ++i) {
        std::uint32_t u = 0;
        for (int k = 0; k < 4; ++k) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(vecs[i * 4 + k])) << (8 * k);
        idx.vectors_[i] = bits_float(u);
    }
    return idx;
}

}  // namespace clausekit::index
