// Serial vs OpenMP scoring kernels, plus a full benchmark run.

#include "clausekit/eval.hpp"
#include "clausekit/index.hpp"

#include <benchmark/benchmark.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace clausekit;

namespace {

std::vector<chunker::Chunk> random_chunks(std::size_t n) {
    std::mt19937 rng(11);
    std::vector<chunker::Chunk> out;
    for (std::size_t i = 0; i < n; ++i) {
        chunker::Chunk c;
        c.id = "c" + std::to_string(i);
        for (std::size_t t = 0, len = 20 + rng() % 200; t < len; ++t) c.text += "w" + std::to_string(rng() % 5000) + " ";
        c.doc_position = i;
        out.push_back(std::move(c));
    }
    return out;
}

struct Fixture {
    llm::HashEmbedder emb{256};
    index::ChunkIndex idx;
    std::vector<std::string> query{"w1", "w17", "w256", "w999", "w4000"};
    std::vector<float> qvec;

    explicit Fixture(std::size_t n) : idx(index::ChunkIndex::build(random_chunks(n), &emb)) {
        qvec = emb.embed_one("w1 w17 w256");
    }
};

Fixture& fixture(std::size_t n) {
    static std::map<std::size_t, std::unique_ptr<Fixture>> cache;
    auto& f = cache[n];
    if (!f) f = std::make_unique<Fixture>(n);
    return *f;
}

void BM_Bm25Serial(benchmark::State& s) {
    auto& f = fixture(s.range(0));
    for (auto _ : s) benchmark::DoNotOptimize(f.idx.bm25_scores_serial(f.query));
}

void BM_Bm25Parallel(benchmark::State& s) {
    auto& f = fixture(s.range(0));
    for (auto _ : s) benchmark::DoNotOptimize(f.idx.bm25_scores(f.query));
}

void BM_CosineSerial(benchmark::State& s) {
    auto& f = fixture(s.range(0));
    for (auto _ : s) benchmark::DoNotOptimize(f.idx.cosine_scores_serial(f.qvec));
}

void BM_CosineParallel(benchmark::State& s) {
    auto& f = fixture(s.range(0));
    for (auto _ : s) benchmark::DoNotOptimize(f.idx.cosine_scores(f.qvec));
}

std::filesystem::path planted_corpus(std::size_t docs) {
    const auto dir = std::filesystem::temp_directory_path() / "clausekit-bench-corpus";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir / "documents");
    std::ofstream cases(dir / "cases.jsonl");
    std::mt19937 rng(3);
    for (std::size_t d = 0; d < docs; ++d) {
        std::string text = "AGREEMENT " + std::to_string(d) + "\n\n";
        std::size_t start = 0, end = 0;
        for (int a = 1; a <= 12; ++a) {
            text += std::to_string(a) + ". ARTICLE\n";
            for (int c = 1; c <= 6; ++c) {
                if (a == 7 && c == 3) start = text.size();
                text += std::to_string(a) + "." + std::to_string(c) + " The party shall";
                for (int t = 0; t < 25; ++t) text += " w" + std::to_string(rng() % 3000);
                if (a == 7 && c == 3) {
                    text += " marker" + std::to_string(d);
                    end = text.size() + 1;
                }
                text += ".\n";
            }
        }
        const auto name = "doc" + std::to_string(d) + ".txt";
        std::ofstream(dir / "documents" / name) << text;
        cases << R"({"case_id":"c)" << d << R"(","query":"marker)" << d << R"(","document_id":")" << name
              << R"(","spans":[[)" << start << "," << end << "]]}\n";
    }
    return dir;
}

void BM_Benchmark(benchmark::State& s) {
    static const auto dir = planted_corpus(32);
    llm::HashEmbedder emb(256);
    llm::LexicalReranker rr;
    eval::PipelineConfig cfg;
    cfg.embedder = &emb;
    cfg.reranker = &rr;
    cfg.retrieval.optimize_query = false;
    cfg.parallel = s.range(0) != 0;
    const std::vector<std::size_t> grid{1, 2, 4, 8};
    for (auto _ : s) benchmark::DoNotOptimize(eval::run_benchmark(dir, cfg, grid));
}

}  // namespace

BENCHMARK(BM_Bm25Serial)->Arg(1000)->Arg(20000);
BENCHMARK(BM_Bm25Parallel)->Arg(1000)->Arg(20000);
BENCHMARK(BM_CosineSerial)->Arg(1000)->Arg(20000);
BENCHMARK(BM_CosineParallel)->Arg(1000)->Arg(20000);
BENCHMARK(BM_Benchmark)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
