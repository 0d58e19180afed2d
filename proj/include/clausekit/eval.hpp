#pragma once

#include "clausekit/doctree.hpp"
#include "clausekit/retrieval.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace clausekit::eval {

struct BenchmarkCase {
    std::string case_id;
    std::string query;
    std::string document_id;
    std::vector<Span> ground_truth;  // sorted, merged, half-open byte ranges
};

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

inline const std::vector<std::size_t> kDefaultKGrid{1, 2, 4, 8, 16, 32, 64};

/// Sorts and merges overlapping or touching spans. Returns true in `merged`
/// when anything was combined.
std::vector<Span> normalize_spans(std::vector<Span> spans, bool* merged = nullptr);

/// Character overlap over the union of the top-k retrieved spans. Throws
/// EmptyGroundTruth, or invalid_argument when k is 0.
PrecisionRecall char_pr_at_k(std::span<const Span> retrieved, std::span<const Span> truth, std::size_t k);

/// Hit-based: precision = retrieved spans among the top k that overlap any
/// truth span / min(k, retrieved); recall = truth spans overlapped by any of
/// the top k / truth spans.
PrecisionRecall span_pr_at_k(std::span<const Span> retrieved, std::span<const Span> truth, std::size_t k);

/// Retrieval that returns the ground truth itself.
std::vector<Span> perfect_oracle(const BenchmarkCase& c);

/// Sum of span lengths among the top k (no overlap removal).
std::size_t chars_at_k(std::span<const Span> retrieved, std::size_t k);

/// Mean chars_at_k across result lists, one value per k. Empty input -> 0s.
std::vector<double> char_volume_stats(const std::vector<std::vector<Span>>& results, std::span<const std::size_t> k_grid);

struct LoadedCases {
    std::vector<BenchmarkCase> cases;
    std::vector<std::string> warnings;
};

/// cases.jsonl: {"case_id", "query", "document_id", "spans": [[start, end], ...]}.
/// Overlapping truth spans are merged with a warning.
LoadedCases load_cases(const std::filesystem::path& cases_jsonl);

/// <corpus>/documents/<id> if present, else <corpus>/<id>.
std::filesystem::path document_path(const std::filesystem::path& corpus_dir, const std::string& document_id);

struct Corpus {
    std::filesystem::path dir;
    std::vector<BenchmarkCase> cases;
    std::map<std::string, std::string> documents;  // document_id -> text
    std::vector<std::string> warnings;
};

/// Loads cases.jsonl and every referenced document. Throws not_found when
/// the directory or case file is missing, invalid_argument when it has no
/// cases.
Corpus load_corpus(const std::filesystem::path& corpus_dir);

/// Produces ranked spans for one case. The default runs the retrieval
/// pipeline over the document's index.
using Retriever = std::function<std::vector<Span>(const BenchmarkCase&, const index::ChunkIndex&)>;

struct PipelineConfig {
    doctree::ParseOptions parse;
    retrieval::RetrievalConfig retrieval;
    llm::Embedder* embedder = nullptr;  // required by the default retriever
    llm::Reranker* reranker = nullptr;  // required by the default retriever
    llm::AccountedChat* query_chat = nullptr;
    llm::AccountedChat* filter_chat = nullptr;
    Retriever retriever;  // overrides the pipeline when set
    bool parallel = true;
};

struct MetricsRow {
    std::size_t k = 0;
    double precision_char = 0.0;
    double recall_char = 0.0;
    double precision_span = 0.0;
    double recall_span = 0.0;
    double avg_chars_retrieved = 0.0;
};

struct CaseFailure {
    std::string case_id;
    std::string code;
    std::string stage;
    std::string message;
};

struct MetricsReport {
    std::vector<MetricsRow> rows;  // one per k
    std::size_t cases_total = 0;
    std::size_t cases_scored = 0;
    std::vector<CaseFailure> failures;
    std::vector<std::string> warnings;
};

/// Scores precomputed rankings (retrieved[i] belongs to cases[i]).
MetricsReport score_cases(const std::vector<BenchmarkCase>& cases, const std::vector<std::vector<Span>>& retrieved,
                          std::span<const std::size_t> k_grid);

/// Indexes each document, retrieves for each case and scores. Case errors
/// are collected in `failures`; aggregation runs in case order.
MetricsReport run_benchmark(const Corpus& corpus, const PipelineConfig& config, std::span<const std::size_t> k_grid);
MetricsReport run_benchmark(const std::filesystem::path& corpus_dir, const PipelineConfig& config,
                            std::span<const std::size_t> k_grid);

/// k rows, fixed 6-decimal values.
std::string metrics_csv(const MetricsReport& report);
std::string metrics_json(const MetricsReport& report, int indent = 2);
/// Writes metrics.csv and metrics.json into `out_dir`.
void write_metrics(const MetricsReport& report, const std::filesystem::path& out_dir);

/// Parses "1,2,4" into a sorted, deduplicated grid. Throws invalid_argument.
std::vector<std::size_t> parse_k_grid(std::string_view spec);

}  // namespace clausekit::eval
