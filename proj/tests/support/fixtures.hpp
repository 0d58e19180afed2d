#pragma once

#include "clausekit/eval.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fixtures {

/// Numbered contract (ALL-CAPS title, "1." articles, "1.1" clauses, "(a)"
/// items, free paragraphs). Deterministic in `seed`.
std::string synthetic_contract(unsigned seed);

/// Prose without any structural cue. About `approx_chars` bytes, ASCII.
std::string unstructured_text(unsigned seed, std::size_t approx_chars);

/// Ten contracts, each with one clause that alone matches its query.
struct PlantedCorpus {
    std::map<std::string, std::string> documents;  // id -> text
    std::vector<clausekit::eval::BenchmarkCase> cases;
};
PlantedCorpus planted_corpus();

/// Writes cases.jsonl and documents/<id> under `dir`.
void write_corpus(const PlantedCorpus& corpus, const std::filesystem::path& dir);

/// A valid six-section report with sources 1 and 2.
std::string report_markdown();

/// Report whose answer reads "appears to be **ENTAILMENT** with specific conditions".
std::string nli_report_markdown();

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

}  // namespace fixtures
