#include "clausekit/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace clausekit::eval {
namespace {

std::size_t union_length(const std::vector<Span>& merged) {
    std::size_t n = 0;
    for (const auto& s : merged) n += s.length();
    return n;
}

// Both inputs sorted and disjoint.
std::size_t intersection_length(const std::vector<Span>& a, const std::vector<Span>& b) {
    std::size_t i = 0, j = 0, n = 0;
    while (i < a.size() && j < b.size()) {
        const std::size_t lo = std::max(a[i].start, b[j].start);
        const std::size_t hi = std::min(a[i].end, b[j].end);
        if (hi > lo) n += hi - lo;
        if (a[i].end < b[j].end) ++i;
        else ++j;
    }
    return n;
}

void check_args(std::span<const Span> truth, std::size_t k) {
    if (k < 1) throw Error(ErrorCode::invalid_argument, "metrics", "k must be >= 1");
    if (truth.empty()) throw Error(ErrorCode::empty_ground_truth, "metrics", "case has no ground-truth spans");
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::not_found, "eval", "cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

std::vector<Span> normalize_spans(std::vector<Span> spans, bool* merged) {
    if (merged != nullptr) *merged = false;
    std::erase_if(spans, [](const Span& s) { return s.empty(); });
    std::sort(spans.begin(), spans.end(),
              [](const Span& a, const Span& b) { return a.start != b.start ? a.start < b.start : a.end < b.end; });
    std::vector<Span> out;
    for (const auto& s : spans) {
        if (!out.empty() && s.start <= out.back().end) {
            out.back().end = std::max(out.back().end, s.end);
            if (merged != nullptr) *merged = true;
        } else {
            out.push_back(s);
        }
    }
    return out;
}

PrecisionRecall char_pr_at_k(std::span<const Span> retrieved, std::span<const Span> truth, std::size_t k) {
    check_args(truth, k);
    const std::size_t top = std::min(k, retrieved.size());
    const auto r = normalize_spans({retrieved.begin(), retrieved.begin() + static_cast<long>(top)});
    const auto t = normalize_spans({truth.begin(), truth.end()});
    const std::size_t inter = intersection_length(r, t);
    const std::size_t r_len = union_length(r);
    const std::size_t t_len = union_length(t);
    PrecisionRecall pr;
    pr.precision = r_len == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(r_len);
    pr.recall = t_len == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(t_len);
    return pr;
}

PrecisionRecall span_pr_at_k(std::span<const Span> retrieved, std::span<const Span> truth, std::size_t k) {
    check_args(truth, k);
    const std::size_t top = std::min(k, retrieved.size());
    std::size_t hits = 0;
    std::vector<bool> covered(truth.size(), false);
    for (std::size_t i = 0; i < top; ++i) {
        bool hit = false;
        for (std::size_t j = 0; j < truth.size(); ++j) {
            if (retrieved[i].overlaps(truth[j])) {
                hit = true;
                covered[j] = true;
            }
        }
        hits += hit ? 1 : 0;
    }
    PrecisionRecall pr;
    pr.precision = top == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(top);
    pr.recall = static_cast<double>(std::count(covered.begin(), covered.end(), true)) / static_cast<double>(truth.size());
    return pr;
}

std::vector<Span> perfect_oracle(const BenchmarkCase& c) { return c.ground_truth; }

std::size_t chars_at_k(std::span<const Span> retrieved, std::size_t k) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < std::min(k, retrieved.size()); ++i) n += retrieved[i].length();
    return n;
}

std::vector<double> char_volume_stats(const std::vector<std::vector<Span>>& results, std::span<const std::size_t> k_grid) {
    std::vector<double> out(k_grid.size(), 0.0);
    if (results.empty()) return out;
    for (std::size_t g = 0; g < k_grid.size(); ++g) {
        double total = 0.0;
        for (const auto& r : results) total += static_cast<double>(chars_at_k(r, k_grid[g]));
        out[g] = total / static_cast<double>(results.size());
    }
    return out;
}

LoadedCases load_cases(const std::filesystem::path& cases_jsonl) {
    const std::string body = read_file(cases_jsonl);
    LoadedCases out;
    std::set<std::string> ids;
    std::size_t line_no = 0;
    for (const auto& line : text::split_lines(body)) {
        ++line_no;
        if (text::is_blank(line)) continue;
        const std::string where = cases_jsonl.filename().string() + ":" + std::to_string(line_no);
        BenchmarkCase c;
        try {
            const auto j = nlohmann::json::parse(line);
            c.case_id = j.contains("case_id") ? (j["case_id"].is_string() ? j["case_id"].get<std::string>()
                                                                           : j["case_id"].dump())
                                              : std::to_string(out.cases.size());
            c.query = j.at("query").get<std::string>();
            c.document_id = j.at("document_id").get<std::string>();
            for (const auto& s : j.at("spans")) {
                Span sp;
                if (s.is_array()) sp = {s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()};
                else sp = {s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>()};
                if (sp.end <= sp.start)
                    throw Error(ErrorCode::invalid_argument, "eval_load",
                                where + ": span [" + std::to_string(sp.start) + ", " + std::to_string(sp.end) +
                                    ") is empty or reversed");
                c.ground_truth.push_back(sp);
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::invalid_argument, "eval_load", where + ": " + e.what());
        }
        if (text::is_blank(c.query)) throw Error(ErrorCode::invalid_argument, "eval_load", where + ": empty query");
        if (!ids.insert(c.case_id).second)
            throw Error(ErrorCode::invalid_argument, "eval_load", where + ": duplicate case_id " + c.case_id);
        bool merged = false;
        c.ground_truth = normalize_spans(std::move(c.ground_truth), &merged);
        if (merged) out.warnings.push_back("case " + c.case_id + ": overlapping ground-truth spans merged");
        out.cases.push_back(std::move(c));
    }
    return out;
}

std::filesystem::path document_path(const std::filesystem::path& corpus_dir, const std::string& document_id) {
    const std::filesystem::path rel(document_id);
    if (document_id.empty() || rel.is_absolute() ||
        std::any_of(rel.begin(), rel.end(), [](const std::filesystem::path& p) { return p == ".."; }))
        throw Error(ErrorCode::invalid_argument, "eval_load", "document_id must be a relative path: " + document_id);
    const auto nested = corpus_dir / "documents" / rel;
    if (std::filesystem::exists(nested)) return nested;
    return corpus_dir / rel;
}

Corpus load_corpus(const std::filesystem::path& corpus_dir) {
    if (!std::filesystem::is_directory(corpus_dir))
        throw Error(ErrorCode::not_found, "eval_load", "corpus directory not found: " + corpus_dir.string());
    const auto cases_path = corpus_dir / "cases.jsonl";
    if (!std::filesystem::exists(cases_path))
        throw Error(ErrorCode::not_found, "eval_load", "missing " + cases_path.string());
    auto loaded = load_cases(cases_path);
    if (loaded.cases.empty()) throw Error(ErrorCode::invalid_argument, "eval_load", "corpus has no cases");
    Corpus c;
    c.dir = corpus_dir;
    c.cases = std::move(loaded.cases);
    c.warnings = std::move(loaded.warnings);
    for (const auto& bc : c.cases) {
        if (c.documents.contains(bc.document_id)) continue;
        const auto p = document_path(corpus_dir, bc.document_id);
        if (!std::filesystem::is_regular_file(p)) {
            c.warnings.push_back("document not found: " + bc.document_id);
            continue;
        }
        c.documents.emplace(bc.document_id, read_file(p));
    }
    return c;
}

namespace {

MetricsReport score(const std::vector<BenchmarkCase>& cases, const std::vector<std::optional<std::vector<Span>>>& retrieved,
                    std::span<const std::size_t> k_grid) {
    if (k_grid.empty()) throw Error(ErrorCode::invalid_argument, "metrics", "k grid is empty");
    MetricsReport rep;
    rep.cases_total = cases.size();
    rep.rows.resize(k_grid.size());
    for (std::size_t g = 0; g < k_grid.size(); ++g) rep.rows[g].k = k_grid[g];
    std::vector<std::vector<Span>> scored_lists;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        if (!retrieved[i]) continue;
        const auto& r = *retrieved[i];
        const auto& t = cases[i].ground_truth;
        for (std::size_t g = 0; g < k_grid.size(); ++g) {
            const auto c = char_pr_at_k(r, t, k_grid[g]);
            const auto s = span_pr_at_k(r, t, k_grid[g]);
            rep.rows[g].precision_char += c.precision;
            rep.rows[g].recall_char += c.recall;
            rep.rows[g].precision_span += s.precision;
            rep.rows[g].recall_span += s.recall;
        }
        scored_lists.push_back(r);
    }
    rep.cases_scored = scored_lists.size();
    const auto volume = char_volume_stats(scored_lists, k_grid);
    for (std::size_t g = 0; g < k_grid.size(); ++g) {
        auto& row = rep.rows[g];
        if (rep.cases_scored > 0) {
            const auto n = static_cast<double>(rep.cases_scored);
            row.precision_char /= n;
            row.recall_char /= n;
            row.precision_span /= n;
            row.recall_span /= n;
        }
        row.avg_chars_retrieved = volume[g];
    }
    return rep;
}

}  // namespace

MetricsReport score_cases(const std::vector<BenchmarkCase>& cases, const std::vector<std::vector<Span>>& retrieved,
                          std::span<const std::size_t> k_grid) {
    if (retrieved.size() != cases.size())
        throw Error(ErrorCode::invalid_argument, "metrics", "one result list per case is required");
    std::vector<std::optional<std::vector<Span>>> r(retrieved.begin(), retrieved.end());
    return score(cases, r, k_grid);
}

MetricsReport run_benchmark(const Corpus& corpus, const PipelineConfig& config, std::span<const std::size_t> k_grid) {
    if (corpus.cases.empty()) throw Error(ErrorCode::invalid_argument, "eval", "corpus has no cases");
    if (!config.retriever && (config.embedder == nullptr || config.reranker == nullptr))
        throw Error(ErrorCode::config, "eval", "the retrieval pipeline needs an embedder and a reranker");
    config.retrieval.validate();

    // Index every document once.
    std::vector<std::string> doc_ids;
    for (const auto& [id, _] : corpus.documents) doc_ids.push_back(id);
    std::vector<std::optional<index::ChunkIndex>> indices(doc_ids.size());
    std::vector<std::optional<Error>> doc_errors(doc_ids.size());
    const auto n_docs = static_cast<long>(doc_ids.size());
#pragma omp parallel for schedule(dynamic) if (config.parallel)
    for (long d = 0; d < n_docs; ++d) {
        const auto i = static_cast<std::size_t>(d);
        try {
            const auto tree = doctree::parse_document(corpus.documents.at(doc_ids[i]), doc_ids[i], config.parse);
            indices[i] = index::build_document_index(tree, config.retriever ? nullptr : config.embedder);
        } catch (const Error& e) {
            doc_errors[i] = e.with_stage("index:" + e.stage());
        } catch (const std::exception& e) {
            doc_errors[i] = Error(ErrorCode::io, "index", e.what());
        }
    }
    std::map<std::string, std::size_t> doc_slot;
    for (std::size_t i = 0; i < doc_ids.size(); ++i) doc_slot[doc_ids[i]] = i;

    const auto& cases = corpus.cases;
    std::vector<std::optional<std::vector<Span>>> retrieved(cases.size());
    std::vector<std::optional<CaseFailure>> failed(cases.size());
    const auto n_cases = static_cast<long>(cases.size());
#pragma omp parallel for schedule(dynamic) if (config.parallel)
    for (long ci = 0; ci < n_cases; ++ci) {
        const auto i = static_cast<std::size_t>(ci);
        const auto& c = cases[i];
        try {
            const auto slot = doc_slot.find(c.document_id);
            if (slot == doc_slot.end())
                throw Error(ErrorCode::not_found, "eval_load", "document not found: " + c.document_id);
            if (doc_errors[slot->second]) throw *doc_errors[slot->second];
            const auto& idx = *indices[slot->second];
            const std::size_t doc_len = corpus.documents.at(c.document_id).size();
            for (const auto& s : c.ground_truth)
                if (s.end > doc_len)
                    throw Error(ErrorCode::span_out_of_bounds, "eval_load",
                                "ground-truth span ends at " + std::to_string(s.end) + " past document length " +
                                    std::to_string(doc_len));
            if (c.ground_truth.empty())
                throw Error(ErrorCode::empty_ground_truth, "metrics", "case has no ground-truth spans");
            std::vector<Span> spans;
            if (config.retriever) {
                spans = config.retriever(c, idx);
            } else {
                const auto res = retrieval::retrieve(
                    c.query, idx, {*config.embedder, *config.reranker, config.query_chat, config.filter_chat},
                    config.retrieval);
                for (const auto& s : res.spans) spans.push_back(s.core_span);
            }
            retrieved[i] = std::move(spans);
        } catch (const Error& e) {
            failed[i] = CaseFailure{c.case_id, std::string(to_string(e.code())), e.stage(), e.what()};
        } catch (const std::exception& e) {
            failed[i] = CaseFailure{c.case_id, "internal", "eval", e.what()};
        }
    }

    MetricsReport rep = score(cases, retrieved, k_grid);
    for (auto& f : failed)
        if (f) rep.failures.push_back(std::move(*f));
    rep.warnings = corpus.warnings;
    return rep;
}

MetricsReport run_benchmark(const std::filesystem::path& corpus_dir, const PipelineConfig& config,
                            std::span<const std::size_t> k_grid) {
    return run_benchmark(load_corpus(corpus_dir), config, k_grid);
}

std::string metrics_csv(const MetricsReport& rep) {
    std::string out = "k,precision_char,recall_char,precision_span,recall_span,avg_chars_retrieved\n";
    for (const auto& r : rep.rows) {
        out += std::to_string(r.k) + "," + fixed6(r.precision_char) + "," + fixed6(r.recall_char) + "," +
               fixed6(r.precision_span) + "," + fixed6(r.recall_span) + "," + fixed6(r.avg_chars_retrieved) + "\n";
    }
    return out;
}

std::string metrics_json(const MetricsReport& rep, int indent) {
    nlohmann::ordered_json j;
    j["cases_total"] = rep.cases_total;
    j["cases_scored"] = rep.cases_scored;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rep.rows) {
        j["rows"].push_back({{"k", r.k},
                             {"precision_char", r.precision_char},
                             {"recall_char", r.recall_char},
                             {"precision_span", r.precision_span},
                             {"recall_span", r.recall_span},
                             {"avg_chars_retrieved", r.avg_chars_retrieved}});
    }
    j["failures"] = nlohmann::ordered_json::array();
    for (const auto& f : rep.failures)
        j["failures"].push_back({{"case_id", f.case_id}, {"code", f.code}, {"stage", f.stage}, {"message", f.message}});
    j["warnings"] = rep.warnings;
    return j.dump(indent);
}

void write_metrics(const MetricsReport& rep, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    for (const auto& [name, body] : {std::pair{"metrics.csv", metrics_csv(rep)},
                                     std::pair{"metrics.json", metrics_json(rep) + "\n"}}) {
        std::ofstream out(out_dir / name, std::ios::binary);
        if (!out) throw Error(ErrorCode::io, "eval", "cannot write " + (out_dir / name).string());
        out << body;
    }
}

std::vector<std::size_t> parse_k_grid(std::string_view spec) {
    std::set<std::size_t> ks;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        auto comma = spec.find(',', pos);
        if (comma == std::string_view::npos) comma = spec.size();
        const auto item = text::trim(spec.substr(pos, comma - pos));
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() || v == 0)
            throw Error(ErrorCode::invalid_argument, "eval", "bad k value '" + std::string(item) + "'");
        ks.insert(v);
        pos = comma + 1;
    }
    return {ks.begin(), ks.end()};
}

}  // namespace clausekit::eval
