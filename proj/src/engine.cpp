#include "clausekit/engine.hpp"

#include <condition_variable>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

namespace clausekit {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

config::ChatStage stage_of(llm::CallRole role) {
    using llm::CallRole;
    switch (role) {
        case CallRole::archivist_turn:
        case CallRole::archivist_finalize:
        case CallRole::llm_parse:
        case CallRole::summarize: return config::ChatStage::archivist;
        case CallRole::interrogator_question:
        case CallRole::report_refine: return config::ChatStage::interrogator;
        case CallRole::researcher_query_extract:
        case CallRole::researcher_nl_response: return config::ChatStage::researcher;
        case CallRole::filter: return config::ChatStage::filter;
    }
    return config::ChatStage::archivist;
}

class StageRouter : public llm::ChatClient {
public:
    StageRouter(const config::Providers& providers, const config::EngineConfig& cfg) {
        for (auto st : config::kChatStages) {
            clients_[st] = providers.chat.at(st);
            const auto it = cfg.chat.find(st);
            temperature_[st] = it == cfg.chat.end() ? 0.0 : it->second.profile.temperature;
        }
    }
    std::string model_id() const override { return clients_.at(config::ChatStage::interrogator)->model_id(); }

private:
    llm::ChatResponse do_complete(const llm::ChatRequest& request) override {
        const auto st = stage_of(request.role);
        llm::ChatRequest r = request;
        r.temperature = temperature_.at(st);
        return clients_.at(st)->complete(r);
    }

    std::map<config::ChatStage, std::shared_ptr<llm::ChatClient>> clients_;
    std::map<config::ChatStage, double> temperature_;
};

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "storage", "cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::filesystem::path& p, const std::string& body) {
    const auto tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error(ErrorCode::io, "storage", "cannot write " + p.string());
        out << body;
    }
    std::error_code ec;
    std::filesystem::rename(tmp, p, ec);
    if (ec) throw Error(ErrorCode::io, "storage", "cannot write " + p.string() + ": " + ec.message());
}

bool valid_id(const std::string& id) {
    static const std::regex re("^[0-9a-f]{16}$");
    return std::regex_match(id, re);
}

std::string random_id() {
    static std::mutex mu;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mu);
    return text::hex64(rng());
}

ordered_json retrieval_summary(const retrieval::RetrievalResult& r) {
    ordered_json spans = ordered_json::array();
    for (const auto& s : r.spans)
        spans.push_back({{"chunk_id", s.chunk_id}, {"filename", s.filename}, {"start", s.core_span.start},
                         {"end", s.core_span.end}, {"score", s.rerank_score_norm}});
    return spans;
}

}  // namespace

struct Engine::Document {
    std::string id;
    std::string filename;
    doctree::DocumentTree tree;
    std::shared_ptr<const index::ChunkIndex> index;
    std::size_t llm_parse_calls = 0;
    ordered_json info;
};

struct Engine::Session {
    std::mutex mu;
    std::condition_variable cv;
    std::string id;
    std::string document_id;
    agents::ArchivistSession archivist;
    llm::CostLedger ledger;
    std::size_t llm_parse_calls = 0;
    std::string status = "idle";  // idle | running | done | failed
    std::size_t d_max = 0;
    ordered_json turns = ordered_json::array();
    std::optional<report::Report> report;
    std::string stopped_by = "none";
    std::optional<Error> error;
    ordered_json cost;  // restored from disk for sessions not run in this process
    std::thread worker;
};

Engine::Engine(config::EngineConfig cfg) : Engine(cfg, config::make_providers(cfg)) {}

Engine::Engine(config::EngineConfig cfg, config::Providers providers)
    : cfg_(std::move(cfg)), providers_(std::move(providers)) {
    cfg_.validate();
    router_ = std::make_shared<StageRouter>(providers_, cfg_);
    docs_dir_ = cfg_.storage_root / "documents";
    sessions_dir_ = cfg_.storage_root / "sessions";
    std::error_code ec;
    std::filesystem::create_directories(docs_dir_, ec);
    std::filesystem::create_directories(sessions_dir_, ec);
    const auto probe = cfg_.storage_root / ".write-probe";
    std::ofstream out(probe);
    if (ec || !out)
        throw Error(ErrorCode::config, "config", "storage_root is not writable: " + cfg_.storage_root.string());
    out.close();
    std::filesystem::remove(probe, ec);
}

Engine::~Engine() {
    std::vector<std::shared_ptr<Session>> all;
    {
        std::lock_guard lock(mu_);
        for (auto& [_, s] : sessions_) all.push_back(s);
    }
    for (auto& s : all)
        if (s->worker.joinable()) s->worker.join();
}

// ---------------------------------------------------------------------------
// Documents

ordered_json Engine::ingest(const std::string& body, const std::string& filename_in) {
    if (text::is_blank(body)) throw Error(ErrorCode::invalid_argument, "ingest", "document text is empty");
    const std::string id = text::hex64(text::fnv1a64(body));
    {
        std::lock_guard lock(mu_);
        if (auto it = documents_.find(id); it != documents_.end()) return it->second->info;
    }
    if (std::filesystem::exists(docs_dir_ / id / "meta.json")) return load_document(id)->info;

    const std::string filename = text::is_blank(filename_in) ? "document.txt" : filename_in;
    auto doc = std::make_shared<Document>();
    doc->id = id;
    doc->filename = filename;
    llm::CostLedger ledger;
    llm::AccountedChat chat(*router_, ledger);
    doctree::DocumentTree tree;
    try {
        tree = cfg_.llm_parsing ? doctree::parse_document_llm(body, filename, chat)
                                : doctree::parse_document(body, filename);
    } catch (const Error& e) {
        throw e.with_stage("parse");
    }
    if (cfg_.summarize) {
        auto outcome = doctree::summarize_document(std::move(tree), chat);
        tree = std::move(outcome.tree);
        if (outcome.error) tree.warnings.push_back(std::string("summary skipped: ") + outcome.error->what());
    }
    doc->llm_parse_calls = ledger.count(llm::CallRole::llm_parse);
    auto index = std::make_shared<index::ChunkIndex>(index::build_document_index(tree, providers_.embedder.get()));

    doc->info = ordered_json{{"document_id", id},
                             {"filename", filename},
                             {"parse_mode", doctree::to_string(tree.parse_mode)},
                             {"chunk_count", index->size()},
                             {"node_count", tree.size()},
                             {"warnings", tree.warnings}};
    const auto dir = docs_dir_ / id;
    std::filesystem::create_directories(dir);
    write_file(dir / "source.txt", body);
    write_file(dir / "tree.json", doctree::to_json(tree, 2));
    index->save(dir / "index");
    ordered_json meta = doc->info;
    meta["llm_parse_calls"] = doc->llm_parse_calls;
    write_file(dir / "meta.json", meta.dump(2));

    doc->tree = std::move(tree);
    doc->index = std::move(index);
    std::lock_guard lock(mu_);
    documents_.emplace(id, doc);
    return doc->info;
}

std::shared_ptr<Engine::Document> Engine::load_document(const std::string& id) {
    {
        std::lock_guard lock(mu_);
        if (auto it = documents_.find(id); it != documents_.end()) return it->second;
    }
    const auto dir = docs_dir_ / id;
    if (!valid_id(id) || !std::filesystem::exists(dir / "meta.json"))
        throw Error(ErrorCode::not_found, "documents", "no document with id " + id);
    auto doc = std::make_shared<Document>();
    doc->id = id;
    std::string source = read_file(dir / "source.txt");
    doc->tree = doctree::tree_from_json(read_file(dir / "tree.json"), std::move(source));
    doc->filename = doc->tree.filename;
    doc->index = std::make_shared<index::ChunkIndex>(index::ChunkIndex::load(dir / "index"));
    json meta = json::parse(read_file(dir / "meta.json"));
    doc->llm_parse_calls = meta.value("llm_parse_calls", std::size_t{0});
    meta.erase("llm_parse_calls");
    doc->info = ordered_json{{"document_id", id},
                             {"filename", doc->filename},
                             {"parse_mode", doctree::to_string(doc->tree.parse_mode)},
                             {"chunk_count", doc->index->size()},
                             {"node_count", doc->tree.size()},
                             {"warnings", doc->tree.warnings}};
    std::lock_guard lock(mu_);
    return documents_.emplace(id, doc).first->second;
}

ordered_json Engine::document(const std::string& id) {
    const auto doc = load_document(id);
    ordered_json j = doc->info;
    j["summary"] = doc->tree.summary ? ordered_json(*doc->tree.summary) : ordered_json(nullptr);
    j["tree"] = ordered_json::parse(doctree::to_json(doc->tree));
    return j;
}

std::string Engine::chunks_jsonl(const std::string& id) { return chunker::to_jsonl(load_document(id)->index->chunks()); }

std::shared_ptr<const index::ChunkIndex> Engine::document_index(const std::string& id) { return load_document(id)->index; }

// ---------------------------------------------------------------------------
// Sessions

namespace {

ordered_json cost_json(const llm::CostLedger& ledger, std::size_t parse_calls, std::size_t d_int, bool nl_response) {
    ordered_json by_role = ordered_json::object();
    for (auto r : {llm::CallRole::archivist_turn, llm::CallRole::archivist_finalize, llm::CallRole::llm_parse,
                   llm::CallRole::interrogator_question, llm::CallRole::researcher_query_extract,
                   llm::CallRole::researcher_nl_response, llm::CallRole::report_refine, llm::CallRole::summarize,
                   llm::CallRole::filter}) {
        std::size_t n = ledger.count(r) + (r == llm::CallRole::llm_parse ? parse_calls : 0);
        if (n > 0) by_role[std::string(llm::to_string(r))] = n;
    }
    ordered_json j;
    j["calls"] = ledger.size() + parse_calls;
    j["expected_calls"] = llm::expected_call_count(ledger.n_turns(), d_int, parse_calls > 0, nl_response);
    j["by_role"] = std::move(by_role);
    return j;
}

}  // namespace

void Engine::persist(const Session& s) const {
    ordered_json j;
    j["session_id"] = s.id;
    j["document_id"] = s.document_id;
    j["status"] = s.status;
    j["d_max"] = s.d_max;
    j["archivist"] = ordered_json::parse(s.archivist.to_json());
    j["turns"] = s.turns;
    j["report"] = s.report ? ordered_json::parse(report::to_json(*s.report)) : ordered_json(nullptr);
    j["stopped_by"] = s.stopped_by;
    j["error"] = s.error ? error_body(*s.error) : ordered_json(nullptr);
    j["cost"] = s.cost;
    write_file(sessions_dir_ / (s.id + ".json"), j.dump(2));
}

std::shared_ptr<Engine::Session> Engine::session(const std::string& id) {
    {
        std::lock_guard lock(mu_);
        if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
    }
    const auto path = sessions_dir_ / (id + ".json");
    if (!valid_id(id) || !std::filesystem::exists(path))
        throw Error(ErrorCode::not_found, "sessions", "no session with id " + id);
    const auto j = json::parse(read_file(path));
    auto s = std::make_shared<Session>();
    s->id = id;
    s->document_id = j.at("document_id").get<std::string>();
    s->archivist = agents::ArchivistSession::from_json(j.at("archivist").dump());
    s->status = j.value("status", std::string("idle"));
    s->d_max = j.value("d_max", std::size_t{0});
    s->turns = ordered_json::parse(j.at("turns").dump());
    if (!j.at("report").is_null()) s->report = report::from_json(j["report"].dump());
    s->stopped_by = j.value("stopped_by", std::string("none"));
    s->cost = ordered_json::parse(j.value("cost", json::object()).dump());
    if (s->status == "running") {
        s->status = "failed";
        s->error = Error(ErrorCode::io, "interrogator", "interrupted by a server restart");
    } else if (!j.at("error").is_null()) {
        const auto& e = j["error"];
        ErrorCode code = ErrorCode::upstream;
        for (int c = 0; c <= static_cast<int>(ErrorCode::io); ++c)
            if (to_string(static_cast<ErrorCode>(c)) == e.value("code", std::string())) code = static_cast<ErrorCode>(c);
        s->error = Error(code, e.value("stage", std::string()), e.value("message", std::string()));
    }
    std::lock_guard lock(mu_);
    return sessions_.emplace(id, s).first->second;
}

ordered_json Engine::create_session(const std::string& document_id) {
    const auto doc = load_document(document_id);
    auto s = std::make_shared<Session>();
    s->id = random_id();
    s->document_id = document_id;
    s->llm_parse_calls = doc->llm_parse_calls;
    s->d_max = cfg_.d_max;
    s->cost = cost_json(s->ledger, s->llm_parse_calls, 0, cfg_.nl_response);
    persist(*s);
    {
        std::lock_guard lock(mu_);
        sessions_.emplace(s->id, s);
    }
    return ordered_json{{"session_id", s->id}, {"document_id", document_id}};
}

ordered_json Engine::post_message(const std::string& session_id, const std::string& message, bool finalize) {
    auto s = session(session_id);
    std::lock_guard lock(s->mu);
    if (s->status != "idle")
        throw Error(ErrorCode::invalid_argument, "archivist", "the session is already " + s->status);
    llm::AccountedChat chat(*router_, s->ledger);
    const auto outcome = s->archivist.converse(message, chat, finalize);
    s->cost = cost_json(s->ledger, s->llm_parse_calls, 0, cfg_.nl_response);
    persist(*s);
    ordered_json j = ordered_json::object();
    if (outcome.reply) j["reply"] = *outcome.reply;
    if (outcome.brief) j["brief"] = ordered_json::parse(agents::to_json(*outcome.brief));
    return j;
}

ordered_json Engine::start_interrogation(const std::string& session_id, std::optional<std::size_t> d_max) {
    auto s = session(session_id);
    const std::size_t depth = d_max.value_or(cfg_.d_max);
    if (depth < 1) throw Error(ErrorCode::invalid_argument, "interrogator", "d_max must be >= 1");
    std::lock_guard lock(s->mu);
    if (!s->archivist.finalized())
        throw Error(ErrorCode::invalid_argument, "interrogator", "finalize the brief before interrogating");
    if (s->status != "idle")
        throw Error(ErrorCode::invalid_argument, "interrogator",
                    "the session is already " + s->status + "; start a new session");
    load_document(s->document_id);  // surface not_found synchronously
    s->status = "running";
    s->d_max = depth;
    persist(*s);
    if (s->worker.joinable()) s->worker.join();
    s->worker = std::thread([this, s, depth] { run_session(s, depth); });
    return ordered_json{{"session_id", s->id}, {"status", s->status}};
}

void Engine::run_session(std::shared_ptr<Session> s, std::size_t d_max) {
    agents::UserBrief brief;
    {
        std::lock_guard lock(s->mu);
        brief = *s->archivist.brief();
    }
    auto record_turns = [&](const agents::InterrogationState& st) {
        s->turns = ordered_json::array();
        for (const auto& t : st.turns)
            s->turns.push_back({{"question", t.question},
                                {"tool", t.answer.tool},
                                {"query", t.answer.query},
                                {"spans", retrieval_summary(t.answer.retrieval)}});
        if (st.report) s->report = st.report;
        s->cost = cost_json(s->ledger, s->llm_parse_calls, st.turns.size(), cfg_.nl_response);
    };
    try {
        const auto doc = load_document(s->document_id);
        llm::AccountedChat chat(*router_, s->ledger);
        llm::AccountedChat filter_chat(*router_, s->ledger);
        agents::InterrogationOptions opts;
        opts.d_max = d_max;
        opts.research.retrieval = cfg_.retrieval;
        opts.research.nl_response = cfg_.nl_response;
        agents::ResearchResources resources{doc->index.get(), nullptr};
        agents::ResearchClients clients{chat, *providers_.embedder, *providers_.reranker,
                                        cfg_.retrieval.llm_filter ? &filter_chat : nullptr};
        auto result = agents::run_interrogation(brief, resources, clients, opts, [&](const agents::InterrogationState& st) {
            std::lock_guard lock(s->mu);
            record_turns(st);
            persist(*s);
        });
        std::lock_guard lock(s->mu);
        record_turns(result.state);
        s->stopped_by = std::string(agents::to_string(result.state.stopped_by));
        s->status = "done";
        persist(*s);
    } catch (const agents::InterrogationError& e) {
        std::lock_guard lock(s->mu);
        record_turns(e.state());
        s->error = Error(e);
        s->status = "failed";
        persist(*s);
    } catch (const Error& e) {
        std::lock_guard lock(s->mu);
        s->error = e;
        s->status = "failed";
        persist(*s);
    } catch (const std::exception& e) {
        std::lock_guard lock(s->mu);
        s->error = Error(ErrorCode::io, "interrogator", e.what());
        s->status = "failed";
        persist(*s);
    }
    s->cv.notify_all();
}

void Engine::wait(const std::string& session_id) {
    auto s = session(session_id);
    std::unique_lock lock(s->mu);
    s->cv.wait(lock, [&] { return s->status != "running"; });
}

ordered_json Engine::progress(const std::string& session_id) {
    auto s = session(session_id);
    std::lock_guard lock(s->mu);
    ordered_json j;
    j["session_id"] = s->id;
    j["document_id"] = s->document_id;
    j["status"] = s->status;
    j["d_max"] = s->d_max;
    j["turns_completed"] = s->turns.size();
    j["turns"] = s->turns;
    j["title"] = s->report ? ordered_json(s->report->title) : ordered_json(nullptr);
    j["stopped_by"] = s->stopped_by;
    j["brief"] = s->archivist.brief() ? ordered_json::parse(agents::to_json(*s->archivist.brief())) : ordered_json(nullptr);
    j["error"] = s->error ? error_body(*s->error) : ordered_json(nullptr);
    return j;
}

ordered_json Engine::report_locked(const Session& s) const {
    if (!s.report) throw Error(ErrorCode::not_found, "report", "no report has been drafted for this session yet");
    ordered_json j;
    j["markdown"] = report::render_markdown(*s.report, true);
    j["report"] = ordered_json::parse(report::to_json(*s.report));
    j["nli_label"] = report::to_string(report::extract_nli_label(*s.report));
    j["status"] = s.status;
    j["stopped_by"] = s.stopped_by;
    j["turns"] = s.turns.size();
    j["cost"] = s.cost;
    return j;
}

ordered_json Engine::report(const std::string& session_id) {
    auto s = session(session_id);
    std::lock_guard lock(s->mu);
    return report_locked(*s);
}

ordered_json Engine::ask(const std::string& document_id, const std::string& question, std::optional<std::size_t> d_max) {
    const auto id = create_session(document_id).at("session_id").get<std::string>();
    post_message(id, question, true);
    start_interrogation(id, d_max);
    wait(id);
    auto s = session(id);
    std::lock_guard lock(s->mu);
    if (s->status == "failed" && s->error) throw *s->error;
    return report_locked(*s);
}

// ---------------------------------------------------------------------------
// Evaluation

ordered_json Engine::evaluate(const std::filesystem::path& corpus_dir, const std::vector<std::size_t>& k_grid,
                              const std::optional<std::filesystem::path>& out_dir) {
    llm::CostLedger ledger;
    llm::AccountedChat chat(*router_, ledger);
    eval::PipelineConfig pc;
    pc.retrieval = cfg_.retrieval;
    pc.embedder = providers_.embedder.get();
    pc.reranker = providers_.reranker.get();
    pc.query_chat = &chat;
    pc.filter_chat = cfg_.retrieval.llm_filter ? &chat : nullptr;
    const auto& grid = k_grid.empty() ? eval::kDefaultKGrid : k_grid;
    const auto rep = eval::run_benchmark(corpus_dir, pc, grid);
    if (out_dir) eval::write_metrics(rep, *out_dir);
    return ordered_json::parse(eval::metrics_json(rep));
}

// ---------------------------------------------------------------------------

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument:
        case ErrorCode::empty_ground_truth:
        case ErrorCode::empty_graph: return 400;
        case ErrorCode::auth: return 401;
        case ErrorCode::not_found: return 404;
        case ErrorCode::upstream:
        case ErrorCode::schema_violation:
        case ErrorCode::degenerate_question: return 502;
        case ErrorCode::timeout: return 504;
        case ErrorCode::dimension_mismatch:
        case ErrorCode::span_out_of_bounds:
        case ErrorCode::config:
        case ErrorCode::bind:
        case ErrorCode::io: return 500;
    }
    return 500;
}

ordered_json error_body(const Error& e) {
    return ordered_json{{"code", to_string(e.code())}, {"stage", e.stage()}, {"message", e.what()}};
}

}  // namespace clausekit
