#pragma once

#include "clausekit/agents.hpp"
#include "clausekit/config.hpp"
#include "clausekit/eval.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace clausekit {

/// Storage layout under storage_root:
///   documents/<id>/source.txt, tree.json, index/   (id = content hash)
///   sessions/<id>.json
/// Every public method returns the JSON document that the CLI prints and the
/// HTTP API sends, so the two stay identical.
class Engine {
public:
    explicit Engine(config::EngineConfig cfg);
    Engine(config::EngineConfig cfg, config::Providers providers);
    ~Engine();

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    const config::EngineConfig& config() const { return cfg_; }

    /// {document_id, filename, parse_mode, chunk_count, node_count, warnings}.
    /// Re-ingesting identical text returns the stored document.
    nlohmann::ordered_json ingest(const std::string& text, const std::string& filename);
    nlohmann::ordered_json document(const std::string& document_id);
    std::string chunks_jsonl(const std::string& document_id);
    std::shared_ptr<const index::ChunkIndex> document_index(const std::string& document_id);

    /// {session_id, document_id}
    nlohmann::ordered_json create_session(const std::string& document_id);
    /// {reply} for a dialogue turn, {brief} once finalized (both may appear).
    nlohmann::ordered_json post_message(const std::string& session_id, const std::string& text, bool finalize);
    /// Starts the interrogation on a worker thread; {session_id, status}.
    nlohmann::ordered_json start_interrogation(const std::string& session_id, std::optional<std::size_t> d_max);
    /// Blocks until the session's worker is idle.
    void wait(const std::string& session_id);
    /// {status, d_max, turns_completed, turns:[{question, spans}], title, stopped_by, error}
    nlohmann::ordered_json progress(const std::string& session_id);
    /// {markdown, report, nli_label, stopped_by, turns, cost}. not_found
    /// before the first refined draft.
    nlohmann::ordered_json report(const std::string& session_id);

    /// Finalizes `question` as the brief of a fresh session, interrogates
    /// synchronously and returns report().
    nlohmann::ordered_json ask(const std::string& document_id, const std::string& question,
                               std::optional<std::size_t> d_max);

    /// Metrics JSON (same document as metrics.json). Writes metrics.csv and
    /// metrics.json when `out_dir` is given.
    nlohmann::ordered_json evaluate(const std::filesystem::path& corpus_dir, const std::vector<std::size_t>& k_grid,
                                    const std::optional<std::filesystem::path>& out_dir);

private:
    struct Session;
    struct Document;

    std::shared_ptr<Session> session(const std::string& id);
    std::shared_ptr<Document> load_document(const std::string& id);
    void persist(const Session& s) const;
    nlohmann::ordered_json report_locked(const Session& s) const;
    void run_session(std::shared_ptr<Session> s, std::size_t d_max);

    config::EngineConfig cfg_;
    config::Providers providers_;
    std::shared_ptr<llm::ChatClient> router_;  // dispatches each call role to its stage's client
    std::filesystem::path docs_dir_;
    std::filesystem::path sessions_dir_;

    std::mutex mu_;
    std::map<std::string, std::shared_ptr<Document>> documents_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// HTTP status for an error code.
int http_status(ErrorCode code);
nlohmann::ordered_json error_body(const Error& e);

}  // namespace clausekit
