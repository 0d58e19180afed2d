#pragma once

#include "clausekit/engine.hpp"

#include <memory>
#include <optional>
#include <string>

namespace clausekit {

/// JSON-over-HTTP front end for an Engine.
///
///   GET  /health
///   POST /documents                      raw text, or {"text", "filename"}
///   GET  /documents/{id}
///   GET  /documents/{id}/chunks          JSONL
///   POST /sessions                       {"document_id"}
///   POST /sessions/{id}/messages         {"text", "finalize"?}
///   POST /sessions/{id}/interrogate      {"d_max"?}
///   GET  /sessions/{id}/progress
///   GET  /sessions/{id}/report
///   POST /eval                           {"corpus_dir", "k"?, "out_dir"?}
///
/// Failures answer {"code", "stage", "message"}. With a token configured
/// every route except /health requires "Authorization: Bearer <token>".
class ApiServer {
public:
    ApiServer(Engine& engine, std::optional<std::string> api_token = std::nullopt);
    ~ApiServer();

    /// Binds (port 0 picks a free port) and returns the bound port. Throws
    /// Error(bind).
    int bind(const std::string& host, int port);
    /// Serves until stop().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// The token named by config.api_token_env. Throws Error(config) when the
/// variable is named but unset.
std::optional<std::string> api_token(const config::EngineConfig& config);

}  // namespace clausekit
