#pragma once

#include "clausekit/llm.hpp"
#include "clausekit/retrieval.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace clausekit::config {

/// Chat stages that can each use their own provider.
enum class ChatStage { archivist, interrogator, researcher, filter };
inline constexpr ChatStage kChatStages[] = {ChatStage::archivist, ChatStage::interrogator, ChatStage::researcher,
                                            ChatStage::filter};
std::string_view to_string(ChatStage stage);

/// offline: deterministic rules (chat), hash embedder, lexical reranker.
/// http: OpenAI-compatible endpoint. replay: chat cassette, recording
/// through an http client when `record` is set.
enum class ProviderKind { offline, http, replay };

struct ProviderSpec {
    ProviderKind kind = ProviderKind::offline;
    llm::ProviderProfile profile;
    std::string cassette;  // replay only
    bool record = false;   // replay only
};

struct EngineConfig {
    std::map<ChatStage, ProviderSpec> chat;
    ProviderSpec embedder;
    std::size_t embedding_dim = 256;
    ProviderSpec reranker;

    retrieval::RetrievalConfig retrieval;
    std::size_t d_max = 5;
    bool nl_response = true;
    bool llm_parsing = false;
    bool summarize = false;

    std::filesystem::path storage_root = "clausekit-data";
    std::string host = "127.0.0.1";
    int port = 8080;
    /// Env var holding the static API token; empty disables the check.
    std::string api_token_env;

    /// Throws Error(config) with the offending key.
    void validate() const;
};

/// Every key a config file or CLAUSEKIT_* variable may set.
std::vector<std::string> known_keys();

/// Environment variable that overrides `key`: CLAUSEKIT_ + key uppercased
/// with '.' -> '_' (e.g. d_max -> CLAUSEKIT_D_MAX).
std::string env_name(std::string_view key);

void apply(EngineConfig& config, std::string_view key, std::string_view value);

/// `key = value` lines; '#' starts a comment. Unknown keys are an error.
void apply_file(EngineConfig& config, const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();
void apply_env(EngineConfig& config, const EnvLookup& env);

/// Defaults, then the file (when given), then the environment. Validated.
EngineConfig load(const std::optional<std::filesystem::path>& file, const EnvLookup& env = process_env());

struct Providers {
    std::map<ChatStage, std::shared_ptr<llm::ChatClient>> chat;
    std::shared_ptr<llm::Embedder> embedder;
    std::shared_ptr<llm::Reranker> reranker;

    llm::ChatClient& chat_for(ChatStage stage) const { return *chat.at(stage); }
};

Providers make_providers(const EngineConfig& config);

}  // namespace clausekit::config
